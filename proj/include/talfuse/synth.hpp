#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse::synth {

/// Synthetic audio-visual episode generator settings. Episode, action and
/// gap lengths are counted in video snippets.
struct SynthConfig {
  std::size_t num_classes = 5;
  std::size_t video_dim = 16;
  std::size_t audio_dim = 16;
  double video_hop = 1.0;
  double video_window = 1.0;
  double audio_hop = 0.96;
  double audio_window = 0.96;
  std::size_t episode_len_min = 60;
  std::size_t episode_len_max = 100;
  std::size_t actions_min = 1;
  std::size_t actions_max = 4;
  std::size_t action_len_min = 4;
  std::size_t action_len_max = 16;
  /// Probability that a segment carries its class audio signature; otherwise
  /// its audio carries an unrelated ambient burst.
  double audio_informativeness = 0.9;
  /// Magnitude of the onset/offset audio transients.
  double transient_boost = 2.0;
  /// Norm of the class signature vectors.
  double video_signal = 5.0;
  double audio_signal = 4.0;
  /// Video signature fades in/out over this many snippets at segment edges.
  std::size_t video_edge_ramp = 2;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

/// Flat JSON object; absent keys keep their defaults, unknown keys are errors.
SynthConfig parse_config(const std::string& json_text);
std::string dump_config(const SynthConfig& cfg);

/// Episode `index` of the stream defined by cfg.seed. Class signatures depend
/// on cfg.seed only, so every episode of one stream shares them. Feature
/// values are rounded to 32-bit float precision so files reload exactly.
Episode generate_episode(const SynthConfig& cfg, std::uint64_t index,
                         const std::string& video_id);

struct ManifestEntry {
  std::string video_id;
  std::string split;  // "train" or "test"
  std::filesystem::path video;
  std::filesystem::path audio;
  std::filesystem::path annotations;
  bool operator==(const ManifestEntry&) const = default;
};

/// Manifest file: a {"record":"dataset",...} header line followed by one
/// {"record":"episode",...} line per episode. Paths in the file are relative to
/// the manifest's directory; in memory they are resolved.
struct Manifest {
  std::size_t num_classes = 0;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& name) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Writes features, per-split annotation files and `manifest.jsonl` into
/// `out_dir`. Train episodes use stream indices [0, n_train), test episodes
/// [n_train, n_train + n_test).
Manifest generate_dataset(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test,
                          const std::filesystem::path& out_dir);

/// In-memory counterpart of generate_dataset.
struct Dataset {
  std::vector<Episode> train;
  std::vector<Episode> test;
};
Dataset generate_in_memory(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test);

std::string episode_id(const std::string& split, std::size_t i);

}  // namespace talfuse::synth
