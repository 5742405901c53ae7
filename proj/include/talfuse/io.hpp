#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse::io {

// MMFS binary feature container, version 1. All fields little-endian:
//
//   offset  size  field
//   0       4     magic "MMFS"
//   4       4     version (u32) = 1
//   8       1     modality (u8): 0 video, 1 audio, 2 fused
//   9       8     L (u64)
//   17      8     d (u64)
//   25      8     start_offset (f64, seconds)
//   33      8     hop (f64, seconds)
//   41      8     window (f64, seconds)
//   49      4*L*d payload, f32 row-major
inline constexpr char kFeatureMagic[4] = {'M', 'M', 'F', 'S'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderSize = 49;

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::span<const std::uint8_t> bytes);

FeatureSequence read_features(const std::filesystem::path& path);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);

// Newline-delimited records, one JSON object per line:
//   {"video_id": str, "t_start": num, "t_end": num, "label": str, "score": num}
// Ground-truth lines carry no "score". Blank lines are skipped. Readers group
// records by video in first-appearance order and keep per-video line order.
std::vector<ProposalSet> parse_proposals(const std::string& text);
std::string format_proposals(std::span<const ProposalSet> sets);
std::vector<ProposalSet> read_proposals(const std::filesystem::path& path);
void write_proposals(std::span<const ProposalSet> sets,
                     const std::filesystem::path& path);

/// The annotation format has no duration field, so each video's duration is
/// taken as its latest segment end.
std::vector<GroundTruth> parse_ground_truth(const std::string& text);
std::string format_ground_truth(std::span<const GroundTruth> gts);
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(std::span<const GroundTruth> gts,
                        const std::filesystem::path& path);

// Parameter checkpoint ("MMCK", version 1), little-endian:
//   magic "MMCK" | version u32 | metadata length u32 | metadata bytes (UTF-8
//   JSON) | section count u32 | per section: name length u16, name bytes,
//   rows u64, cols u64 | payloads f64 row-major, in section order.
struct CheckpointSection {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  std::string metadata;
  std::vector<CheckpointSection> sections;

  const Matrix* find(const std::string& name) const;
  const Matrix& at(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Whole-file helpers. Throw IoError.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path,
                 std::span<const std::uint8_t> bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace talfuse::io
