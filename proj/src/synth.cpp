#include "talfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "talfuse/errors.hpp"
#include "talfuse/io.hpp"

namespace talfuse::synth {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Salt separating the signature stream from per-episode streams.
constexpr std::uint64_t kSignatureStream = 0x5349474E41545552ULL;

Vector random_direction(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

struct Signatures {
  std::vector<Vector> video;  // per class, index 0 unused
  std::vector<Vector> audio;
  Vector onset;
  Vector offset;
};

Signatures make_signatures(const SynthConfig& cfg) {
  std::seed_seq seq{cfg.seed, kSignatureStream};
  std::mt19937_64 rng(seq);
  Signatures s;
  s.video.resize(cfg.num_classes + 1);
  s.audio.resize(cfg.num_classes + 1);
  for (std::size_t c = 1; c <= cfg.num_classes; ++c) {
    s.video[c] = cfg.video_signal * random_direction(cfg.video_dim, rng);
    s.audio[c] = cfg.audio_signal * random_direction(cfg.audio_dim, rng);
  }
  s.onset = random_direction(cfg.audio_dim, rng);
  s.offset = random_direction(cfg.audio_dim, rng);
  return s;
}

std::size_t uniform_size(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct Placement {
  std::size_t first;  // video snippet index
  std::size_t length;
  std::size_t label;
};

std::vector<Placement> place_actions(const SynthConfig& cfg, std::size_t episode_len,
                                     std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::size_t n = uniform_size(cfg.actions_min, cfg.actions_max, rng);
    std::vector<std::size_t> lengths(n);
    std::size_t needed = n > 0 ? n - 1 : 0;  // one-snippet gap between actions
    for (auto& len : lengths) {
      len = uniform_size(cfg.action_len_min, cfg.action_len_max, rng);
      needed += len;
    }
    if (needed > episode_len) continue;
    const std::size_t free = episode_len - needed;
    std::vector<std::size_t> cuts(n);
    for (auto& c : cuts) c = uniform_size(0, free, rng);
    std::sort(cuts.begin(), cuts.end());
    std::vector<Placement> out;
    std::size_t at = 0;
    std::size_t prev_cut = 0;
    for (std::size_t i = 0; i < n; ++i) {
      at += cuts[i] - prev_cut + (i > 0 ? 1 : 0);
      prev_cut = cuts[i];
      out.push_back({at, lengths[i], uniform_size(1, cfg.num_classes, rng)});
      at += lengths[i];
    }
    return out;
  }
  throw GenerationError("could not pack actions into an episode of " +
                        std::to_string(episode_len) + " snippets after 100 attempts");
}

Matrix round_to_float(const Matrix& m) { return m.cast<float>().cast<double>(); }

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("synth config: " + m); };
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (video_dim < 1 || audio_dim < 1) fail("feature dims must be >= 1");
  if (!(video_hop > 0.0) || !(video_window > 0.0) || !(audio_hop > 0.0) ||
      !(audio_window > 0.0)) {
    fail("hop and window must be > 0");
  }
  if (episode_len_min < 1 || episode_len_min > episode_len_max) fail("empty episode length range");
  if (actions_min > actions_max) fail("empty actions-per-episode range");
  if (action_len_min < 1 || action_len_min > action_len_max) fail("empty action length range");
  if (!(audio_informativeness >= 0.0 && audio_informativeness <= 1.0)) {
    fail("audio_informativeness must lie in [0, 1]");
  }
  if (!(transient_boost >= 0.0)) fail("transient_boost must be >= 0");
  if (!(video_signal >= 0.0) || !(audio_signal >= 0.0)) fail("signal norms must be >= 0");
  if (!(noise > 0.0)) fail("noise must be > 0");
  const double duration =
      static_cast<double>(episode_len_min - 1) * video_hop + video_window;
  if (duration < audio_window) fail("shortest episode is shorter than one audio window");
  if (actions_min * action_len_min + (actions_min > 0 ? actions_min - 1 : 0) > episode_len_max) {
    throw GenerationError("infeasible packing: " + std::to_string(actions_min) +
                          " actions of length >= " + std::to_string(action_len_min) +
                          " cannot fit in " + std::to_string(episode_len_max) + " snippets");
  }
}

SynthConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("synth config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synth config must be a JSON object");
  const json defaults = json::parse(dump_config(SynthConfig{}));
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!defaults.contains(it.key())) {
      throw ValidationError("synth config: unknown key '" + it.key() + "'");
    }
  }
  SynthConfig c;
  try {
    read_field(j, "num_classes", c.num_classes);
    read_field(j, "video_dim", c.video_dim);
    read_field(j, "audio_dim", c.audio_dim);
    read_field(j, "video_hop", c.video_hop);
    read_field(j, "video_window", c.video_window);
    read_field(j, "audio_hop", c.audio_hop);
    read_field(j, "audio_window", c.audio_window);
    read_field(j, "episode_len_min", c.episode_len_min);
    read_field(j, "episode_len_max", c.episode_len_max);
    read_field(j, "actions_min", c.actions_min);
    read_field(j, "actions_max", c.actions_max);
    read_field(j, "action_len_min", c.action_len_min);
    read_field(j, "action_len_max", c.action_len_max);
    read_field(j, "audio_informativeness", c.audio_informativeness);
    read_field(j, "transient_boost", c.transient_boost);
    read_field(j, "video_signal", c.video_signal);
    read_field(j, "audio_signal", c.audio_signal);
    read_field(j, "video_edge_ramp", c.video_edge_ramp);
    read_field(j, "noise", c.noise);
    read_field(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string dump_config(const SynthConfig& c) {
  json j = json::object();
  j["num_classes"] = c.num_classes;
  j["video_dim"] = c.video_dim;
  j["audio_dim"] = c.audio_dim;
  j["video_hop"] = c.video_hop;
  j["video_window"] = c.video_window;
  j["audio_hop"] = c.audio_hop;
  j["audio_window"] = c.audio_window;
  j["episode_len_min"] = c.episode_len_min;
  j["episode_len_max"] = c.episode_len_max;
  j["actions_min"] = c.actions_min;
  j["actions_max"] = c.actions_max;
  j["action_len_min"] = c.action_len_min;
  j["action_len_max"] = c.action_len_max;
  j["audio_informativeness"] = c.audio_informativeness;
  j["transient_boost"] = c.transient_boost;
  j["video_signal"] = c.video_signal;
  j["audio_signal"] = c.audio_signal;
  j["video_edge_ramp"] = c.video_edge_ramp;
  j["noise"] = c.noise;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

Episode generate_episode(const SynthConfig& cfg, std::uint64_t index,
                         const std::string& video_id) {
  cfg.validate();
  const Signatures sig = make_signatures(cfg);
  std::seed_seq seq{cfg.seed, index};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, cfg.noise);

  const std::size_t lv = uniform_size(cfg.episode_len_min, cfg.episode_len_max, rng);
  const SnippetTiming vt{0.0, cfg.video_hop, cfg.video_window};
  const double duration = vt.snippet_end(lv - 1);
  const std::size_t la = static_cast<std::size_t>(
                             std::floor((duration - cfg.audio_window) / cfg.audio_hop + 1e-9)) +
                         1;
  const SnippetTiming at{0.0, cfg.audio_hop, cfg.audio_window};

  Matrix video(static_cast<Eigen::Index>(lv), static_cast<Eigen::Index>(cfg.video_dim));
  Matrix audio(static_cast<Eigen::Index>(la), static_cast<Eigen::Index>(cfg.audio_dim));
  for (Eigen::Index i = 0; i < video.size(); ++i) video.data()[i] = gauss(rng);
  for (Eigen::Index i = 0; i < audio.size(); ++i) audio.data()[i] = gauss(rng);

  const std::vector<Placement> actions = place_actions(cfg, lv, rng);
  std::bernoulli_distribution informative(cfg.audio_informativeness);

  GroundTruth gt{video_id, duration, {}};
  for (const Placement& a : actions) {
    const double t_start = vt.snippet_start(a.first);
    const double t_end = vt.snippet_end(a.first + a.length - 1);
    gt.segments.push_back({t_start, t_end, std::to_string(a.label)});

    for (std::size_t k = 0; k < a.length; ++k) {
      const std::size_t edge = std::min(k, a.length - 1 - k);
      const double scale =
          std::min(1.0, static_cast<double>(edge + 1) / static_cast<double>(cfg.video_edge_ramp + 1));
      video.row(static_cast<Eigen::Index>(a.first + k)) += scale * sig.video[a.label].transpose();
    }

    // Audio snippets whose centre lies inside the segment.
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < la; ++j) {
      const double c = at.center(j);
      if (c >= t_start && c < t_end) rows.push_back(j);
    }
    if (informative(rng)) {
      for (std::size_t j : rows) {
        audio.row(static_cast<Eigen::Index>(j)) += sig.audio[a.label].transpose();
      }
      if (!rows.empty()) {
        audio.row(static_cast<Eigen::Index>(rows.front())) +=
            cfg.transient_boost * sig.onset.transpose();
        audio.row(static_cast<Eigen::Index>(rows.back())) +=
            cfg.transient_boost * sig.offset.transpose();
      }
    } else {
      // Unrelated ambient sound over the segment in place of its signature.
      const Vector burst = cfg.audio_signal * random_direction(cfg.audio_dim, rng);
      for (std::size_t j : rows) audio.row(static_cast<Eigen::Index>(j)) += burst.transpose();
    }
  }

  return Episode{FeatureSequence(Modality::video, round_to_float(video), vt),
                 FeatureSequence(Modality::audio, round_to_float(audio), at), std::move(gt)};
}

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

Manifest read_manifest(const fs::path& path) {
  const std::string text = io::read_text(path);
  const fs::path base = path.parent_path();
  Manifest m;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("record").get<std::string>();
      if (kind == "dataset") {
        m.num_classes = j.at("num_classes").get<std::size_t>();
        have_header = true;
      } else if (kind == "episode") {
        ManifestEntry e;
        e.video_id = j.at("video_id").get<std::string>();
        e.split = j.at("split").get<std::string>();
        e.video = base / j.at("video").get<std::string>();
        e.audio = base / j.at("audio").get<std::string>();
        e.annotations = base / j.at("annotations").get<std::string>();
        if (e.split != "train" && e.split != "test") {
          throw ParseError(line_no, "split must be 'train' or 'test'");
        }
        m.entries.push_back(std::move(e));
      } else {
        throw ParseError(line_no, "unknown manifest record '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header || m.num_classes < 1) {
    throw FormatError("manifest '" + path.string() + "' lacks a dataset header");
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  std::string out = json{{"record", "dataset"}, {"num_classes", manifest.num_classes}}.dump() + "\n";
  for (const auto& e : manifest.entries) {
    out += json{{"record", "episode"},
                {"video_id", e.video_id},
                {"split", e.split},
                {"video", rel(e.video)},
                {"audio", rel(e.audio)},
                {"annotations", rel(e.annotations)}}
               .dump() +
           "\n";
  }
  io::write_text(path, out);
}

std::string episode_id(const std::string& split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return split + "_" + buf;
}

Dataset generate_in_memory(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test) {
  cfg.validate();
  Dataset d;
  for (std::size_t i = 0; i < n_train; ++i) {
    d.train.push_back(generate_episode(cfg, i, episode_id("train", i)));
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    d.test.push_back(generate_episode(cfg, n_train + i, episode_id("test", i)));
  }
  return d;
}

Manifest generate_dataset(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test,
                          const fs::path& out_dir) {
  const Dataset data = generate_in_memory(cfg, n_train, n_test);
  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "features").string() + "': " + ec.message());

  Manifest m;
  m.num_classes = cfg.num_classes;
  auto emit = [&](const std::vector<Episode>& episodes, const std::string& split) {
    const fs::path ann = out_dir / (split + ".gt.jsonl");
    std::vector<GroundTruth> gts;
    for (const auto& ep : episodes) {
      const std::string& id = ep.ground_truth.video_id;
      ManifestEntry e{id, split, out_dir / "features" / (id + ".video.mmfs"),
                      out_dir / "features" / (id + ".audio.mmfs"), ann};
      io::write_features(ep.video, e.video);
      io::write_features(ep.audio, e.audio);
      gts.push_back(ep.ground_truth);
      m.entries.push_back(std::move(e));
    }
    io::write_ground_truth(gts, ann);
  };
  emit(data.train, "train");
  emit(data.test, "test");
  write_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace talfuse::synth
