// talfuse: batch command-line front end for the fusion toolkit.
//
// Every subcommand either writes all of its outputs and exits 0, or prints a
// single JSON error record on stderr and exits nonzero.

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "talfuse/alignment.hpp"
#include "talfuse/errors.hpp"
#include "talfuse/evaluation.hpp"
#include "talfuse/fusion.hpp"
#include "talfuse/io.hpp"
#include "talfuse/parallel.hpp"
#include "talfuse/pipeline.hpp"
#include "talfuse/proposal_fusion.hpp"
#include "talfuse/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace talfuse;

namespace {

constexpr std::size_t kDefaultTrainEpisodes = 200;
constexpr std::size_t kDefaultTestEpisodes = 100;

/// Writes through a sibling temp file so a failed run never leaves a
/// truncated output behind.
void commit_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  io::write_bytes(tmp, bytes);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
}

void commit_text(const fs::path& path, const std::string& text) {
  commit_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- synth ---------------------------------------------------------------

struct SynthJob {
  synth::SynthConfig config;
  std::size_t train_episodes = kDefaultTrainEpisodes;
  std::size_t test_episodes = kDefaultTestEpisodes;
};

/// The synth config file is the generator's flat schema plus the two split
/// sizes.
SynthJob parse_synth_job(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("synth config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synth config must be a JSON object");
  SynthJob job;
  for (const char* key : {"train_episodes", "test_episodes"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number_unsigned()) throw ValidationError(std::string(key) + " must be a count");
    (std::string(key) == "train_episodes" ? job.train_episodes : job.test_episodes) =
        j[key].get<std::size_t>();
    j.erase(key);
  }
  if (job.train_episodes == 0) throw ValidationError("train_episodes must be >= 1");
  job.config = synth::parse_config(j.dump());
  return job;
}

std::string dump_synth_job(const SynthJob& job) {
  json j = json::parse(synth::dump_config(job.config));
  j["train_episodes"] = job.train_episodes;
  j["test_episodes"] = job.test_episodes;
  return j.dump(2) + "\n";
}

// ---- manifest loading ------------------------------------------------------

std::vector<Episode> load_split(const synth::Manifest& manifest, const std::string& split) {
  std::map<fs::path, std::map<std::string, GroundTruth>> annotations;
  std::vector<Episode> out;
  for (const auto& e : manifest.split(split)) {
    auto [it, fresh] = annotations.try_emplace(e.annotations);
    if (fresh) {
      for (auto& gt : io::read_ground_truth(e.annotations)) it->second.emplace(gt.video_id, gt);
    }
    FeatureSequence video = io::read_features(e.video);
    FeatureSequence audio = io::read_features(e.audio);
    GroundTruth gt{e.video_id, video.timing().snippet_end(video.length() - 1), {}};
    if (auto g = it->second.find(e.video_id); g != it->second.end()) {
      gt.segments = g->second.segments;
      gt.duration = std::max(gt.duration, g->second.duration);
    }
    out.push_back(Episode{std::move(video), std::move(audio), std::move(gt)});
  }
  if (out.empty()) throw ValidationError("manifest has no '" + split + "' episodes");
  return out;
}

FeatureSequence read_modality(const fs::path& path, Modality expected) {
  FeatureSequence s = io::read_features(path);
  if (s.modality() != expected) {
    throw ValidationError("'" + path.string() + "' holds " + std::string(to_string(s.modality())) +
                          " features, expected " + std::string(to_string(expected)));
  }
  return s;
}

/// Accepts a model checkpoint or a bare parameter checkpoint.
RMAttnParams load_rmattn(const fs::path& path) {
  io::Checkpoint ck = io::read_checkpoint(path);
  if (ck.find("rmattn.audio_to_video")) return rmattn_from_sections(ck, "rmattn.");
  return rmattn_from_sections(ck, "");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_error(const std::string& command, const std::string& kind, const std::string& message) {
  json rec{{"error", kind}, {"command", command}, {"message", message}};
  std::cerr << rec.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual fusion toolkit for temporal action localization"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
  std::string synth_config, synth_out;
  bool synth_dump = false;
  synth_cmd->add_option("--config", synth_config, "Synth config (flat JSON)");
  synth_cmd->add_option("--out", synth_out, "Output directory");
  synth_cmd->add_flag("--dump-config", synth_dump, "Print the default config and exit");

  // align
  auto* align_cmd = app.add_subcommand("align", "Bring video and audio features to a common length");
  std::string align_method, align_video, align_audio, align_out;
  double align_window = kDefaultPairWindow;
  align_cmd->add_option("--method", align_method, "paired | duptrim | avgtrim")->required();
  align_cmd->add_option("--video", align_video, "Video features (MMFS)")->required();
  align_cmd->add_option("--audio", align_audio, "Audio features (MMFS)")->required();
  align_cmd->add_option("--out", align_out, "Trace file; sequences go to <out>.video.mmfs / <out>.audio.mmfs")
      ->required();
  align_cmd->add_option("--window", align_window, "Pairing window in seconds (paired only)");

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse aligned features into one sequence");
  std::string fuse_scheme, fuse_params, fuse_video, fuse_audio, fuse_out, fuse_method = "paired";
  double fuse_window = kDefaultPairWindow;
  std::uint64_t fuse_seed = 0;
  fuse_cmd->add_option("--scheme", fuse_scheme, "concat | rmattn")->required();
  fuse_cmd->add_option("--params", fuse_params, "RMAttn parameters (model or parameter checkpoint)");
  fuse_cmd->add_option("--video", fuse_video, "Video features (MMFS)")->required();
  fuse_cmd->add_option("--audio", fuse_audio, "Audio features (MMFS)")->required();
  fuse_cmd->add_option("--method", fuse_method, "Alignment method applied first");
  fuse_cmd->add_option("--window", fuse_window, "Pairing window in seconds");
  fuse_cmd->add_option("--seed", fuse_seed, "Init seed when rmattn runs without --params");
  fuse_cmd->add_option("--out", fuse_out, "Fused features (MMFS)")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a localizer on the manifest's train split");
  std::string train_manifest, train_scheme, train_config, train_out;
  bool train_dump = false;
  train_cmd->add_option("--manifest", train_manifest, "Dataset manifest");
  train_cmd->add_option("--scheme", train_scheme, "video | audio | concat | rmattn");
  train_cmd->add_option("--config", train_config, "Pipeline config (flat JSON)");
  train_cmd->add_option("--out", train_out, "Model checkpoint");
  train_cmd->add_flag("--dump-config", train_dump, "Print the default config and exit");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Generate proposals for every test video");
  std::string infer_manifest, infer_ckpt, infer_out, infer_split = "test";
  infer_cmd->add_option("--manifest", infer_manifest, "Dataset manifest")->required();
  infer_cmd->add_option("--ckpt", infer_ckpt, "Model checkpoint")->required();
  infer_cmd->add_option("--out", infer_out, "Proposal file")->required();
  infer_cmd->add_option("--split", infer_split, "Manifest split to run on");

  // nms-fuse
  auto* nms_cmd = app.add_subcommand("nms-fuse", "Pool proposal files per video and apply NMS");
  std::string nms_inputs, nms_out;
  double nms_iou = 0.5;
  std::optional<std::size_t> nms_max;
  nms_cmd->add_option("--inputs", nms_inputs, "Comma-separated proposal files")->required();
  nms_cmd->add_option("--iou", nms_iou, "Suppression IoU threshold in (0,1)")->required();
  nms_cmd->add_option("--max-out", nms_max, "Keep at most this many proposals per video");
  nms_cmd->add_option("--out", nms_out, "Fused proposal file")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate proposals against ground truth");
  std::string eval_preds, eval_gt, eval_preset, eval_out;
  eval_cmd->add_option("--preds", eval_preds, "Proposal file")->required();
  eval_cmd->add_option("--gt", eval_gt, "Ground-truth file")->required();
  eval_cmd->add_option("--preset", eval_preset, "thumos | anet")->required();
  eval_cmd->add_option("--out", eval_out, "Report file")->required();

  // delta
  auto* delta_cmd = app.add_subcommand("delta", "Per-class AP change between two reports");
  std::string delta_a, delta_b, delta_out;
  double delta_iou = 0.5;
  delta_cmd->add_option("--a", delta_a, "Report with audio")->required();
  delta_cmd->add_option("--b", delta_b, "Video-only report")->required();
  delta_cmd->add_option("--iou", delta_iou, "IoU threshold present in both reports")->required();
  delta_cmd->add_option("--out", delta_out, "CSV output")->required();

  std::string command = "talfuse";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    print_error(command, "usage", e.what());
    return 2;
  }
  command = app.get_subcommands().front()->get_name();

  try {
    if (*synth_cmd) {
      if (synth_dump) {
        std::cout << dump_synth_job(SynthJob{});
        return 0;
      }
      if (synth_out.empty()) throw ValidationError("--out is required");
      SynthJob job = synth_config.empty() ? SynthJob{} : parse_synth_job(io::read_text(synth_config));
      synth::Manifest m =
          synth::generate_dataset(job.config, job.train_episodes, job.test_episodes, synth_out);
      std::cout << "episodes=" << m.entries.size() << " classes=" << m.num_classes
                << " manifest=" << (fs::path(synth_out) / "manifest.jsonl").string() << "\n";
    } else if (*align_cmd) {
      const AlignMethod method = align_method_from_string(align_method);
      FeatureSequence video = read_modality(align_video, Modality::video);
      FeatureSequence audio = read_modality(align_audio, Modality::audio);
      AlignedPair pair = align(method, audio, video, align_window);
      const AlignmentTrace& t = pair.trace();
      json trace{{"method", std::string(to_string(t.method))},
                 {"k", t.factor},
                 {"L_m", t.common_length}};
      std::string line = "method=" + std::string(to_string(t.method)) + " k=" + std::to_string(t.factor);
      if (t.ceil_factor) {
        trace["k_prime"] = *t.ceil_factor;
        trace["L_pooled"] = *t.pooled_length;
        line += " k'=" + std::to_string(*t.ceil_factor) + " L_pooled=" + std::to_string(*t.pooled_length);
      }
      line += " L_m=" + std::to_string(t.common_length);
      commit_bytes(align_out + ".video.mmfs", io::encode_features(pair.video()));
      commit_bytes(align_out + ".audio.mmfs", io::encode_features(pair.audio()));
      commit_text(align_out, trace.dump() + "\n");
      std::cout << line << "\n";
    } else if (*fuse_cmd) {
      const AlignMethod method = align_method_from_string(fuse_method);
      FeatureSequence video = read_modality(fuse_video, Modality::video);
      FeatureSequence audio = read_modality(fuse_audio, Modality::audio);
      AlignedPair pair = align(method, audio, video, fuse_window);
      FeatureSequence fused = [&] {
        if (fuse_scheme == "concat") {
          if (!fuse_params.empty()) throw ValidationError("--params only applies to --scheme rmattn");
          return concat_fuse(pair);
        }
        if (fuse_scheme == "rmattn") {
          RMAttnParams p = fuse_params.empty()
                               ? rmattn_init(video.dim(), audio.dim(), 0, fuse_seed)
                               : load_rmattn(fuse_params);
          return rmattn_forward(p, pair).fused;
        }
        throw ValidationError("unknown fusion scheme '" + fuse_scheme + "'");
      }();
      commit_bytes(fuse_out, io::encode_features(fused));
      std::cout << "scheme=" << fuse_scheme << " L=" << fused.length() << " d=" << fused.dim() << "\n";
    } else if (*train_cmd) {
      if (train_dump) {
        std::cout << dump_pipeline_config(PipelineConfig{});
        return 0;
      }
      if (train_manifest.empty() || train_scheme.empty() || train_out.empty()) {
        throw ValidationError("--manifest, --scheme and --out are required");
      }
      PipelineConfig cfg =
          train_config.empty() ? PipelineConfig{} : parse_pipeline_config(io::read_text(train_config));
      synth::Manifest manifest = synth::read_manifest(train_manifest);
      std::vector<Episode> train = load_split(manifest, "train");
      Model model = train_model(train, manifest.num_classes, scheme_from_string(train_scheme), cfg);
      for (std::size_t e = 0; e < model.loss_trace.size(); ++e) {
        std::cout << "epoch=" << e + 1 << " loss=" << shortest(model.loss_trace[e]) << "\n";
      }
      commit_bytes(train_out, io::encode_checkpoint(to_checkpoint(model)));
    } else if (*infer_cmd) {
      Model model = from_checkpoint(io::read_checkpoint(infer_ckpt));
      synth::Manifest manifest = synth::read_manifest(infer_manifest);
      std::vector<Episode> episodes = load_split(manifest, infer_split);
      std::vector<ProposalSet> sets = infer_all(model, episodes, worker_threads());
      std::size_t total = 0;
      for (const auto& s : sets) total += s.proposals.size();
      commit_text(infer_out, io::format_proposals(sets));
      std::cout << "videos=" << sets.size() << " proposals=" << total << "\n";
    } else if (*nms_cmd) {
      const auto files = split_list(nms_inputs);
      if (files.empty()) throw ValidationError("--inputs lists no files");
      std::map<std::string, std::vector<ProposalSet>> by_video;
      for (const auto& f : files) {
        for (auto& s : io::read_proposals(f)) by_video[s.video_id].push_back(std::move(s));
      }
      std::vector<ProposalSet> fused;
      for (const auto& [video, sets] : by_video) fused.push_back(pool_and_nms(sets, nms_iou, nms_max));
      commit_text(nms_out, io::format_proposals(fused));
      std::cout << "videos=" << fused.size() << "\n";
    } else if (*eval_cmd) {
      auto preds = io::read_proposals(eval_preds);
      auto gts = io::read_ground_truth(eval_gt);
      EvalReport r = evaluate(preds, gts, preset_thresholds(eval_preset), worker_threads());
      commit_text(eval_out, format_report(r));
      for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
        std::cout << "mAP@" << shortest(r.thresholds[t]) << "=" << shortest(r.map_at[t]) << "\n";
      }
      std::cout << "average=" << shortest(r.average_map) << "\n";
    } else if (*delta_cmd) {
      EvalReport a = parse_report(io::read_text(delta_a));
      EvalReport b = parse_report(io::read_text(delta_b));
      auto deltas = per_class_delta(a, b, delta_iou);
      commit_text(delta_out, format_delta_csv(deltas));
      std::cout << "classes=" << deltas.size() << "\n";
    }
  } catch (const Error& e) {
    print_error(command, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(command, "internal", e.what());
    return 1;
  }
  return 0;
}
