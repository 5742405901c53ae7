#include "talfuse/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "talfuse/errors.hpp"
#include "talfuse/parallel.hpp"
#include "talfuse/proposal_fusion.hpp"

namespace talfuse {
namespace {

using json = nlohmann::json;

constexpr const char* kCheckpointFormat = "talfuse-model/1";

json config_to_json(const PipelineConfig& c) {
  return json{{"align", std::string(to_string(c.align))},
              {"pair_window", c.pair_window},
              {"lr", c.train.lr},
              {"epochs", c.train.epochs},
              {"batch", c.train.batch},
              {"seed", c.train.seed},
              {"l2", c.train.l2},
              {"hidden_dim", c.hidden_dim},
              {"thresholds", c.proposals.thresholds},
              {"min_len", c.proposals.min_len},
              {"nms_iou", c.nms_iou}};
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("pipeline config must be a JSON object");
  const json known = config_to_json(PipelineConfig{});
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) {
      throw ValidationError("pipeline config: unknown key '" + it.key() + "'");
    }
  }
  PipelineConfig c;
  try {
    if (j.contains("align")) c.align = align_method_from_string(j["align"].get<std::string>());
    if (j.contains("pair_window")) c.pair_window = j["pair_window"].get<double>();
    if (j.contains("lr")) c.train.lr = j["lr"].get<double>();
    if (j.contains("epochs")) c.train.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch")) c.train.batch = j["batch"].get<std::size_t>();
    if (j.contains("seed")) c.train.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("l2")) c.train.l2 = j["l2"].get<double>();
    if (j.contains("hidden_dim")) c.hidden_dim = j["hidden_dim"].get<std::size_t>();
    if (j.contains("thresholds")) c.proposals.thresholds = j["thresholds"].get<std::vector<double>>();
    if (j.contains("min_len")) c.proposals.min_len = j["min_len"].get<std::size_t>();
    if (j.contains("nms_iou")) c.nms_iou = j["nms_iou"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<int> labels_for(const Episode& ep, const FeatureSequence& seq,
                            std::size_t num_classes) {
  return snippet_labels(ep.ground_truth, seq.timing(), seq.length(), num_classes);
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::video:
      return "video";
    case Scheme::audio:
      return "audio";
    case Scheme::concat:
      return "concat";
    case Scheme::rmattn:
      return "rmattn";
  }
  return "unknown";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "video") return Scheme::video;
  if (name == "audio") return Scheme::audio;
  if (name == "concat") return Scheme::concat;
  if (name == "rmattn") return Scheme::rmattn;
  throw ValidationError("unknown scheme '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  if (!(pair_window > 0.0)) throw ValidationError("pair_window must be > 0");
  if (train.batch < 1) throw ValidationError("batch must be >= 1");
  if (!(train.lr >= 0.0) || !(train.l2 >= 0.0)) throw ValidationError("lr and l2 must be >= 0");
  if (proposals.thresholds.empty()) throw ValidationError("thresholds must be non-empty");
  for (double t : proposals.thresholds) {
    if (!(t >= 0.0 && t < 1.0)) throw ValidationError("proposal thresholds must lie in [0, 1)");
  }
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw ValidationError("nms_iou must lie in (0, 1)");
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::string dump_pipeline_config(const PipelineConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

FeatureSequence scheme_features(const Model& model, const Episode& ep) {
  switch (model.scheme) {
    case Scheme::video:
      return ep.video;
    case Scheme::audio:
      return ep.audio;
    case Scheme::concat:
      return concat_fuse(align(model.config.align, ep.audio, ep.video, model.config.pair_window));
    case Scheme::rmattn: {
      if (!model.rmattn) throw ValidationError("rmattn model has no attention parameters");
      const AlignedPair pair = align(model.config.align, ep.audio, ep.video, model.config.pair_window);
      return rmattn_forward(*model.rmattn, pair).fused;
    }
  }
  throw ValidationError("unknown scheme");
}

Model train_model(std::span<const Episode> train, std::size_t num_classes, Scheme scheme,
                  const PipelineConfig& config) {
  config.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  Model model;
  model.scheme = scheme;
  model.config = config;

  if (scheme == Scheme::rmattn) {
    std::vector<LabeledPair> data;
    data.reserve(train.size());
    for (const auto& ep : train) {
      AlignedPair pair = align(config.align, ep.audio, ep.video, config.pair_window);
      std::vector<int> labels = labels_for(ep, pair.video(), num_classes);
      data.push_back({std::move(pair), std::move(labels)});
    }
    RMAttnParams init = rmattn_init(data.front().pair.video().dim(),
                                    data.front().pair.audio().dim(), config.hidden_dim,
                                    config.train.seed);
    TrainResult r = train_scorer(data, num_classes, std::move(init), config.train);
    model.scorer = std::move(r.scorer);
    model.rmattn = std::move(r.rmattn);
    model.loss_trace = std::move(r.loss_trace);
    return model;
  }

  std::vector<LabeledSequence> data;
  data.reserve(train.size());
  for (const auto& ep : train) {
    FeatureSequence seq = scheme_features(model, ep);
    std::vector<int> labels = labels_for(ep, seq, num_classes);
    data.push_back({std::move(seq), std::move(labels)});
  }
  TrainResult r = train_scorer(data, num_classes, config.train);
  model.scorer = std::move(r.scorer);
  model.loss_trace = std::move(r.loss_trace);
  return model;
}

ProposalSet infer(const Model& model, const Episode& episode) {
  const FeatureSequence seq = scheme_features(model, episode);
  const Matrix probs = score_sequence(model.scorer, seq);
  const ProposalSet raw = generate_proposals(probs, seq.timing(), model.config.proposals,
                                             episode.ground_truth.video_id);
  return nms(raw, model.config.nms_iou);
}

std::vector<ProposalSet> infer_all(const Model& model, std::span<const Episode> episodes,
                                   std::size_t threads) {
  std::vector<ProposalSet> out(episodes.size());
  parallel_for(episodes.size(), threads == 0 ? worker_threads() : threads,
               [&](std::size_t i) { out[i] = infer(model, episodes[i]); });
  return out;
}

io::Checkpoint to_checkpoint(const Model& model) {
  io::Checkpoint ckpt;
  json meta{{"format", kCheckpointFormat},
            {"scheme", std::string(to_string(model.scheme))},
            {"config", config_to_json(model.config)}};
  if (model.rmattn) meta["rmattn_topology"] = std::string(kRMAttnTopology);
  ckpt.metadata = meta.dump();
  append_sections(model.scorer, "scorer.", ckpt);
  if (model.rmattn) append_sections(*model.rmattn, "rmattn.", ckpt);
  return ckpt;
}

Model from_checkpoint(const io::Checkpoint& ckpt) {
  json meta;
  try {
    meta = json::parse(ckpt.metadata);
  } catch (const json::parse_error&) {
    throw FormatError("checkpoint metadata is not valid JSON");
  }
  if (!meta.is_object() || meta.value("format", "") != kCheckpointFormat) {
    throw FormatError("checkpoint is not a talfuse model");
  }
  Model model;
  model.scheme = scheme_from_string(meta.at("scheme").get<std::string>());
  model.config = config_from_json(meta.at("config"));
  model.scorer = scorer_from_sections(ckpt, "scorer.");
  if (model.scheme == Scheme::rmattn) {
    if (meta.value("rmattn_topology", "") != kRMAttnTopology) {
      throw FormatError("checkpoint uses an unsupported rmattn topology");
    }
    model.rmattn = rmattn_from_sections(ckpt, "rmattn.");
  }
  return model;
}

}  // namespace talfuse
