#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "talfuse/alignment.hpp"
#include "talfuse/core.hpp"
#include "talfuse/fusion.hpp"
#include "talfuse/io.hpp"
#include "talfuse/localizer.hpp"

namespace talfuse {

/// Which features feed the localizer: a single modality or an encoding fusion.
enum class Scheme { video, audio, concat, rmattn };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

struct PipelineConfig {
  AlignMethod align = AlignMethod::paired;
  double pair_window = kDefaultPairWindow;
  TrainConfig train;
  /// RMAttn hidden width; 0 selects min(d_v, d_a).
  std::size_t hidden_dim = 0;
  ProposalConfig proposals;
  /// Class-wise NMS applied to each video's proposals after generation.
  double nms_iou = 0.5;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

/// Flat JSON object; absent keys keep defaults, unknown keys are errors.
PipelineConfig parse_pipeline_config(const std::string& json_text);
std::string dump_pipeline_config(const PipelineConfig& cfg);

struct Model {
  Scheme scheme = Scheme::concat;
  PipelineConfig config;
  ScorerParams scorer;
  std::optional<RMAttnParams> rmattn;
  std::vector<double> loss_trace;
};

/// Snippet features the scheme's localizer consumes (fused modality for the
/// fusion schemes). For rmattn this is the block's output under `model`.
FeatureSequence scheme_features(const Model& model, const Episode& episode);

Model train_model(std::span<const Episode> train, std::size_t num_classes, Scheme scheme,
                  const PipelineConfig& config);

/// Scores one episode, extracts proposals and applies the configured NMS.
ProposalSet infer(const Model& model, const Episode& episode);

/// Per-episode inference on up to `threads` workers, output in input order.
std::vector<ProposalSet> infer_all(const Model& model, std::span<const Episode> episodes,
                                   std::size_t threads = 1);

io::Checkpoint to_checkpoint(const Model& model);
Model from_checkpoint(const io::Checkpoint& ckpt);

}  // namespace talfuse
