#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "talfuse/alignment.hpp"
#include "talfuse/core.hpp"
#include "talfuse/fusion.hpp"
#include "talfuse/io.hpp"

namespace talfuse {

/// Snippet-level linear softmax classifier over C action classes plus
/// background (column 0).
struct ScorerParams {
  Matrix weights;  // (C + 1) x d
  Vector bias;     // C + 1

  static ScorerParams zeros(std::size_t num_classes, std::size_t dim);
  std::size_t num_classes() const { return static_cast<std::size_t>(weights.rows()) - 1; }
  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
  void validate() const;
  bool operator==(const ScorerParams&) const = default;
};

struct TrainConfig {
  double lr = 0.1;
  std::size_t epochs = 40;
  /// Snippets per mini-batch.
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  double l2 = 1e-4;

  bool operator==(const TrainConfig&) const = default;
};

/// Per-snippet labels: 0 is background, 1..C are action classes.
struct LabeledSequence {
  FeatureSequence features;
  std::vector<int> labels;
};

struct LabeledPair {
  AlignedPair pair;
  std::vector<int> labels;
};

struct TrainResult {
  ScorerParams scorer;
  std::optional<RMAttnParams> rmattn;
  /// Mean regularised training loss of each epoch's mini-batches.
  std::vector<double> loss_trace;
};

/// Minimises mean snippet cross-entropy plus (l2 / 2) * |weights|^2 by
/// mini-batch gradient descent from zero scorer weights.
TrainResult train_scorer(std::span<const LabeledSequence> data, std::size_t num_classes,
                         const TrainConfig& config);

/// Trains the scorer jointly with a residual multimodal attention block that
/// fuses each aligned pair. The l2 penalty also covers the block's weights.
TrainResult train_scorer(std::span<const LabeledPair> data, std::size_t num_classes,
                         RMAttnParams init, const TrainConfig& config);

/// Row-wise softmax of the scorer logits: L x (C + 1).
Matrix score_sequence(const ScorerParams& params, const FeatureSequence& seq);
Matrix score_rows(const ScorerParams& params, const Matrix& features);

struct ProposalConfig {
  std::vector<double> thresholds = {0.3, 0.5, 0.7};
  /// Minimum run length in snippets.
  std::size_t min_len = 1;

  bool operator==(const ProposalConfig&) const = default;
};

/// For each class column c >= 1 and threshold, every maximal run of snippets
/// with p_c > threshold and at least min_len snippets becomes a proposal
/// spanning the run's outer window edges, scored by the run's mean p_c and
/// labelled std::to_string(c). Runs found at several thresholds are emitted
/// once.
ProposalSet generate_proposals(const Matrix& probs, const SnippetTiming& timing,
                               const ProposalConfig& config,
                               const std::string& video_id = "");

/// Label of each snippet: the class of the ground-truth segment containing the
/// snippet centre, else 0. Class labels must be decimal ids in [1, C].
std::vector<int> snippet_labels(const GroundTruth& gt, const SnippetTiming& timing,
                                std::size_t length, std::size_t num_classes);

void append_sections(const ScorerParams& params, const std::string& prefix,
                     io::Checkpoint& ckpt);
ScorerParams scorer_from_sections(const io::Checkpoint& ckpt, const std::string& prefix);

}  // namespace talfuse
