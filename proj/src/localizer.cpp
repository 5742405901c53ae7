#include "talfuse/localizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <tuple>

#include "talfuse/errors.hpp"

namespace talfuse {
namespace {

void softmax_rows_inplace(Matrix& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
}

struct Stacked {
  Matrix rows;
  std::vector<int> labels;
};

void check_labels(std::span<const int> labels, std::size_t length, std::size_t num_classes) {
  if (labels.size() != length) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match sequence length " + std::to_string(length));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) > num_classes) {
      throw ValidationError("snippet label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + "]");
    }
  }
}

template <typename GetMatrix, typename Item>
Stacked stack(std::span<const Item> data, GetMatrix&& get) {
  Eigen::Index total = 0;
  const Eigen::Index cols = get(data.front()).cols();
  for (const auto& item : data) {
    if (get(item).cols() != cols) {
      throw ValidationError("training sequences have different feature dims");
    }
    total += get(item).rows();
  }
  Stacked s{Matrix(total, cols), {}};
  s.labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (const auto& item : data) {
    const Matrix& m = get(item);
    s.rows.middleRows(at, m.rows()) = m;
    at += m.rows();
    s.labels.insert(s.labels.end(), item.labels.begin(), item.labels.end());
  }
  return s;
}

Matrix gather(const Matrix& rows, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), rows.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

// Mean cross-entropy of `features` under `scorer`; writes dLoss/dLogits.
double cross_entropy(const ScorerParams& scorer, const Matrix& features,
                     std::span<const int> labels, Matrix& d_logits) {
  d_logits = (features * scorer.weights.transpose()).rowwise() + scorer.bias.transpose();
  softmax_rows_inplace(d_logits);
  const double inv = 1.0 / static_cast<double>(features.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < d_logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss -= std::log(std::max(d_logits(i, y), 1e-300));
    d_logits(i, y) -= 1.0;
  }
  d_logits *= inv;
  return loss * inv;
}

void check_config(const TrainConfig& config) {
  if (!(config.lr >= 0.0) || !std::isfinite(config.lr)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  if (!(config.l2 >= 0.0)) throw ValidationError("l2 must be >= 0");
  if (config.batch < 1) throw ValidationError("batch size must be >= 1");
}

// Drives `epochs` passes over shuffled snippet indices. `step` consumes one
// batch and returns its loss.
template <typename Step>
std::vector<double> run_epochs(std::size_t num_rows, const TrainConfig& config, Step&& step) {
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(num_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> trace;
  trace.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < num_rows; at += config.batch) {
      const std::size_t n = std::min(config.batch, num_rows - at);
      total += step(std::span<const std::size_t>(order.data() + at, n));
      ++batches;
    }
    trace.push_back(total / static_cast<double>(batches));
  }
  return trace;
}

double squared_norm(const RMAttnParams& p) {
  return p.video_gate_hidden.squaredNorm() + p.video_gate_out.squaredNorm() +
         p.audio_gate_hidden.squaredNorm() + p.audio_gate_out.squaredNorm() +
         p.audio_to_video.squaredNorm() + p.video_to_audio.squaredNorm();
}

}  // namespace

ScorerParams ScorerParams::zeros(std::size_t num_classes, std::size_t dim) {
  return ScorerParams{Matrix::Zero(static_cast<Eigen::Index>(num_classes + 1),
                                   static_cast<Eigen::Index>(dim)),
                      Vector::Zero(static_cast<Eigen::Index>(num_classes + 1))};
}

void ScorerParams::validate() const {
  if (weights.rows() < 2 || weights.cols() < 1) {
    throw ValidationError("scorer needs at least one action class and one feature");
  }
  if (bias.size() != weights.rows()) throw ValidationError("scorer bias size mismatch");
  if (!weights.allFinite() || !bias.allFinite()) {
    throw ValidationError("scorer parameters must be finite");
  }
}

TrainResult train_scorer(std::span<const LabeledSequence> data, std::size_t num_classes,
                         const TrainConfig& config) {
  if (data.empty()) throw ValidationError("training set is empty");
  if (num_classes < 1) throw ValidationError("need at least one action class");
  check_config(config);
  for (const auto& item : data) {
    check_labels(item.labels, item.features.length(), num_classes);
  }
  const Stacked all =
      stack(data, [](const LabeledSequence& s) -> const Matrix& { return s.features.data(); });

  TrainResult result{ScorerParams::zeros(num_classes, static_cast<std::size_t>(all.rows.cols())),
                     std::nullopt,
                     {}};
  ScorerParams& scorer = result.scorer;
  std::vector<int> batch_labels;
  Matrix d_logits;
  result.loss_trace = run_epochs(all.labels.size(), config, [&](std::span<const std::size_t> idx) {
    const Matrix x = gather(all.rows, idx);
    batch_labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) batch_labels[i] = all.labels[idx[i]];
    double loss = cross_entropy(scorer, x, batch_labels, d_logits);
    loss += 0.5 * config.l2 * scorer.weights.squaredNorm();

    const Matrix d_weights = d_logits.transpose() * x + config.l2 * scorer.weights;
    const Vector d_bias = d_logits.colwise().sum().transpose();
    scorer.weights -= config.lr * d_weights;
    scorer.bias -= config.lr * d_bias;
    return loss;
  });
  return result;
}

TrainResult train_scorer(std::span<const LabeledPair> data, std::size_t num_classes,
                         RMAttnParams init, const TrainConfig& config) {
  if (data.empty()) throw ValidationError("training set is empty");
  if (num_classes < 1) throw ValidationError("need at least one action class");
  check_config(config);
  init.validate();
  for (const auto& item : data) {
    check_labels(item.labels, item.pair.length(), num_classes);
  }
  const Stacked video =
      stack(data, [](const LabeledPair& p) -> const Matrix& { return p.pair.video().data(); });
  const Stacked audio =
      stack(data, [](const LabeledPair& p) -> const Matrix& { return p.pair.audio().data(); });
  if (static_cast<std::size_t>(video.rows.cols()) != init.video_dim ||
      static_cast<std::size_t>(audio.rows.cols()) != init.audio_dim) {
    throw ValidationError("rmattn parameters do not match the pair feature dims");
  }

  TrainResult result{ScorerParams::zeros(num_classes, init.video_dim + init.audio_dim),
                     std::move(init),
                     {}};
  ScorerParams& scorer = result.scorer;
  RMAttnParams& block = *result.rmattn;
  std::vector<int> batch_labels;
  Matrix d_logits;
  RMAttnCache cache;
  result.loss_trace = run_epochs(video.labels.size(), config, [&](std::span<const std::size_t> idx) {
    const Matrix v = gather(video.rows, idx);
    const Matrix a = gather(audio.rows, idx);
    const Matrix fused = rmattn_forward(block, v, a, &cache);
    batch_labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) batch_labels[i] = video.labels[idx[i]];
    double loss = cross_entropy(scorer, fused, batch_labels, d_logits);
    loss += 0.5 * config.l2 * (scorer.weights.squaredNorm() + squared_norm(block));

    const Matrix d_fused = d_logits * scorer.weights;
    RMAttnGradients g = rmattn_backward(block, cache, d_fused);
    const Matrix d_weights = d_logits.transpose() * fused + config.l2 * scorer.weights;
    const Vector d_bias = d_logits.colwise().sum().transpose();
    scorer.weights -= config.lr * d_weights;
    scorer.bias -= config.lr * d_bias;

    const double lr = config.lr;
    const double l2 = config.l2;
    auto update = [&](Matrix& w, const Matrix& dw) { w -= lr * (dw + l2 * w); };
    update(block.video_gate_hidden, g.params.video_gate_hidden);
    update(block.video_gate_out, g.params.video_gate_out);
    update(block.audio_gate_hidden, g.params.audio_gate_hidden);
    update(block.audio_gate_out, g.params.audio_gate_out);
    update(block.audio_to_video, g.params.audio_to_video);
    update(block.video_to_audio, g.params.video_to_audio);
    block.video_gate_bias -= lr * g.params.video_gate_bias;
    block.audio_gate_bias -= lr * g.params.audio_gate_bias;
    return loss;
  });
  return result;
}

Matrix score_rows(const ScorerParams& params, const Matrix& features) {
  if (features.cols() != params.weights.cols()) {
    throw ValidationError("scorer expects dim " + std::to_string(params.weights.cols()) +
                          ", got " + std::to_string(features.cols()));
  }
  Matrix logits = (features * params.weights.transpose()).rowwise() + params.bias.transpose();
  softmax_rows_inplace(logits);
  return logits;
}

Matrix score_sequence(const ScorerParams& params, const FeatureSequence& seq) {
  return score_rows(params, seq.data());
}

ProposalSet generate_proposals(const Matrix& probs, const SnippetTiming& timing,
                               const ProposalConfig& config, const std::string& video_id) {
  if (config.thresholds.empty()) throw ValidationError("proposal thresholds are empty");
  if (probs.cols() < 2 || probs.rows() < 1) {
    throw ValidationError("score matrix needs >= 1 row and >= 2 columns");
  }
  if (!probs.allFinite() || (probs.array() < 0.0).any() ||
      ((probs.rowwise().sum().array() - 1.0).abs() > 1e-6).any()) {
    throw ValidationError("score matrix rows must be probability vectors");
  }
  timing.validate();
  const std::size_t min_len = std::max<std::size_t>(config.min_len, 1);
  const auto rows = static_cast<std::size_t>(probs.rows());

  // (class, first, last) -> score; ordered map keeps output deterministic.
  std::map<std::tuple<Eigen::Index, std::size_t, std::size_t>, double> runs;
  for (Eigen::Index c = 1; c < probs.cols(); ++c) {
    for (double tau : config.thresholds) {
      std::size_t i = 0;
      while (i < rows) {
        if (!(probs(static_cast<Eigen::Index>(i), c) > tau)) {
          ++i;
          continue;
        }
        std::size_t j = i;
        double sum = 0.0;
        while (j < rows && probs(static_cast<Eigen::Index>(j), c) > tau) {
          sum += probs(static_cast<Eigen::Index>(j), c);
          ++j;
        }
        if (j - i >= min_len) {
          const double score = sum / static_cast<double>(j - i);
          auto [it, inserted] = runs.emplace(std::make_tuple(c, i, j - 1), score);
          if (!inserted) it->second = std::max(it->second, score);
        }
        i = j;
      }
    }
  }

  ProposalSet out{video_id, {}};
  out.proposals.reserve(runs.size());
  for (const auto& [key, score] : runs) {
    const auto& [c, first, last] = key;
    out.proposals.push_back(Proposal{timing.snippet_start(first), timing.snippet_end(last),
                                     std::to_string(c), std::min(score, 1.0)});
  }
  out.validate();
  return out;
}

std::vector<int> snippet_labels(const GroundTruth& gt, const SnippetTiming& timing,
                                std::size_t length, std::size_t num_classes) {
  std::vector<int> labels(length, 0);
  for (const auto& seg : gt.segments) {
    int cls = 0;
    const auto* end = seg.label.data() + seg.label.size();
    const auto [ptr, ec] = std::from_chars(seg.label.data(), end, cls);
    if (ec != std::errc() || ptr != end || cls < 1 ||
        static_cast<std::size_t>(cls) > num_classes) {
      throw ValidationError("segment label '" + seg.label + "' is not a class id in [1, " +
                            std::to_string(num_classes) + "]");
    }
    for (std::size_t i = 0; i < length; ++i) {
      const double c = timing.center(i);
      if (c >= seg.t_start && c < seg.t_end) labels[i] = cls;
    }
  }
  return labels;
}

void append_sections(const ScorerParams& params, const std::string& prefix,
                     io::Checkpoint& ckpt) {
  params.validate();
  ckpt.sections.push_back({prefix + "weights", params.weights});
  ckpt.sections.push_back({prefix + "bias", Matrix(params.bias)});
}

ScorerParams scorer_from_sections(const io::Checkpoint& ckpt, const std::string& prefix) {
  const Matrix& bias = ckpt.at(prefix + "bias");
  if (bias.cols() != 1) throw FormatError("scorer bias section must be a column");
  ScorerParams p{ckpt.at(prefix + "weights"), bias.col(0)};
  p.validate();
  return p;
}

}  // namespace talfuse
