#include "talfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "talfuse/errors.hpp"

namespace talfuse {
namespace {

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError(std::string(what) + " has shape " + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void fill_uniform(Matrix& m, std::mt19937_64& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Matrix as_column(const Vector& v) { return Matrix(v); }

}  // namespace

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw ValidationError("cannot concatenate matrices with different row counts");
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

FeatureSequence concat_fuse(const AlignedPair& pair) {
  return FeatureSequence(Modality::fused,
                         concat_columns(pair.video().data(), pair.audio().data()),
                         pair.video().timing());
}

RMAttnParams RMAttnParams::zeros(std::size_t video_dim, std::size_t audio_dim,
                                 std::size_t hidden_dim) {
  const auto v = static_cast<Eigen::Index>(video_dim);
  const auto a = static_cast<Eigen::Index>(audio_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  RMAttnParams p;
  p.video_dim = video_dim;
  p.audio_dim = audio_dim;
  p.hidden_dim = hidden_dim;
  p.video_gate_hidden = Matrix::Zero(h, v + a);
  p.video_gate_bias = Vector::Zero(h);
  p.video_gate_out = Matrix::Zero(v, h);
  p.audio_gate_hidden = Matrix::Zero(h, v + a);
  p.audio_gate_bias = Vector::Zero(h);
  p.audio_gate_out = Matrix::Zero(a, h);
  p.audio_to_video = Matrix::Zero(v, a);
  p.video_to_audio = Matrix::Zero(a, v);
  return p;
}

void RMAttnParams::validate() const {
  if (video_dim < 1 || audio_dim < 1 || hidden_dim < 1) {
    throw ValidationError("rmattn dimensions must be >= 1");
  }
  const auto v = static_cast<Eigen::Index>(video_dim);
  const auto a = static_cast<Eigen::Index>(audio_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  expect_shape(video_gate_hidden, h, v + a, "video_gate_hidden");
  expect_shape(as_column(video_gate_bias), h, 1, "video_gate_bias");
  expect_shape(video_gate_out, v, h, "video_gate_out");
  expect_shape(audio_gate_hidden, h, v + a, "audio_gate_hidden");
  expect_shape(as_column(audio_gate_bias), h, 1, "audio_gate_bias");
  expect_shape(audio_gate_out, a, h, "audio_gate_out");
  expect_shape(audio_to_video, v, a, "audio_to_video");
  expect_shape(video_to_audio, a, v, "video_to_audio");
  for_each_tensor([](const char* name, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(data[i])) {
        throw ValidationError(std::string("non-finite entry in ") + name);
      }
    }
  });
}

std::size_t RMAttnParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const char*, const double*, Eigen::Index size) {
    n += static_cast<std::size_t>(size);
  });
  return n;
}

bool RMAttnParams::operator==(const RMAttnParams& other) const {
  return video_dim == other.video_dim && audio_dim == other.audio_dim &&
         hidden_dim == other.hidden_dim &&
         video_gate_hidden == other.video_gate_hidden &&
         video_gate_bias == other.video_gate_bias &&
         video_gate_out == other.video_gate_out &&
         audio_gate_hidden == other.audio_gate_hidden &&
         audio_gate_bias == other.audio_gate_bias &&
         audio_gate_out == other.audio_gate_out &&
         audio_to_video == other.audio_to_video &&
         video_to_audio == other.video_to_audio;
}

RMAttnParams rmattn_init(std::size_t video_dim, std::size_t audio_dim,
                         std::size_t hidden_dim, std::uint64_t seed) {
  if (video_dim < 1 || audio_dim < 1) {
    throw ValidationError("rmattn_init: dimensions must be >= 1");
  }
  if (hidden_dim == 0) hidden_dim = std::min(video_dim, audio_dim);
  RMAttnParams p = RMAttnParams::zeros(video_dim, audio_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  fill_uniform(p.video_gate_hidden, rng);
  fill_uniform(p.video_gate_out, rng);
  fill_uniform(p.audio_gate_hidden, rng);
  fill_uniform(p.audio_gate_out, rng);
  fill_uniform(p.audio_to_video, rng);
  fill_uniform(p.video_to_audio, rng);
  return p;
}

Matrix rmattn_forward(const RMAttnParams& params, const Matrix& video,
                      const Matrix& audio, RMAttnCache* cache) {
  const auto v = static_cast<Eigen::Index>(params.video_dim);
  const auto a = static_cast<Eigen::Index>(params.audio_dim);
  if (video.cols() != v || audio.cols() != a) {
    throw ValidationError("rmattn input dims " + std::to_string(video.cols()) + "/" +
                          std::to_string(audio.cols()) + " do not match params " +
                          std::to_string(v) + "/" + std::to_string(a));
  }
  if (video.rows() != audio.rows()) {
    throw ValidationError("rmattn inputs have different lengths");
  }

  Matrix joint = concat_columns(video, audio);

  Matrix video_hidden =
      ((joint * params.video_gate_hidden.transpose()).rowwise() +
       params.video_gate_bias.transpose())
          .array()
          .tanh()
          .matrix();
  Matrix video_gate = sigmoid(video_hidden * params.video_gate_out.transpose());
  Matrix projected_audio = audio * params.audio_to_video.transpose();

  Matrix audio_hidden =
      ((joint * params.audio_gate_hidden.transpose()).rowwise() +
       params.audio_gate_bias.transpose())
          .array()
          .tanh()
          .matrix();
  Matrix audio_gate = sigmoid(audio_hidden * params.audio_gate_out.transpose());
  Matrix projected_video = video * params.video_to_audio.transpose();

  Matrix out(video.rows(), v + a);
  out.leftCols(v) = video + video_gate.cwiseProduct(projected_audio);
  out.rightCols(a) = audio + audio_gate.cwiseProduct(projected_video);

  if (cache != nullptr) {
    cache->video = video;
    cache->audio = audio;
    cache->joint = std::move(joint);
    cache->video_hidden = std::move(video_hidden);
    cache->audio_hidden = std::move(audio_hidden);
    cache->video_gate = std::move(video_gate);
    cache->audio_gate = std::move(audio_gate);
    cache->projected_audio = std::move(projected_audio);
    cache->projected_video = std::move(projected_video);
  }
  return out;
}

RMAttnResult rmattn_forward(const RMAttnParams& params, const AlignedPair& pair) {
  RMAttnCache cache;
  Matrix out = rmattn_forward(params, pair.video().data(), pair.audio().data(), &cache);
  return RMAttnResult{
      FeatureSequence(Modality::fused, std::move(out), pair.video().timing()),
      std::move(cache)};
}

RMAttnGradients rmattn_backward(const RMAttnParams& params, const RMAttnCache& cache,
                                const Matrix& upstream) {
  const auto v = static_cast<Eigen::Index>(params.video_dim);
  const auto a = static_cast<Eigen::Index>(params.audio_dim);
  const Eigen::Index rows = cache.video.rows();
  expect_shape(upstream, rows, v + a, "rmattn upstream gradient");
  expect_shape(cache.audio, rows, a, "rmattn cached audio");

  RMAttnGradients g{RMAttnParams::zeros(params.video_dim, params.audio_dim,
                                        params.hidden_dim),
                    upstream.leftCols(v), upstream.rightCols(a)};
  const auto d_video_out = upstream.leftCols(v);
  const auto d_audio_out = upstream.rightCols(a);
  Matrix d_joint = Matrix::Zero(rows, v + a);

  // Video refinement: v' = v + gate_v * (P a).
  {
    Matrix d_proj = d_video_out.cwiseProduct(cache.video_gate);
    g.params.audio_to_video = d_proj.transpose() * cache.audio;
    g.audio.noalias() += d_proj * params.audio_to_video;

    Matrix d_gate = d_video_out.cwiseProduct(cache.projected_audio);
    Matrix d_logit = d_gate.array() * cache.video_gate.array() *
                     (1.0 - cache.video_gate.array());
    g.params.video_gate_out = d_logit.transpose() * cache.video_hidden;
    Matrix d_hidden = d_logit * params.video_gate_out;
    Matrix d_pre = d_hidden.array() *
                   (1.0 - cache.video_hidden.array().square());
    g.params.video_gate_hidden = d_pre.transpose() * cache.joint;
    g.params.video_gate_bias = d_pre.colwise().sum().transpose();
    d_joint.noalias() += d_pre * params.video_gate_hidden;
  }

  // Audio refinement: a' = a + gate_a * (Q v).
  {
    Matrix d_proj = d_audio_out.cwiseProduct(cache.audio_gate);
    g.params.video_to_audio = d_proj.transpose() * cache.video;
    g.video.noalias() += d_proj * params.video_to_audio;

    Matrix d_gate = d_audio_out.cwiseProduct(cache.projected_video);
    Matrix d_logit = d_gate.array() * cache.audio_gate.array() *
                     (1.0 - cache.audio_gate.array());
    g.params.audio_gate_out = d_logit.transpose() * cache.audio_hidden;
    Matrix d_hidden = d_logit * params.audio_gate_out;
    Matrix d_pre = d_hidden.array() *
                   (1.0 - cache.audio_hidden.array().square());
    g.params.audio_gate_hidden = d_pre.transpose() * cache.joint;
    g.params.audio_gate_bias = d_pre.colwise().sum().transpose();
    d_joint.noalias() += d_pre * params.audio_gate_hidden;
  }

  g.video += d_joint.leftCols(v);
  g.audio += d_joint.rightCols(a);
  return g;
}

void append_sections(const RMAttnParams& params, const std::string& prefix,
                     io::Checkpoint& ckpt) {
  params.validate();
  ckpt.sections.push_back({prefix + "video_gate_hidden", params.video_gate_hidden});
  ckpt.sections.push_back({prefix + "video_gate_bias", as_column(params.video_gate_bias)});
  ckpt.sections.push_back({prefix + "video_gate_out", params.video_gate_out});
  ckpt.sections.push_back({prefix + "audio_gate_hidden", params.audio_gate_hidden});
  ckpt.sections.push_back({prefix + "audio_gate_bias", as_column(params.audio_gate_bias)});
  ckpt.sections.push_back({prefix + "audio_gate_out", params.audio_gate_out});
  ckpt.sections.push_back({prefix + "audio_to_video", params.audio_to_video});
  ckpt.sections.push_back({prefix + "video_to_audio", params.video_to_audio});
}

RMAttnParams rmattn_from_sections(const io::Checkpoint& ckpt, const std::string& prefix) {
  const Matrix& p = ckpt.at(prefix + "audio_to_video");
  const Matrix& gate = ckpt.at(prefix + "video_gate_out");
  RMAttnParams params = RMAttnParams::zeros(static_cast<std::size_t>(p.rows()),
                                            static_cast<std::size_t>(p.cols()),
                                            static_cast<std::size_t>(gate.cols()));
  auto column = [&](const std::string& name) -> Vector {
    const Matrix& m = ckpt.at(prefix + name);
    if (m.cols() != 1) throw FormatError("section " + prefix + name + " must be a column");
    return m.col(0);
  };
  params.video_gate_hidden = ckpt.at(prefix + "video_gate_hidden");
  params.video_gate_bias = column("video_gate_bias");
  params.video_gate_out = gate;
  params.audio_gate_hidden = ckpt.at(prefix + "audio_gate_hidden");
  params.audio_gate_bias = column("audio_gate_bias");
  params.audio_gate_out = ckpt.at(prefix + "audio_gate_out");
  params.audio_to_video = p;
  params.video_to_audio = ckpt.at(prefix + "video_to_audio");
  params.validate();
  return params;
}

}  // namespace talfuse
