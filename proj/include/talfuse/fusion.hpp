#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "talfuse/alignment.hpp"
#include "talfuse/core.hpp"
#include "talfuse/io.hpp"

namespace talfuse {

/// Row t = [video_t | audio_t]; timing taken from the pair.
FeatureSequence concat_fuse(const AlignedPair& pair);

/// Column-wise concatenation of two row-aligned matrices.
Matrix concat_columns(const Matrix& left, const Matrix& right);

/// Identifies the gated residual topology implemented by rmattn_forward.
inline constexpr std::string_view kRMAttnTopology = "gated-residual-v1";

/// Parameters of the residual multimodal attention block.
///
/// Per timestep, with x = [v | a]:
///   h_v = tanh(W_gv x + b_v),  gate_v = sigmoid(g_v h_v),  v' = v + gate_v * (P a)
///   h_a = tanh(W_ga x + b_a),  gate_a = sigmoid(g_a h_a),  a' = a + gate_a * (Q v)
/// and the output row is [v' | a'].
struct RMAttnParams {
  std::size_t video_dim = 0;
  std::size_t audio_dim = 0;
  std::size_t hidden_dim = 0;

  Matrix video_gate_hidden;  // W_gv: hidden x (video + audio)
  Vector video_gate_bias;    // b_v: hidden
  Matrix video_gate_out;     // g_v: video x hidden
  Matrix audio_gate_hidden;  // W_ga: hidden x (video + audio)
  Vector audio_gate_bias;    // b_a: hidden
  Matrix audio_gate_out;     // g_a: audio x hidden
  Matrix audio_to_video;     // P: video x audio
  Matrix video_to_audio;     // Q: audio x video

  /// All-zero parameters of the given shape (also used as a gradient buffer).
  static RMAttnParams zeros(std::size_t video_dim, std::size_t audio_dim,
                            std::size_t hidden_dim);

  void validate() const;

  /// Visits every tensor as (name, data, size) in a fixed order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("video_gate_hidden", video_gate_hidden.data(), video_gate_hidden.size());
    fn("video_gate_bias", video_gate_bias.data(), video_gate_bias.size());
    fn("video_gate_out", video_gate_out.data(), video_gate_out.size());
    fn("audio_gate_hidden", audio_gate_hidden.data(), audio_gate_hidden.size());
    fn("audio_gate_bias", audio_gate_bias.data(), audio_gate_bias.size());
    fn("audio_gate_out", audio_gate_out.data(), audio_gate_out.size());
    fn("audio_to_video", audio_to_video.data(), audio_to_video.size());
    fn("video_to_audio", video_to_audio.data(), video_to_audio.size());
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<RMAttnParams*>(this)->for_each_tensor(
        [&](const char* name, double* data, Eigen::Index size) {
          fn(name, static_cast<const double*>(data), size);
        });
  }

  std::size_t parameter_count() const;
  bool operator==(const RMAttnParams& other) const;
};

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out)) per matrix),
/// zero biases. hidden_dim == 0 selects min(video_dim, audio_dim).
RMAttnParams rmattn_init(std::size_t video_dim, std::size_t audio_dim,
                         std::size_t hidden_dim, std::uint64_t seed);

/// Intermediates retained by the forward pass for backpropagation.
struct RMAttnCache {
  Matrix video;          // L x d_v
  Matrix audio;          // L x d_a
  Matrix joint;          // L x (d_v + d_a)
  Matrix video_hidden;   // L x d_h
  Matrix audio_hidden;   // L x d_h
  Matrix video_gate;     // L x d_v
  Matrix audio_gate;     // L x d_a
  Matrix projected_audio;  // L x d_v, rows P a_t
  Matrix projected_video;  // L x d_a, rows Q v_t
};

struct RMAttnGradients {
  RMAttnParams params;
  Matrix video;  // L x d_v
  Matrix audio;  // L x d_a
};

/// Matrix-level forward: `video` and `audio` are row-aligned snippet features.
/// Returns the L x (d_v + d_a) output and fills `cache` when non-null.
Matrix rmattn_forward(const RMAttnParams& params, const Matrix& video,
                      const Matrix& audio, RMAttnCache* cache = nullptr);

struct RMAttnResult {
  FeatureSequence fused;
  RMAttnCache cache;
};

RMAttnResult rmattn_forward(const RMAttnParams& params, const AlignedPair& pair);

/// Exact gradients of sum(upstream .* output) with respect to every parameter
/// and both inputs.
RMAttnGradients rmattn_backward(const RMAttnParams& params, const RMAttnCache& cache,
                                const Matrix& upstream);

void append_sections(const RMAttnParams& params, const std::string& prefix,
                     io::Checkpoint& ckpt);
RMAttnParams rmattn_from_sections(const io::Checkpoint& ckpt, const std::string& prefix);

}  // namespace talfuse
