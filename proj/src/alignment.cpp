#include "talfuse/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "talfuse/errors.hpp"

namespace talfuse {
namespace {

void expect_modality(const FeatureSequence& seq, Modality want, const char* role) {
  if (seq.modality() != want) {
    throw ValidationError(std::string(role) + " input has modality '" +
                          std::string(to_string(seq.modality())) + "'");
  }
}

Matrix repeat_rows(const Matrix& m, std::size_t k) {
  Matrix out(m.rows() * static_cast<Eigen::Index>(k), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      out.row(i * static_cast<Eigen::Index>(k) + static_cast<Eigen::Index>(r)) = m.row(i);
    }
  }
  return out;
}

Matrix group_means(const Matrix& m, std::size_t group) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const std::size_t groups = (rows + group - 1) / group;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(groups), m.cols());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = g * group;
    const std::size_t end = std::min(rows, begin + group);
    for (std::size_t i = begin; i < end; ++i) {
      out.row(static_cast<Eigen::Index>(g)) += m.row(static_cast<Eigen::Index>(i));
    }
    out.row(static_cast<Eigen::Index>(g)) /= static_cast<double>(end - begin);
  }
  return out;
}

}  // namespace

std::string_view to_string(AlignMethod method) {
  switch (method) {
    case AlignMethod::paired:
      return "paired";
    case AlignMethod::dup_trim:
      return "dup_trim";
    case AlignMethod::avg_trim:
      return "avg_trim";
  }
  return "unknown";
}

AlignMethod align_method_from_string(std::string_view name) {
  if (name == "paired") return AlignMethod::paired;
  if (name == "duptrim" || name == "dup_trim") return AlignMethod::dup_trim;
  if (name == "avgtrim" || name == "avg_trim") return AlignMethod::avg_trim;
  throw ValidationError("unknown alignment method '" + std::string(name) + "'");
}

AlignedPair::AlignedPair(FeatureSequence video, FeatureSequence audio,
                         AlignmentTrace trace)
    : video_(std::move(video)), audio_(std::move(audio)), trace_(trace) {
  expect_modality(video_, Modality::video, "video");
  expect_modality(audio_, Modality::audio, "audio");
  if (video_.length() != audio_.length() || video_.length() != trace_.common_length) {
    throw ValidationError("aligned pair lengths differ: video " +
                          std::to_string(video_.length()) + ", audio " +
                          std::to_string(audio_.length()) + ", trace " +
                          std::to_string(trace_.common_length));
  }
}

AlignedPair pair_by_window_centering(const FeatureSequence& audio,
                                     const FeatureSequence& video, double window) {
  expect_modality(audio, Modality::audio, "audio");
  expect_modality(video, Modality::video, "video");
  if (!(window > 0.0) || !std::isfinite(window)) {
    throw ValidationError("pairing window must be > 0");
  }
  const SnippetTiming& at = audio.timing();
  const SnippetTiming& vt = video.timing();
  const auto la = static_cast<std::ptrdiff_t>(audio.length());
  const Matrix& a = audio.data();

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(video.length()), a.cols());
  for (std::size_t i = 0; i < video.length(); ++i) {
    const double lo = vt.center(i) - 0.5 * window;
    const double hi = vt.center(i) + 0.5 * window;
    // Audio row j spans [s_j, s_j + w_a]; it overlaps (lo, hi) iff
    // s_j < hi and s_j + w_a > lo. Start from a conservative index guess.
    auto first = static_cast<std::ptrdiff_t>(
        std::floor((lo - at.window - at.start_offset) / at.hop));
    first = std::clamp<std::ptrdiff_t>(first - 1, 0, la);
    std::size_t count = 0;
    for (std::ptrdiff_t j = first; j < la; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double s = at.snippet_start(uj);
      if (s >= hi) break;
      if (std::min(hi, at.snippet_end(uj)) - std::max(lo, s) > 0.0) {
        out.row(static_cast<Eigen::Index>(i)) += a.row(j);
        ++count;
      }
    }
    if (count > 0) out.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(count);
  }

  AlignmentTrace trace;
  trace.method = AlignMethod::paired;
  trace.factor = 1;
  trace.common_length = video.length();
  return AlignedPair(video, FeatureSequence(Modality::audio, std::move(out), vt), trace);
}

AlignedPair dup_trim(const FeatureSequence& audio, const FeatureSequence& video) {
  expect_modality(audio, Modality::audio, "audio");
  expect_modality(video, Modality::video, "video");
  const bool video_shorter = video.length() < audio.length();
  const FeatureSequence& shorter = video_shorter ? video : audio;
  const FeatureSequence& longer = video_shorter ? audio : video;

  const std::size_t k = std::max<std::size_t>(1, longer.length() / shorter.length());
  const std::size_t common = std::min(longer.length(), k * shorter.length());
  const auto n = static_cast<Eigen::Index>(common);

  Matrix dup = repeat_rows(shorter.data(), k);
  FeatureSequence shorter_out(shorter.modality(), dup.topRows(n), longer.timing());
  FeatureSequence longer_out(longer.modality(), longer.data().topRows(n), longer.timing());

  AlignmentTrace trace;
  trace.method = AlignMethod::dup_trim;
  trace.factor = k;
  trace.common_length = common;
  return video_shorter ? AlignedPair(std::move(shorter_out), std::move(longer_out), trace)
                       : AlignedPair(std::move(longer_out), std::move(shorter_out), trace);
}

AlignedPair avg_trim(const FeatureSequence& audio, const FeatureSequence& video) {
  expect_modality(audio, Modality::audio, "audio");
  expect_modality(video, Modality::video, "video");
  const bool video_shorter = video.length() < audio.length();
  const FeatureSequence& shorter = video_shorter ? video : audio;
  const FeatureSequence& longer = video_shorter ? audio : video;

  // ceil(L_long / L_short) in integers.
  const std::size_t group = (longer.length() + shorter.length() - 1) / shorter.length();
  const std::size_t pooled = (longer.length() + group - 1) / group;
  const std::size_t common = std::min(pooled, shorter.length());
  const auto n = static_cast<Eigen::Index>(common);

  Matrix means = group_means(longer.data(), group);
  FeatureSequence longer_out(longer.modality(), means.topRows(n), shorter.timing());
  FeatureSequence shorter_out(shorter.modality(), shorter.data().topRows(n), shorter.timing());

  AlignmentTrace trace;
  trace.method = AlignMethod::avg_trim;
  trace.factor = group;
  trace.ceil_factor = group;
  trace.common_length = common;
  trace.pooled_length = pooled;
  return video_shorter ? AlignedPair(std::move(shorter_out), std::move(longer_out), trace)
                       : AlignedPair(std::move(longer_out), std::move(shorter_out), trace);
}

AlignedPair align(AlignMethod method, const FeatureSequence& audio,
                  const FeatureSequence& video, double window) {
  switch (method) {
    case AlignMethod::paired:
      return pair_by_window_centering(audio, video, window);
    case AlignMethod::dup_trim:
      return dup_trim(audio, video);
    case AlignMethod::avg_trim:
      return avg_trim(audio, video);
  }
  throw ValidationError("unknown alignment method");
}

}  // namespace talfuse
