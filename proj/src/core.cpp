#include "talfuse/core.hpp"

#include <algorithm>
#include <cmath>

#include "talfuse/errors.hpp"

namespace talfuse {

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::video:
      return "video";
    case Modality::audio:
      return "audio";
    case Modality::fused:
      return "fused";
  }
  return "unknown";
}

Modality modality_from_string(std::string_view name) {
  if (name == "video") return Modality::video;
  if (name == "audio") return Modality::audio;
  if (name == "fused") return Modality::fused;
  throw ValidationError("unknown modality '" + std::string(name) + "'");
}

void SnippetTiming::validate() const {
  if (!std::isfinite(start_offset) || !std::isfinite(hop) ||
      !std::isfinite(window)) {
    throw ValidationError("snippet timing must be finite");
  }
  if (hop <= 0.0) throw ValidationError("snippet hop must be > 0");
  if (window <= 0.0) throw ValidationError("snippet window must be > 0");
}

std::vector<double> snippet_centers(const SnippetTiming& timing,
                                    std::size_t length) {
  timing.validate();
  if (length == 0) throw ValidationError("snippet count must be >= 1");
  std::vector<double> centers(length);
  for (std::size_t i = 0; i < length; ++i) centers[i] = timing.center(i);
  return centers;
}

FeatureSequence::FeatureSequence(Modality modality, Matrix data,
                                 SnippetTiming timing)
    : modality_(modality), data_(std::move(data)), timing_(timing) {
  timing_.validate();
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw ValidationError("feature sequence needs L >= 1 and d >= 1, got " +
                          std::to_string(data_.rows()) + "x" +
                          std::to_string(data_.cols()));
  }
  if (!data_.allFinite()) {
    throw ValidationError("feature sequence contains non-finite values");
  }
}

FeatureSequence FeatureSequence::prefix(std::size_t n) const {
  if (n < 1 || n > length()) {
    throw ValidationError("prefix length " + std::to_string(n) +
                          " outside [1, " + std::to_string(length()) + "]");
  }
  return FeatureSequence(modality_, data_.topRows(static_cast<Eigen::Index>(n)),
                         timing_);
}

bool FeatureSequence::operator==(const FeatureSequence& other) const {
  return modality_ == other.modality_ && timing_ == other.timing_ &&
         data_.rows() == other.data_.rows() &&
         data_.cols() == other.data_.cols() && data_ == other.data_;
}

double temporal_iou(const Interval& a, const Interval& b) {
  if (!(a.start < a.end) || !(b.start < b.end)) {
    throw ValidationError("temporal_iou needs start < end for both intervals");
  }
  const double inter =
      std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  return inter / uni;
}

void Proposal::validate() const {
  if (!std::isfinite(t_start) || !std::isfinite(t_end)) {
    throw ValidationError("proposal times must be finite");
  }
  if (t_start < 0.0) throw ValidationError("proposal t_start must be >= 0");
  if (!(t_start < t_end)) {
    throw ValidationError("proposal needs t_start < t_end");
  }
  // Out-of-range scores are rejected, never clamped.
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("proposal score must lie in [0, 1]");
  }
}

void ProposalSet::validate() const {
  for (const auto& p : proposals) p.validate();
}

void GroundTruth::validate() const {
  if (!std::isfinite(duration) || duration <= 0.0) {
    throw ValidationError("ground truth duration must be > 0 for video " +
                          video_id);
  }
  for (const auto& s : segments) {
    if (!(s.t_start >= 0.0 && s.t_start < s.t_end && s.t_end <= duration)) {
      throw ValidationError("ground truth segment outside [0, duration] for "
                            "video " + video_id);
    }
  }
}

}  // namespace talfuse
