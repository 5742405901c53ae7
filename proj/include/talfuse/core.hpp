#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace talfuse {

/// Row-major so that one snippet is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Modality : std::uint8_t { video = 0, audio = 1, fused = 2 };

std::string_view to_string(Modality modality);
Modality modality_from_string(std::string_view name);

/// Snippet i spans [start_offset + i*hop, start_offset + i*hop + window].
struct SnippetTiming {
  double start_offset = 0.0;
  double hop = 1.0;
  double window = 1.0;

  double snippet_start(std::size_t i) const {
    return start_offset + static_cast<double>(i) * hop;
  }
  double snippet_end(std::size_t i) const { return snippet_start(i) + window; }
  double center(std::size_t i) const { return snippet_start(i) + 0.5 * window; }

  void validate() const;

  bool operator==(const SnippetTiming&) const = default;
};

std::vector<double> snippet_centers(const SnippetTiming& timing, std::size_t length);

/// One modality's snippet features: `length()` rows of `dim()` finite values.
class FeatureSequence {
 public:
  FeatureSequence(Modality modality, Matrix data, SnippetTiming timing);

  Modality modality() const { return modality_; }
  std::size_t length() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  const Matrix& data() const { return data_; }
  const SnippetTiming& timing() const { return timing_; }

  /// First `n` rows with the same timing.
  FeatureSequence prefix(std::size_t n) const;

  bool operator==(const FeatureSequence& other) const;

 private:
  Modality modality_;
  Matrix data_;
  SnippetTiming timing_;
};

/// Closed interval in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

/// Intersection over union of two intervals. Throws ValidationError if either
/// interval is degenerate.
double temporal_iou(const Interval& a, const Interval& b);

struct Proposal {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string label;
  double score = 0.0;

  Interval interval() const { return {t_start, t_end}; }
  void validate() const;
  bool operator==(const Proposal&) const = default;
};

struct ProposalSet {
  std::string video_id;
  std::vector<Proposal> proposals;

  void validate() const;
  bool operator==(const ProposalSet&) const = default;
};

struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string label;

  Interval interval() const { return {t_start, t_end}; }
  bool operator==(const Segment&) const = default;
};

struct GroundTruth {
  std::string video_id;
  double duration = 0.0;
  std::vector<Segment> segments;

  void validate() const;
  bool operator==(const GroundTruth&) const = default;
};

/// One untrimmed video: both modalities' features plus annotations.
struct Episode {
  FeatureSequence video;
  FeatureSequence audio;
  GroundTruth ground_truth;
};

}  // namespace talfuse
