#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse {

struct MatchedPrediction {
  Proposal proposal;
  bool is_tp = false;
};

/// Orders predictions by score (descending, ties by earlier t_start) and
/// greedily matches each to the unmatched same-label segment of highest IoU,
/// provided that IoU reaches `iou_threshold`. Each segment matches at most once.
std::vector<MatchedPrediction> match_predictions(const ProposalSet& preds,
                                                 const GroundTruth& gt,
                                                 double iou_threshold);

/// All-points interpolated AP over a score-ordered TP/FP list. Returns nullopt
/// when there is no ground truth for the class.
std::optional<double> average_precision(std::span<const bool> flags, std::size_t num_gt);

inline const std::vector<double> kThumosThresholds = {0.3, 0.4, 0.5, 0.6, 0.7};
inline const std::vector<double> kActivityNetThresholds = {0.5, 0.75, 0.95};

/// "thumos" or "anet".
std::vector<double> preset_thresholds(std::string_view preset);

struct EvalReport {
  std::vector<double> thresholds;
  /// Class label -> AP at each threshold (same order as `thresholds`). Only
  /// classes present in the ground truth appear.
  std::map<std::string, std::vector<double>> per_class_ap;
  std::vector<double> map_at;
  double average_map = 0.0;
  /// Predictions whose label never occurs in the ground truth.
  std::size_t spurious_detections = 0;

  std::size_t threshold_index(double iou) const;
  double ap(const std::string& label, double iou) const;
  double map(double iou) const { return map_at.at(threshold_index(iou)); }
  bool operator==(const EvalReport&) const = default;
};

/// Pools per-video matches by class and computes AP, mAP per threshold and
/// their mean. Every prediction video must have ground truth; ground-truth
/// videos without predictions count as misses. `threads` bounds the matching
/// worker pool (0 = TALFUSE_THREADS / hardware default).
EvalReport evaluate(std::span<const ProposalSet> preds, std::span<const GroundTruth> gts,
                    std::span<const double> thresholds, std::size_t threads = 1);

struct ClassDelta {
  std::string label;
  double delta = 0.0;
  bool operator==(const ClassDelta&) const = default;
};

/// AP(with_audio) - AP(video_only) per class at `iou`, largest gain first
/// (ties by label).
std::vector<ClassDelta> per_class_delta(const EvalReport& with_audio,
                                        const EvalReport& video_only, double iou);

// Report text format: one JSON record per line,
//   {"record":"thresholds","values":[...]}
//   {"record":"class_ap","label":L,"iou":t,"ap":x}     (per class, per threshold)
//   {"record":"map","iou":t,"map":x}                    (per threshold)
//   {"record":"average_map","value":x}
//   {"record":"spurious","count":n}
std::string format_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);

/// "label,delta_ap" header followed by one row per class.
std::string format_delta_csv(std::span<const ClassDelta> deltas);

}  // namespace talfuse
