#include "talfuse/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "talfuse/errors.hpp"
#include "talfuse/parallel.hpp"

namespace talfuse {
namespace {

using json = nlohmann::json;

std::vector<std::size_t> score_order(const std::vector<Proposal>& props) {
  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (props[i].score != props[j].score) return props[i].score > props[j].score;
    return props[i].t_start < props[j].t_start;
  });
  return order;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<MatchedPrediction> match_predictions(const ProposalSet& preds,
                                                 const GroundTruth& gt,
                                                 double iou_threshold) {
  if (preds.video_id != gt.video_id) {
    throw ValidationError("match_predictions: prediction video '" + preds.video_id +
                          "' vs ground truth '" + gt.video_id + "'");
  }
  std::vector<bool> used(gt.segments.size(), false);
  std::vector<MatchedPrediction> out;
  out.reserve(preds.proposals.size());
  for (std::size_t i : score_order(preds.proposals)) {
    const Proposal& p = preds.proposals[i];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.segments.size(); ++g) {
      if (used[g] || gt.segments[g].label != p.label) continue;
      const double iou = temporal_iou(p.interval(), gt.segments[g].interval());
      if (iou >= iou_threshold && iou > best_iou) {
        best = g;
        best_iou = iou;
      }
    }
    if (best) used[*best] = true;
    out.push_back(MatchedPrediction{p, best.has_value()});
  }
  return out;
}

std::optional<double> average_precision(std::span<const bool> flags, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  const std::size_t n = flags.size();
  // Recall/precision with a (0, 0) head and (1, 0) tail sentinel.
  std::vector<double> recall(n + 2, 0.0);
  std::vector<double> precision(n + 2, 0.0);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (flags[i]) ++tp;
    recall[i + 1] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i + 1] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  recall[n + 1] = 1.0;
  for (std::size_t i = n + 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < n + 2; ++i) {
    if (recall[i] != recall[i - 1]) ap += (recall[i] - recall[i - 1]) * precision[i];
  }
  return ap;
}

std::vector<double> preset_thresholds(std::string_view preset) {
  if (preset == "thumos") return kThumosThresholds;
  if (preset == "anet") return kActivityNetThresholds;
  throw ValidationError("unknown threshold preset '" + std::string(preset) + "'");
}

std::size_t EvalReport::threshold_index(double iou) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - iou) < 1e-9) return i;
  }
  throw ValidationError("report has no IoU threshold " + shortest(iou));
}

double EvalReport::ap(const std::string& label, double iou) const {
  auto it = per_class_ap.find(label);
  if (it == per_class_ap.end()) throw ValidationError("report has no class '" + label + "'");
  return it->second.at(threshold_index(iou));
}

EvalReport evaluate(std::span<const ProposalSet> preds, std::span<const GroundTruth> gts,
                    std::span<const double> thresholds, std::size_t threads) {
  if (thresholds.empty()) throw ValidationError("no IoU thresholds given");
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ValidationError("IoU thresholds must lie in (0, 1]");
  }

  std::map<std::string, std::size_t> gt_index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gts[i].validate();
    if (!gt_index.emplace(gts[i].video_id, i).second) {
      throw ValidationError("duplicate ground-truth video '" + gts[i].video_id + "'");
    }
  }

  // Merge prediction sets per ground-truth video, rejecting unknown ids.
  std::vector<ProposalSet> per_video(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) per_video[i].video_id = gts[i].video_id;
  std::set<std::string> unknown;
  for (const auto& set : preds) {
    set.validate();
    auto it = gt_index.find(set.video_id);
    if (it == gt_index.end()) {
      unknown.insert(set.video_id);
      continue;
    }
    auto& dst = per_video[it->second].proposals;
    dst.insert(dst.end(), set.proposals.begin(), set.proposals.end());
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ValidationError("predictions for unknown videos: " + list);
  }

  std::map<std::string, std::size_t> num_gt;
  for (const auto& gt : gts) {
    for (const auto& s : gt.segments) ++num_gt[s.label];
  }

  EvalReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  for (const auto& set : per_video) {
    for (const auto& p : set.proposals) {
      if (!num_gt.contains(p.label)) ++report.spurious_detections;
    }
  }

  // matches[v][t]: score-ordered flags for video v at threshold t.
  std::vector<std::vector<std::vector<MatchedPrediction>>> matches(gts.size());
  parallel_for(gts.size(), threads == 0 ? worker_threads() : threads, [&](std::size_t v) {
    matches[v].reserve(thresholds.size());
    for (double t : thresholds) matches[v].push_back(match_predictions(per_video[v], gts[v], t));
  });

  struct Entry {
    double score;
    double t_start;
    std::size_t video;
    std::size_t rank;
    bool tp;
  };
  for (const auto& [label, count] : num_gt) {
    std::vector<double> aps;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      std::vector<Entry> pooled;
      for (std::size_t v = 0; v < gts.size(); ++v) {
        const auto& m = matches[v][t];
        for (std::size_t r = 0; r < m.size(); ++r) {
          if (m[r].proposal.label == label) {
            pooled.push_back({m[r].proposal.score, m[r].proposal.t_start, v, r, m[r].is_tp});
          }
        }
      }
      std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) {
        return std::tie(b.score, a.t_start, a.video, a.rank) <
               std::tie(a.score, b.t_start, b.video, b.rank);
      });
      auto flags = std::make_unique<bool[]>(pooled.size());
      for (std::size_t i = 0; i < pooled.size(); ++i) flags[i] = pooled[i].tp;
      aps.push_back(*average_precision(std::span<const bool>(flags.get(), pooled.size()), count));
    }
    report.per_class_ap.emplace(label, std::move(aps));
  }

  report.map_at.assign(thresholds.size(), 0.0);
  if (!report.per_class_ap.empty()) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      double sum = 0.0;
      for (const auto& [label, aps] : report.per_class_ap) sum += aps[t];
      report.map_at[t] = sum / static_cast<double>(report.per_class_ap.size());
    }
  }
  report.average_map = std::accumulate(report.map_at.begin(), report.map_at.end(), 0.0) /
                       static_cast<double>(report.map_at.size());
  return report;
}

std::vector<ClassDelta> per_class_delta(const EvalReport& with_audio,
                                        const EvalReport& video_only, double iou) {
  std::vector<std::string> a_labels, b_labels;
  for (const auto& [label, _] : with_audio.per_class_ap) a_labels.push_back(label);
  for (const auto& [label, _] : video_only.per_class_ap) b_labels.push_back(label);
  if (a_labels != b_labels) throw ValidationError("reports cover different class sets");
  const std::size_t ta = with_audio.threshold_index(iou);
  const std::size_t tb = video_only.threshold_index(iou);

  std::vector<ClassDelta> out;
  for (const auto& label : a_labels) {
    out.push_back({label, with_audio.per_class_ap.at(label)[ta] -
                              video_only.per_class_ap.at(label)[tb]});
  }
  std::sort(out.begin(), out.end(), [](const ClassDelta& x, const ClassDelta& y) {
    if (x.delta != y.delta) return x.delta > y.delta;
    return x.label < y.label;
  });
  return out;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  auto line = [&](const json& j) { out += j.dump() + "\n"; };
  line(json{{"record", "thresholds"}, {"values", report.thresholds}});
  for (const auto& [label, aps] : report.per_class_ap) {
    for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
      line(json{{"record", "class_ap"}, {"label", label}, {"iou", report.thresholds[t]},
                {"ap", aps[t]}});
    }
  }
  for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
    line(json{{"record", "map"}, {"iou", report.thresholds[t]}, {"map", report.map_at[t]}});
  }
  line(json{{"record", "average_map"}, {"value", report.average_map}});
  line(json{{"record", "spurious"}, {"count", report.spurious_detections}});
  return out;
}

EvalReport parse_report(const std::string& text) {
  EvalReport report;
  bool have_thresholds = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(raw);
      const std::string kind = j.at("record").get<std::string>();
      if (kind == "thresholds") {
        report.thresholds = j.at("values").get<std::vector<double>>();
        report.map_at.assign(report.thresholds.size(), 0.0);
        have_thresholds = true;
      } else if (!have_thresholds) {
        throw ParseError(line_no, "thresholds record must come first");
      } else if (kind == "class_ap") {
        const auto label = j.at("label").get<std::string>();
        auto [it, _] = report.per_class_ap.try_emplace(
            label, std::vector<double>(report.thresholds.size(), 0.0));
        it->second.at(report.threshold_index(j.at("iou").get<double>())) =
            j.at("ap").get<double>();
      } else if (kind == "map") {
        report.map_at.at(report.threshold_index(j.at("iou").get<double>())) =
            j.at("map").get<double>();
      } else if (kind == "average_map") {
        report.average_map = j.at("value").get<double>();
      } else if (kind == "spurious") {
        report.spurious_detections = j.at("count").get<std::size_t>();
      } else {
        throw ParseError(line_no, "unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_thresholds) throw ParseError(line_no, "report has no thresholds record");
  return report;
}

std::string format_delta_csv(std::span<const ClassDelta> deltas) {
  std::string out = "label,delta_ap\n";
  for (const auto& d : deltas) out += d.label + "," + shortest(d.delta) + "\n";
  return out;
}

}  // namespace talfuse
