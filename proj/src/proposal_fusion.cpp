#include "talfuse/proposal_fusion.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "talfuse/errors.hpp"

namespace talfuse {

ProposalSet nms(const ProposalSet& set, double iou_threshold,
                std::optional<std::size_t> max_out) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ValidationError("nms IoU threshold must lie in (0, 1)");
  }
  set.validate();
  const auto& props = set.proposals;

  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const Proposal& a = props[i];
    const Proposal& b = props[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.t_start != b.t_start) return a.t_start < b.t_start;
    return a.interval().length() > b.interval().length();
  });

  ProposalSet out{set.video_id, {}};
  std::vector<bool> suppressed(props.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    if (max_out && out.proposals.size() >= *max_out) break;
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    out.proposals.push_back(props[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (suppressed[j] || props[j].label != props[i].label) continue;
      if (temporal_iou(props[i].interval(), props[j].interval()) > iou_threshold) {
        suppressed[j] = true;
      }
    }
  }
  return out;
}

ProposalSet pool_and_nms(std::span<const ProposalSet> sets, double iou_threshold,
                         std::optional<std::size_t> max_out) {
  if (sets.empty()) throw ValidationError("pool_and_nms needs at least one set");
  ProposalSet pooled{sets.front().video_id, {}};
  for (const auto& s : sets) {
    if (s.video_id != pooled.video_id) {
      throw ValidationError("pool_and_nms got mixed video ids '" + pooled.video_id +
                            "' and '" + s.video_id + "'");
    }
    pooled.proposals.insert(pooled.proposals.end(), s.proposals.begin(),
                            s.proposals.end());
  }
  return nms(pooled, iou_threshold, max_out);
}

}  // namespace talfuse
