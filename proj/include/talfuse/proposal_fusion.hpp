#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "talfuse/core.hpp"

namespace talfuse {

/// Greedy class-wise non-maximum suppression. Candidates are visited by score
/// (descending), then earlier t_start, then longer duration, then input
/// order; a kept proposal suppresses every remaining proposal of the same
/// label whose IoU with it exceeds `iou_threshold`. Output is in visit order
/// and never longer than `max_out` when given.
ProposalSet nms(const ProposalSet& set, double iou_threshold,
                std::optional<std::size_t> max_out = std::nullopt);

/// Decision-level fusion: pools the per-modality sets of one video, then
/// applies nms to the pool.
ProposalSet pool_and_nms(std::span<const ProposalSet> sets, double iou_threshold,
                         std::optional<std::size_t> max_out = std::nullopt);

}  // namespace talfuse
