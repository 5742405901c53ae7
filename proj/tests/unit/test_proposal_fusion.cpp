#include <algorithm>
#include <random>
#include <tuple>

#include "doctest.h"
#include "oracles.hpp"
#include "talfuse/errors.hpp"
#include "talfuse/proposal_fusion.hpp"

using namespace talfuse;

namespace {

std::vector<std::tuple<double, double, std::string, double>> as_set(const ProposalSet& s) {
  std::vector<std::tuple<double, double, std::string, double>> out;
  for (const Proposal& p : s.proposals) out.emplace_back(p.t_start, p.t_end, p.label, p.score);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("nms spec example") {
  Proposal A{0, 10, "c", 0.9}, B{1, 11, "c", 0.8}, C{20, 30, "c", 0.7};
  ProposalSet out = nms({"v", {B, C, A}}, 0.5);
  CHECK(out.proposals == std::vector<Proposal>{A, C});
  CHECK(out.video_id == "v");
}

TEST_CASE("nms keeps disjoint proposals in score order") {
  Proposal a{0, 1, "c", 0.2}, b{2, 3, "c", 0.9}, c{4, 5, "c", 0.5};
  CHECK(nms({"v", {a, b, c}}, 0.5).proposals == std::vector<Proposal>{b, c, a});
}

TEST_CASE("nms is class-wise") {
  Proposal a{0, 5, "x", 0.6}, b{0, 5, "y", 0.7};
  CHECK(nms({"v", {a, b}}, 0.5).proposals == std::vector<Proposal>{b, a});
}

TEST_CASE("nms tie-breaking chain") {
  Proposal late{2, 4, "c", 0.5}, early{1, 3, "c", 0.5}, longer{1, 5, "c", 0.5};
  auto out = nms({"v", {late, early, longer}}, 0.99);
  CHECK(out.proposals == std::vector<Proposal>{longer, early, late});
  Proposal twin{1, 5, "c", 0.5};
  CHECK(nms({"v", {longer, twin}}, 0.5).proposals.size() == 1);
}

TEST_CASE("nms max_out and threshold validation") {
  Proposal a{0, 1, "c", 0.2}, b{2, 3, "c", 0.9}, c{4, 5, "c", 0.5};
  CHECK(nms({"v", {a, b, c}}, 0.5, 2).proposals == std::vector<Proposal>{b, c});
  CHECK(nms({"v", {a, b, c}}, 0.5, 0).proposals.empty());
  CHECK_THROWS_AS(nms({"v", {a}}, 0.0), ValidationError);
  CHECK_THROWS_AS(nms({"v", {a}}, 1.0), ValidationError);
}

TEST_CASE("pool_and_nms examples") {
  ProposalSet s{"v", {{0, 2, "c", 0.4}, {1, 2.5, "c", 0.8}, {5, 6, "d", 0.3}}};
  ProposalSet empty{"v", {}};
  std::vector<ProposalSet> sets = {empty, s};
  CHECK(pool_and_nms(sets, 0.5) == nms(s, 0.5));

  ProposalSet video{"v", {{3, 7, "c", 0.9}}}, audio{"v", {{3, 7, "c", 0.8}}};
  std::vector<ProposalSet> dup = {video, audio};
  CHECK(pool_and_nms(dup, 0.5).proposals == std::vector<Proposal>{{3, 7, "c", 0.9}});

  std::vector<ProposalSet> mixed = {video, ProposalSet{"w", {}}};
  CHECK_THROWS_AS(pool_and_nms(mixed, 0.5), ValidationError);
}

TEST_CASE("pool_and_nms matches the brute-force greedy oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> thr(0.05, 0.95);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ProposalSet> sets = {oracle::random_proposals(rng, "v", 5),
                                     oracle::random_proposals(rng, "v", 5)};
    double t = thr(rng);
    ProposalSet pooled{"v", sets[0].proposals};
    pooled.proposals.insert(pooled.proposals.end(), sets[1].proposals.begin(),
                            sets[1].proposals.end());
    CHECK(pool_and_nms(sets, t) == oracle::nms_greedy(pooled, t));
  }
}

TEST_CASE("nms properties") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    ProposalSet s = oracle::random_proposals(rng, "v", 12, {"a", "b", "c"});
    const double t = 0.3 + 0.1 * (trial % 5);
    ProposalSet out = nms(s, t);

    // Subset of the input, values untouched.
    for (const Proposal& p : out.proposals)
      CHECK(std::find(s.proposals.begin(), s.proposals.end(), p) != s.proposals.end());
    // Same-class survivors do not overlap beyond the threshold.
    for (std::size_t i = 0; i < out.proposals.size(); ++i)
      for (std::size_t j = i + 1; j < out.proposals.size(); ++j)
        if (out.proposals[i].label == out.proposals[j].label)
          CHECK(temporal_iou(out.proposals[i].interval(), out.proposals[j].interval()) <= t);
    CHECK(nms(out, t) == out);

    // Pooling order may reorder full ties across labels in the output but
    // never changes which proposals survive.
    ProposalSet other = oracle::random_proposals(rng, "v", 6, {"a", "b", "c"});
    std::vector<ProposalSet> ab = {s, other}, ba = {other, s};
    CHECK(as_set(pool_and_nms(ab, t)) == as_set(pool_and_nms(ba, t)));
  }
}
