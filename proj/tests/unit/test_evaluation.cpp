#include <algorithm>
#include <random>

#include "doctest.h"
#include "eval_fixture.hpp"
#include "oracles.hpp"
#include "talfuse/errors.hpp"
#include "talfuse/evaluation.hpp"
#include "talfuse/io.hpp"

using namespace talfuse;

namespace {

double ap(std::vector<bool> flags, std::size_t num_gt) {
  std::unique_ptr<bool[]> buf(new bool[flags.size() + 1]);
  for (std::size_t i = 0; i < flags.size(); ++i) buf[i] = flags[i];
  return average_precision(std::span<const bool>(buf.get(), flags.size()), num_gt).value();
}

/// Random episode-like instance: a few videos, GT segments, noisy predictions.
void random_instance(std::mt19937_64& rng, std::vector<ProposalSet>& preds,
                     std::vector<GroundTruth>& gts) {
  std::uniform_int_distribution<int> nseg(1, 4), start(0, 40), len(1, 8), jitter(-2, 2);
  std::uniform_real_distribution<double> score(0.01, 0.99);
  std::uniform_int_distribution<int> label(0, 2);
  const char* labels[] = {"x", "y", "z"};
  for (int v = 0; v < 4; ++v) {
    GroundTruth gt{"v" + std::to_string(v), 0, {}};
    ProposalSet ps{gt.video_id, {}};
    int n = nseg(rng);
    for (int s = 0; s < n; ++s) {
      double t0 = start(rng), t1 = t0 + len(rng);
      gt.segments.push_back({t0, t1, labels[label(rng)]});
      gt.duration = std::max(gt.duration, t1);
      for (int k = 0; k < 2; ++k) {
        double a = std::max(0, static_cast<int>(t0) + jitter(rng));
        double b = std::max(a + 1, t1 + jitter(rng));
        ps.proposals.push_back({a, b, k == 0 ? gt.segments.back().label : labels[label(rng)], score(rng)});
      }
    }
    gts.push_back(gt);
    preds.push_back(ps);
  }
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(ap({true}, 1) == 1.0);
  CHECK(ap({false, true}, 1) == 0.5);
  CHECK(ap({true, false}, 2) == 0.5);
  CHECK(ap({}, 3) == 0.0);
  CHECK_FALSE(average_precision({}, 0).has_value());
}

TEST_CASE("average precision equals the rectangle-sum oracle") {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> flags(trial % 15);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) tp += (flags[i] = coin(rng));
    std::size_t num_gt = tp + trial % 3 + (tp == 0);
    CHECK(ap(flags, num_gt) == doctest::Approx(oracle::ap_rectangles(flags, num_gt)).epsilon(1e-12));
  }
}

TEST_CASE("matching examples") {
  GroundTruth gt{"v", 20, {{0, 10, "a"}}};
  auto exact = match_predictions({"v", {{0, 10, "a", 0.5}}}, gt, 1.0);
  CHECK(exact.at(0).is_tp);

  auto two = match_predictions({"v", {{0, 9, "a", 0.8}, {0, 10, "a", 0.9}}}, gt, 0.5);
  REQUIRE(two.size() == 2);
  CHECK(two[0].proposal.score == 0.9);
  CHECK(two[0].is_tp);
  CHECK_FALSE(two[1].is_tp);

  CHECK_FALSE(match_predictions({"v", {{0, 10, "b", 0.9}}}, gt, 0.5).at(0).is_tp);
  CHECK_THROWS_AS(match_predictions({"w", {}}, gt, 0.5), ValidationError);

  // Highest-IoU unmatched segment wins.
  GroundTruth two_segs{"v", 20, {{0, 4, "a"}, {1, 6, "a"}}};
  auto m = match_predictions({"v", {{1, 6, "a", 0.9}, {0, 4, "a", 0.8}}}, two_segs, 0.3);
  CHECK(m[0].is_tp);
  CHECK(m[1].is_tp);
}

TEST_CASE("hand-computed three-video fixture") {
  auto preds = io::read_proposals(fixture::path("eval3_preds.jsonl"));
  auto gts = io::read_ground_truth(fixture::path("eval3_gt.jsonl"));
  EvalReport r = evaluate(preds, gts, kThumosThresholds);
  REQUIRE(r.per_class_ap.size() == 2);
  for (const auto& [label, expect] : fixture::kClassAp)
    for (std::size_t t = 0; t < expect.size(); ++t)
      CHECK(std::abs(r.per_class_ap.at(label)[t] - expect[t]) <= 1e-12);
  for (std::size_t t = 0; t < fixture::kMap.size(); ++t)
    CHECK(std::abs(r.map_at[t] - fixture::kMap[t]) <= 1e-12);
  CHECK(std::abs(r.average_map - fixture::kAverageMap) <= 1e-12);
  CHECK(r.spurious_detections == 0);
  CHECK(r.ap("b", 0.7) == doctest::Approx(1.0 / 3));
  CHECK(evaluate(preds, gts, kThumosThresholds, 4) == r);
}

TEST_CASE("perfect and empty predictions") {
  auto gts = io::read_ground_truth(fixture::path("eval3_gt.jsonl"));
  std::vector<ProposalSet> perfect;
  for (const auto& g : gts) {
    ProposalSet s{g.video_id, {}};
    for (const auto& seg : g.segments) s.proposals.push_back({seg.t_start, seg.t_end, seg.label, 1.0});
    perfect.push_back(s);
  }
  for (const char* preset : {"thumos", "anet"}) {
    EvalReport r = evaluate(perfect, gts, preset_thresholds(preset));
    for (double m : r.map_at) CHECK(m == 1.0);
    CHECK(r.average_map == 1.0);
  }
  EvalReport none = evaluate({}, gts, kActivityNetThresholds);
  for (double m : none.map_at) CHECK(m == 0.0);
  CHECK(none.per_class_ap.size() == 2);
}

TEST_CASE("unknown videos and spurious classes") {
  auto gts = io::read_ground_truth(fixture::path("eval3_gt.jsonl"));
  std::vector<ProposalSet> preds = {{"nope", {{0, 1, "a", 0.5}}}, {"zz", {}}};
  try {
    evaluate(preds, gts, kThumosThresholds);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  std::vector<ProposalSet> spurious = {{"v1", {{0, 10, "q", 0.9}, {0, 10, "a", 0.8}}}};
  EvalReport r = evaluate(spurious, gts, kThumosThresholds);
  CHECK(r.spurious_detections == 1);
  CHECK(r.per_class_ap.count("q") == 0);
  CHECK_THROWS_AS(preset_thresholds("coco"), ValidationError);
}

TEST_CASE("evaluation properties on random instances") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ProposalSet> preds;
    std::vector<GroundTruth> gts;
    random_instance(rng, preds, gts);
    EvalReport base = evaluate(preds, gts, kThumosThresholds);
    for (const auto& [label, aps] : base.per_class_ap)
      for (double a : aps) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
      }

    // Strictly monotone transform of every score.
    auto squashed = preds;
    for (auto& s : squashed)
      for (auto& p : s.proposals) p.score = std::pow(p.score, 3) * 0.5 + 0.1;
    CHECK(evaluate(squashed, gts, kThumosThresholds) == base);

    // A low-score FP never increases any AP.
    auto extra = preds;
    extra[0].proposals.push_back({50, 51, "x", 0.001});
    EvalReport worse = evaluate(extra, gts, kThumosThresholds);
    for (const auto& [label, aps] : base.per_class_ap)
      for (std::size_t t = 0; t < aps.size(); ++t) CHECK(worse.per_class_ap.at(label)[t] <= aps[t]);

    // Single video: direct AP of matched flags equals the pooled evaluation.
    std::vector<ProposalSet> one_pred = {preds[1]};
    std::vector<GroundTruth> one_gt = {gts[1]};
    EvalReport single = evaluate(one_pred, one_gt, kThumosThresholds);
    for (std::size_t t = 0; t < kThumosThresholds.size(); ++t) {
      auto matched = match_predictions(preds[1], gts[1], kThumosThresholds[t]);
      for (const auto& [label, aps] : single.per_class_ap) {
        std::vector<bool> flags;
        for (const auto& m : matched)
          if (m.proposal.label == label) flags.push_back(m.is_tp);
        std::size_t n = std::count_if(gts[1].segments.begin(), gts[1].segments.end(),
                                      [&](const Segment& s) { return s.label == label; });
        CHECK(aps[t] == doctest::Approx(oracle::ap_rectangles(flags, n)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("report text round trip") {
  auto preds = io::read_proposals(fixture::path("eval3_preds.jsonl"));
  auto gts = io::read_ground_truth(fixture::path("eval3_gt.jsonl"));
  EvalReport r = evaluate(preds, gts, kThumosThresholds);
  std::string text = format_report(r);
  CHECK(parse_report(text) == r);
  CHECK(format_report(parse_report(text)) == text);
  CHECK_THROWS_AS(parse_report(R"({"record":"map","iou":0.5,"map":1})"), ParseError);
}

TEST_CASE("per-class delta") {
  EvalReport a;
  a.thresholds = {0.5};
  a.per_class_ap = {{"1", {0.5}}, {"2", {0.4}}, {"3", {0.7}}};
  CHECK(per_class_delta(a, a, 0.5) ==
        std::vector<ClassDelta>{{"1", 0.0}, {"2", 0.0}, {"3", 0.0}});
  EvalReport b = a;
  b.per_class_ap["2"][0] = 0.5;
  auto d = per_class_delta(b, a, 0.5);
  CHECK(d.front().label == "2");
  CHECK(d.front().delta == doctest::Approx(0.1));
  CHECK(format_delta_csv(d).rfind("label,delta_ap\n2,", 0) == 0);

  EvalReport c = a;
  c.per_class_ap.erase("3");
  CHECK_THROWS_AS(per_class_delta(a, c, 0.5), ValidationError);
  CHECK_THROWS_AS(per_class_delta(a, a, 0.7), ValidationError);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> q(0, 10);
  for (int trial = 0; trial < 100; ++trial) {
    EvalReport x, y;
    x.thresholds = y.thresholds = {0.5};
    for (int k = 0; k < 8; ++k) {
      std::string label = "c" + std::to_string(k);
      x.per_class_ap[label] = {q(rng) / 10.0};
      y.per_class_ap[label] = {q(rng) / 10.0};
    }
    auto got = per_class_delta(x, y, 0.5);
    // Brute force: repeatedly extract the maximum (ties by label).
    std::vector<ClassDelta> pool;
    for (const auto& [label, aps] : x.per_class_ap) pool.push_back({label, aps[0] - y.per_class_ap[label][0]});
    std::vector<ClassDelta> expect;
    while (!pool.empty()) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < pool.size(); ++i)
        if (pool[i].delta > pool[best].delta ||
            (pool[i].delta == pool[best].delta && pool[i].label < pool[best].label))
          best = i;
      expect.push_back(pool[best]);
      pool.erase(pool.begin() + static_cast<long>(best));
    }
    CHECK(got == expect);
  }
}
