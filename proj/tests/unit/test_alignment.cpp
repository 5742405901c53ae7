#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "talfuse/alignment.hpp"
#include "talfuse/errors.hpp"

using namespace talfuse;

namespace {

FeatureSequence seq(Modality m, std::size_t L, std::size_t d, std::mt19937_64& rng,
                    SnippetTiming t = {}) {
  return FeatureSequence(m, oracle::random_matrix(rng, static_cast<long>(L), static_cast<long>(d)), t);
}

/// Rows 0..L-1 hold their own index, so duplicated/averaged layouts are easy to read.
FeatureSequence ramp(Modality m, std::size_t L, SnippetTiming t = {}) {
  Matrix x(L, 1);
  for (std::size_t i = 0; i < L; ++i) x(i, 0) = static_cast<double>(i);
  return FeatureSequence(m, x, t);
}

}  // namespace

TEST_CASE("window centering spec example") {
  Matrix a(1, 2);
  a << 3, -4;
  FeatureSequence audio(Modality::audio, a, {0.0, 1.2, 1.2});
  FeatureSequence video(Modality::video, Matrix::Zero(2, 1), {0.0, 1.0, 1.0});
  AlignedPair p = pair_by_window_centering(audio, video, 1.2);
  CHECK(p.length() == 2);
  CHECK(p.audio().data().row(0) == a.row(0));
  CHECK(p.audio().data().row(1) == a.row(0));
  CHECK(p.trace().method == AlignMethod::paired);
  CHECK(p.trace().factor == 1);
  CHECK(p.trace().common_length == 2);
  CHECK(p.audio().timing() == video.timing());
}

TEST_CASE("window centering zero-fills uncovered snippets") {
  std::mt19937_64 rng(1);
  FeatureSequence audio = seq(Modality::audio, 3, 4, rng, {0, 0.96, 0.96});
  FeatureSequence video = seq(Modality::video, 10, 2, rng);
  AlignedPair p = pair_by_window_centering(audio, video);
  CHECK(p.audio().data().row(9).isZero(0.0));
  CHECK_FALSE(p.audio().data().row(0).isZero(0.0));
}

TEST_CASE("window centering identity with matching timing") {
  std::mt19937_64 rng(2);
  SnippetTiming t{0, 1, 1};
  FeatureSequence audio = seq(Modality::audio, 8, 3, rng, t);
  FeatureSequence video = seq(Modality::video, 8, 5, rng, t);
  // A window no wider than one hop touches exactly one audio row.
  AlignedPair p = pair_by_window_centering(audio, video, 1.0);
  CHECK(p.audio().data() == audio.data());
  CHECK(p.video() == video);
}

TEST_CASE("window centering matches a brute-force overlap mean") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    SnippetTiming at{u(rng) - 0.2, u(rng), u(rng)};
    SnippetTiming vt{u(rng) - 0.2, u(rng), u(rng)};
    double w = u(rng);
    FeatureSequence audio = seq(Modality::audio, 1 + trial % 13, 2, rng, at);
    FeatureSequence video = seq(Modality::video, 1 + trial % 7, 2, rng, vt);
    AlignedPair p = pair_by_window_centering(audio, video, w);
    for (std::size_t i = 0; i < video.length(); ++i) {
      double c = vt.start_offset + i * vt.hop + vt.window / 2;
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(2);
      int n = 0;
      for (std::size_t j = 0; j < audio.length(); ++j) {
        double s = at.start_offset + j * at.hop;
        if (std::min(c + w / 2, s + at.window) - std::max(c - w / 2, s) > 0) {
          sum += audio.data().row(j);
          ++n;
        }
      }
      if (n > 0) sum /= n;
      CHECK((p.audio().data().row(i) - sum).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("dup_trim spec examples") {
  std::mt19937_64 rng(4);
  SUBCASE("equal lengths are untouched") {
    FeatureSequence a = seq(Modality::audio, 4, 2, rng), v = seq(Modality::video, 4, 3, rng);
    AlignedPair p = dup_trim(a, v);
    CHECK(p.trace().factor == 1);
    CHECK(p.trace().common_length == 4);
    CHECK(p.audio() == a);
    CHECK(p.video() == v);
  }
  SUBCASE("L_v=3, L_a=7") {
    SnippetTiming at{0, 0.5, 0.5};
    AlignedPair p = dup_trim(ramp(Modality::audio, 7, at), ramp(Modality::video, 3));
    CHECK(p.trace().factor == 2);
    CHECK(p.trace().common_length == 6);
    Matrix expect(6, 1);
    expect << 0, 0, 1, 1, 2, 2;
    CHECK(p.video().data() == expect);
    CHECK(p.audio().data() == ramp(Modality::audio, 6).data());
    CHECK(p.video().timing() == at);
  }
  SUBCASE("mirrored L_a=2, L_v=5") {
    AlignedPair p = dup_trim(ramp(Modality::audio, 2), ramp(Modality::video, 5));
    CHECK(p.trace().factor == 2);
    CHECK(p.trace().common_length == 4);
    Matrix expect(4, 1);
    expect << 0, 0, 1, 1;
    CHECK(p.audio().data() == expect);
    CHECK(p.video().data() == ramp(Modality::video, 4).data());
  }
}

TEST_CASE("avg_trim spec examples") {
  std::mt19937_64 rng(5);
  SUBCASE("equal lengths") {
    FeatureSequence a = seq(Modality::audio, 5, 2, rng), v = seq(Modality::video, 5, 3, rng);
    AlignedPair p = avg_trim(a, v);
    CHECK(p.trace().factor == 1);
    CHECK(p.trace().common_length == 5);
    CHECK(p.audio() == a);
    CHECK(p.video() == v);
  }
  SUBCASE("L_a=7, L_v=3") {
    AlignedPair p = avg_trim(ramp(Modality::audio, 7), ramp(Modality::video, 3));
    CHECK(p.trace().ceil_factor == 3u);
    CHECK(p.trace().pooled_length == 3u);
    CHECK(p.trace().common_length == 3);
    Matrix expect(3, 1);
    expect << 1, 4, 6;  // groups {0,1,2}, {3,4,5}, {6}
    CHECK(p.audio().data() == expect);
  }
  SUBCASE("L_a=6, L_v=4") {
    AlignedPair p = avg_trim(ramp(Modality::audio, 6), ramp(Modality::video, 4));
    CHECK(p.trace().ceil_factor == 2u);
    CHECK(p.trace().pooled_length == 3u);
    CHECK(p.trace().common_length == 3);
    CHECK(p.video().data() == ramp(Modality::video, 3).data());
    Matrix expect(3, 1);
    expect << 0.5, 2.5, 4.5;
    CHECK(p.audio().data() == expect);
  }
}

TEST_CASE("alignment formulas and group means on random lengths") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> len(1, 60);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t la = len(rng), lv = len(rng);
    FeatureSequence a = seq(Modality::audio, la, 3, rng), v = seq(Modality::video, lv, 2, rng);

    AlignedPair d = dup_trim(a, v);
    auto de = oracle::dup_expect(la, lv);
    CHECK(d.trace().factor == de.k);
    CHECK(d.audio().length() == de.common);
    CHECK(d.video().length() == de.common);

    AlignedPair g = avg_trim(a, v);
    auto ge = oracle::avg_expect(la, lv);
    REQUIRE(g.trace().ceil_factor.has_value());
    CHECK(*g.trace().ceil_factor == ge.k_prime);
    CHECK(*g.trace().pooled_length == ge.pooled);
    CHECK(g.trace().common_length == ge.common);

    const FeatureSequence& longer = la > lv ? a : v;
    const FeatureSequence& pooled = la > lv ? g.audio() : g.video();
    for (std::size_t r = 0; r < ge.common; ++r) {
      std::size_t lo = r * ge.k_prime, hi = std::min(longer.length(), lo + ge.k_prime);
      for (std::size_t c = 0; c < longer.dim(); ++c) {
        double s = 0;
        for (std::size_t i = lo; i < hi; ++i) s += longer.data()(i, c);
        CHECK(pooled.data()(r, c) == doctest::Approx(s / (hi - lo)).epsilon(1e-12));
      }
    }
    CHECK(d.audio().data().allFinite());
    CHECK(g.video().data().allFinite());
  }
}

TEST_CASE("align dispatch and modality checks") {
  std::mt19937_64 rng(7);
  FeatureSequence a = seq(Modality::audio, 7, 2, rng), v = seq(Modality::video, 3, 2, rng);
  CHECK(align(AlignMethod::dup_trim, a, v).trace().common_length == 6);
  CHECK(align(align_method_from_string("avgtrim"), a, v).trace().common_length == 3);
  CHECK(align(align_method_from_string("paired"), a, v).length() == 3);
  CHECK_THROWS_AS(dup_trim(v, a), ValidationError);
  CHECK_THROWS_AS(pair_by_window_centering(a, v, 0.0), ValidationError);
  CHECK_THROWS_AS(align_method_from_string("dtw"), ValidationError);
}
