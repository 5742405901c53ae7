#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "talfuse/errors.hpp"
#include "talfuse/io.hpp"

using namespace talfuse;
namespace fs = std::filesystem;

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

/// Hand-assembled MMFS file (host is little-endian).
std::vector<std::uint8_t> mmfs(std::uint8_t modality, std::uint64_t L, std::uint64_t d,
                               double off, double hop, double win,
                               const std::vector<float>& payload) {
  std::vector<std::uint8_t> out = {'M', 'M', 'F', 'S'};
  put<std::uint32_t>(out, 1);
  put<std::uint8_t>(out, modality);
  put(out, L);
  put(out, d);
  put(out, off);
  put(out, hop);
  put(out, win);
  for (float f : payload) put(out, f);
  return out;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("talfuse_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("read_features direct layout") {
  auto bytes = mmfs(1, 2, 3, 0.5, 0.96, 0.96, {1, 2, 3, 4, 5, 6});
  FeatureSequence s = io::decode_features(bytes);
  CHECK(s.modality() == Modality::audio);
  Matrix expect(2, 3);
  expect << 1, 2, 3, 4, 5, 6;
  CHECK(s.data() == expect);
  CHECK(s.timing() == SnippetTiming{0.5, 0.96, 0.96});
  CHECK(io::encode_features(s) == bytes);
}

TEST_CASE("1x1 sequence and header echo") {
  Matrix m(1, 1);
  m << -2.5;
  FeatureSequence s(Modality::fused, m, {3.0, 0.5, 2.0});
  auto bytes = io::encode_features(s);
  CHECK(bytes.size() == io::kFeatureHeaderSize + 4);
  CHECK(bytes == mmfs(2, 1, 1, 3.0, 0.5, 2.0, {-2.5f}));
}

TEST_CASE("feature decode errors") {
  auto good = mmfs(0, 2, 3, 0, 1, 1, {1, 2, 3, 4, 5, 6});
  auto bad = good;
  std::memcpy(bad.data(), "XXXX", 4);
  CHECK_THROWS_AS(io::decode_features(bad), FormatError);

  auto truncated = good;
  truncated.pop_back();
  CHECK_THROWS_AS(io::decode_features(truncated), LengthError);
  auto header_only = std::vector<std::uint8_t>(good.begin(), good.begin() + 20);
  CHECK_THROWS_AS(io::decode_features(header_only), LengthError);

  auto nonfinite = mmfs(0, 1, 2, 0, 1, 1, {1.0f, std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(io::decode_features(nonfinite), ValidationError);

  CHECK_THROWS_AS(io::decode_features(mmfs(0, 1, 1, 0, 0, 1, {1})), FormatError);
  CHECK_THROWS_AS(io::decode_features(mmfs(7, 1, 1, 0, 1, 1, {1})), FormatError);
}

TEST_CASE("every magic and version byte mutation is rejected") {
  auto good = mmfs(0, 2, 2, 0, 1, 1, {1, 2, 3, 4});
  for (std::size_t pos = 0; pos < 8; ++pos) {
    for (int delta = 1; delta < 256; ++delta) {
      auto m = good;
      m[pos] = static_cast<std::uint8_t>(m[pos] + delta);
      CHECK_THROWS_AS(io::decode_features(m), FormatError);
    }
  }
}

TEST_CASE("randomized feature files round-trip byte-identically") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_int_distribution<std::uint32_t> bits;
  fs::path dir = temp_dir("roundtrip");
  for (int trial = 0; trial < 50; ++trial) {
    std::uint64_t L = dim(rng), d = dim(rng);
    std::vector<float> payload;
    for (std::uint64_t i = 0; i < L * d; ++i) {
      float f;
      do {
        std::uint32_t b = bits(rng);
        std::memcpy(&f, &b, 4);
      } while (!std::isfinite(f));
      payload.push_back(f);
    }
    auto bytes = mmfs(static_cast<std::uint8_t>(trial % 3), L, d, 0.25 * trial, 0.96, 1.2, payload);
    fs::path f = dir / ("f" + std::to_string(trial) + ".mmfs");
    io::write_bytes(f, bytes);
    FeatureSequence s = io::read_features(f);
    fs::path g = dir / ("g" + std::to_string(trial) + ".mmfs");
    io::write_features(s, g);
    CHECK(io::read_bytes(g) == bytes);
    CHECK(io::read_features(g) == s);
  }
  fs::remove_all(dir);
}

TEST_CASE("proposal records") {
  auto sets = io::parse_proposals(
      R"({"video_id":"v1","t_start":0,"t_end":2,"label":"c","score":0.5})"
      "\n");
  REQUIRE(sets.size() == 1);
  CHECK(sets[0].video_id == "v1");
  CHECK(sets[0].proposals == std::vector<Proposal>{{0, 2, "c", 0.5}});

  std::string bad =
      R"({"video_id":"v1","t_start":0,"t_end":2,"label":"c","score":0.5})"
      "\n"
      R"({"video_id":"v1","t_start":3,"t_end":2,"label":"c","score":0.5})"
      "\n";
  try {
    io::parse_proposals(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(io::parse_proposals(R"({"video_id":"v","t_start":0,"t_end":1,"label":"c"})"),
                  ParseError);
  CHECK_THROWS_AS(io::parse_proposals(R"({"video_id":"v","t_start":"x","t_end":1,"label":"c","score":1})"),
                  ParseError);
  CHECK_THROWS_AS(io::parse_proposals(R"({"video_id":"v","t_start":0,"t_end":1,"label":"c","score":1.5})"),
                  ParseError);
  CHECK_THROWS_AS(io::parse_proposals(R"({"video_id":"v","t_start":0,"t_end":1,"label":"c","score":1,"x":2})"),
                  ParseError);
  CHECK_THROWS_AS(io::parse_proposals("{not json"), ParseError);
}

TEST_CASE("randomized proposal sets round-trip value-exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ProposalSet> sets;
    for (int v = 0; v < 3; ++v) {
      ProposalSet s{"vid" + std::to_string(trial) + "_" + std::to_string(v), {}};
      for (int i = 0; i < 5; ++i) {
        double a = 100 * u(rng);
        s.proposals.push_back({a, a + 1e-3 + 10 * u(rng), "cls \"" + std::to_string(i % 2) + "\"", u(rng)});
      }
      sets.push_back(s);
    }
    auto text = io::format_proposals(sets);
    CHECK(io::parse_proposals(text) == sets);
    CHECK(io::format_proposals(io::parse_proposals(text)) == text);
  }
}

TEST_CASE("ground truth records") {
  std::string text =
      R"({"video_id":"a","t_start":1,"t_end":3,"label":"1"})"
      "\n\n"
      R"({"video_id":"b","t_start":0,"t_end":2,"label":"2"})"
      "\n"
      R"({"video_id":"a","t_start":5,"t_end":9.5,"label":"2"})"
      "\n";
  auto gts = io::parse_ground_truth(text);
  REQUIRE(gts.size() == 2);
  CHECK(gts[0].video_id == "a");
  CHECK(gts[0].duration == 9.5);
  CHECK(gts[0].segments.size() == 2);
  CHECK(gts[1].segments == std::vector<Segment>{{0, 2, "2"}});
  CHECK(io::parse_ground_truth(io::format_ground_truth(gts)) == gts);
  CHECK_THROWS_AS(io::parse_ground_truth(R"({"video_id":"a","t_start":1,"t_end":3,"label":"1","score":1})"),
                  ParseError);
}

TEST_CASE("checkpoint round trip and errors") {
  io::Checkpoint ck;
  ck.metadata = R"({"format":"x"})";
  Matrix a(2, 3);
  a << 1, 2, 3, 4, 5, 6.5;
  Matrix b(1, 1);
  b << -1e-300;
  ck.sections = {{"a", a}, {"b.c", b}};
  auto bytes = io::encode_checkpoint(ck);
  io::Checkpoint back = io::decode_checkpoint(bytes);
  CHECK(back.metadata == ck.metadata);
  CHECK(back.at("a") == a);
  CHECK(back.at("b.c") == b);
  CHECK(back.find("zz") == nullptr);
  CHECK_THROWS_AS(back.at("zz"), FormatError);
  CHECK(io::encode_checkpoint(back) == bytes);

  auto trunc = bytes;
  trunc.resize(trunc.size() - 3);
  CHECK_THROWS_AS(io::decode_checkpoint(trunc), LengthError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_checkpoint(magic), FormatError);
}

TEST_CASE("missing files raise io errors") {
  CHECK_THROWS_AS(io::read_features("/nonexistent/dir/f.mmfs"), IoError);
  CHECK_THROWS_AS(io::write_text("/nonexistent/dir/f.txt", "x"), IoError);
}
