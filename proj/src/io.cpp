#include "talfuse/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "talfuse/errors.hpp"

namespace talfuse::io {
namespace {

using json = nlohmann::json;

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { out_.push_back(v); }
  void put_u16(std::uint16_t v) { put_le(v, 2); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw LengthError("unexpected end of data: need " + std::to_string(n) +
                        " bytes, have " + std::to_string(remaining()));
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t checked_product(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw FormatError("matrix shape overflows");
  }
  return a * b;
}

// Fields of one text record, with the line number for error messages.
struct RecordView {
  const json& obj;
  std::size_t line;

  const json& field(const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(line, std::string("missing field '") + name + "'");
    return *it;
  }
  std::string string_field(const char* name) const {
    const json& v = field(name);
    if (!v.is_string()) throw ParseError(line, std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
  }
  double number_field(const char* name) const {
    const json& v = field(name);
    if (!v.is_number()) throw ParseError(line, std::string("field '") + name + "' is not a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(line, std::string("field '") + name + "' is not finite");
    return d;
  }
  void only_fields(std::initializer_list<const char*> allowed) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                  [&](const char* a) { return it.key() == a; });
      if (!ok) throw ParseError(line, "unexpected field '" + it.key() + "'");
    }
  }
};

template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "record is not an object");
    fn(RecordView{obj, line_no});
  }
}

std::string dump_line(const json& obj) { return obj.dump() + "\n"; }

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  ByteWriter w;
  w.put_raw(kFeatureMagic, 4);
  w.put_u32(kFeatureVersion);
  w.put_u8(static_cast<std::uint8_t>(seq.modality()));
  w.put_u64(seq.length());
  w.put_u64(seq.dim());
  w.put_f64(seq.timing().start_offset);
  w.put_f64(seq.timing().hop);
  w.put_f64(seq.timing().window);
  const Matrix& m = seq.data();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float v = static_cast<float>(m(i, j));
      if (!std::isfinite(v)) {
        throw ValidationError("feature value overflows 32-bit float");
      }
      w.put_f32(v);
    }
  }
  return w.take();
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureHeaderSize) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
      throw FormatError("bad magic: not an MMFS feature file");
    }
    throw LengthError("truncated MMFS header");
  }
  ByteReader r(bytes);
  if (r.str(4) != std::string(kFeatureMagic, 4)) {
    throw FormatError("bad magic: not an MMFS feature file");
  }
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) {
    throw FormatError("unsupported MMFS version " + std::to_string(version));
  }
  const std::uint8_t modality = r.u8();
  if (modality > 2) {
    throw FormatError("bad modality byte " + std::to_string(modality));
  }
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  SnippetTiming timing;
  timing.start_offset = r.f64();
  timing.hop = r.f64();
  timing.window = r.f64();
  if (rows < 1 || cols < 1) throw FormatError("MMFS header needs L >= 1 and d >= 1");
  if (!(timing.hop > 0.0) || !(timing.window > 0.0) ||
      !std::isfinite(timing.hop) || !std::isfinite(timing.window) ||
      !std::isfinite(timing.start_offset)) {
    throw FormatError("MMFS header needs finite timing with hop, window > 0");
  }
  const std::uint64_t count = checked_product(rows, cols);
  if (count > r.remaining() / 4 || r.remaining() != count * 4) {
    throw LengthError("MMFS payload size mismatch: expected " +
                      std::to_string(count) + " floats, found " +
                      std::to_string(r.remaining()) + " bytes");
  }
  Matrix data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite feature value at row " +
                              std::to_string(i) + ", column " + std::to_string(j));
      }
      data(i, j) = static_cast<double>(v);
    }
  }
  return FeatureSequence(static_cast<Modality>(modality), std::move(data), timing);
}

FeatureSequence read_features(const std::filesystem::path& path) {
  return decode_features(read_bytes(path));
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  write_bytes(path, encode_features(seq));
}

std::vector<ProposalSet> parse_proposals(const std::string& text) {
  std::vector<ProposalSet> sets;
  std::map<std::string, std::size_t> index;
  for_each_record(text, [&](const RecordView& rec) {
    rec.only_fields({"video_id", "t_start", "t_end", "label", "score"});
    Proposal p;
    const std::string vid = rec.string_field("video_id");
    p.t_start = rec.number_field("t_start");
    p.t_end = rec.number_field("t_end");
    p.label = rec.string_field("label");
    p.score = rec.number_field("score");
    try {
      p.validate();
    } catch (const ValidationError& e) {
      throw ParseError(rec.line, e.what());
    }
    auto [it, inserted] = index.emplace(vid, sets.size());
    if (inserted) sets.push_back(ProposalSet{vid, {}});
    sets[it->second].proposals.push_back(std::move(p));
  });
  return sets;
}

std::string format_proposals(std::span<const ProposalSet> sets) {
  std::string out;
  for (const auto& set : sets) {
    for (const auto& p : set.proposals) {
      p.validate();
      json obj = json::object();
      obj["video_id"] = set.video_id;
      obj["t_start"] = p.t_start;
      obj["t_end"] = p.t_end;
      obj["label"] = p.label;
      obj["score"] = p.score;
      out += dump_line(obj);
    }
  }
  return out;
}

std::vector<ProposalSet> read_proposals(const std::filesystem::path& path) {
  return parse_proposals(read_text(path));
}

void write_proposals(std::span<const ProposalSet> sets,
                     const std::filesystem::path& path) {
  write_text(path, format_proposals(sets));
}

std::vector<GroundTruth> parse_ground_truth(const std::string& text) {
  std::vector<GroundTruth> gts;
  std::map<std::string, std::size_t> index;
  for_each_record(text, [&](const RecordView& rec) {
    rec.only_fields({"video_id", "t_start", "t_end", "label"});
    Segment s;
    const std::string vid = rec.string_field("video_id");
    s.t_start = rec.number_field("t_start");
    s.t_end = rec.number_field("t_end");
    s.label = rec.string_field("label");
    if (s.t_start < 0.0) throw ParseError(rec.line, "t_start must be >= 0");
    if (!(s.t_start < s.t_end)) throw ParseError(rec.line, "needs t_start < t_end");
    auto [it, inserted] = index.emplace(vid, gts.size());
    if (inserted) gts.push_back(GroundTruth{vid, 0.0, {}});
    GroundTruth& gt = gts[it->second];
    gt.duration = std::max(gt.duration, s.t_end);
    gt.segments.push_back(std::move(s));
  });
  return gts;
}

std::string format_ground_truth(std::span<const GroundTruth> gts) {
  std::string out;
  for (const auto& gt : gts) {
    gt.validate();
    for (const auto& s : gt.segments) {
      json obj = json::object();
      obj["video_id"] = gt.video_id;
      obj["t_start"] = s.t_start;
      obj["t_end"] = s.t_end;
      obj["label"] = s.label;
      out += dump_line(obj);
    }
  }
  return out;
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_text(path));
}

void write_ground_truth(std::span<const GroundTruth> gts,
                        const std::filesystem::path& path) {
  write_text(path, format_ground_truth(gts));
}

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s.value;
  }
  return nullptr;
}

const Matrix& Checkpoint::at(const std::string& name) const {
  const Matrix* m = find(name);
  if (m == nullptr) throw FormatError("checkpoint has no section '" + name + "'");
  return *m;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_raw("MMCK", 4);
  w.put_u32(1);
  w.put_u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  w.put_raw(ckpt.metadata.data(), ckpt.metadata.size());
  w.put_u32(static_cast<std::uint32_t>(ckpt.sections.size()));
  for (const auto& s : ckpt.sections) {
    if (s.name.size() > 0xFFFF) throw ValidationError("section name too long");
    w.put_u16(static_cast<std::uint16_t>(s.name.size()));
    w.put_raw(s.name.data(), s.name.size());
    w.put_u64(static_cast<std::uint64_t>(s.value.rows()));
    w.put_u64(static_cast<std::uint64_t>(s.value.cols()));
  }
  for (const auto& s : ckpt.sections) {
    for (Eigen::Index i = 0; i < s.value.size(); ++i) w.put_f64(s.value.data()[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 8 || r.str(4) != "MMCK") throw FormatError("bad magic: not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.metadata = r.str(r.u32());
  const std::uint32_t n = r.u32();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint32_t k = 0; k < n; ++k) {
    CheckpointSection s;
    s.name = r.str(r.u16());
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    checked_product(rows, cols);
    shapes.emplace_back(rows, cols);
    ckpt.sections.push_back(std::move(s));
  }
  for (std::uint32_t k = 0; k < n; ++k) {
    auto [rows, cols] = shapes[k];
    if (rows * cols > r.remaining() / 8) throw LengthError("truncated checkpoint payload");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    ckpt.sections[k].value = std::move(m);
  }
  if (r.remaining() != 0) throw LengthError("trailing bytes after checkpoint payload");
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path));
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_bytes(path, encode_checkpoint(ckpt));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

void write_bytes(const std::filesystem::path& path,
                 std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

}  // namespace talfuse::io
