// Python bindings: thin wrappers that convert between numpy arrays / plain
// Python containers and the library types.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "talfuse/alignment.hpp"
#include "talfuse/errors.hpp"
#include "talfuse/evaluation.hpp"
#include "talfuse/fusion.hpp"
#include "talfuse/io.hpp"
#include "talfuse/proposal_fusion.hpp"
#include "talfuse/synth.hpp"

namespace py = pybind11;
using namespace talfuse;

namespace {

using Timing = std::tuple<double, double, double>;  // start_offset, hop, window
using PyProposal = std::tuple<double, double, std::string, double>;
using PySegment = std::tuple<double, double, std::string>;

SnippetTiming timing_of(const Timing& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

Timing timing_tuple(const SnippetTiming& t) { return {t.start_offset, t.hop, t.window}; }

ProposalSet to_set(const std::string& video, const std::vector<PyProposal>& ps) {
  ProposalSet s{video, {}};
  for (const auto& [a, b, label, score] : ps) s.proposals.push_back({a, b, label, score});
  s.validate();
  return s;
}

std::vector<PyProposal> from_set(const ProposalSet& s) {
  std::vector<PyProposal> out;
  for (const auto& p : s.proposals) out.emplace_back(p.t_start, p.t_end, p.label, p.score);
  return out;
}

py::dict trace_dict(const AlignmentTrace& t) {
  py::dict d;
  d["method"] = std::string(to_string(t.method));
  d["k"] = t.factor;
  d["L_m"] = t.common_length;
  if (t.ceil_factor) d["k_prime"] = *t.ceil_factor;
  if (t.pooled_length) d["L_pooled"] = *t.pooled_length;
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["thresholds"] = r.thresholds;
  d["per_class_ap"] = r.per_class_ap;
  d["map"] = r.map_at;
  d["average_map"] = r.average_map;
  d["spurious_detections"] = r.spurious_detections;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Audio-visual fusion toolkit for temporal action localization";

  py::register_exception<Error>(m, "TalfuseError", PyExc_ValueError);

  m.def("temporal_iou",
        [](std::pair<double, double> a, std::pair<double, double> b) {
          return temporal_iou({a.first, a.second}, {b.first, b.second});
        },
        py::arg("a"), py::arg("b"));

  m.def("snippet_centers",
        [](const Timing& t, std::size_t length) { return snippet_centers(timing_of(t), length); },
        py::arg("timing"), py::arg("length"));

  m.def("read_features",
        [](const std::string& path) {
          FeatureSequence s = io::read_features(path);
          return std::make_tuple(std::string(to_string(s.modality())), s.data(),
                                 timing_tuple(s.timing()));
        },
        py::arg("path"), "Returns (modality, L x d array, (start_offset, hop, window)).");

  m.def("write_features",
        [](const std::string& path, const std::string& modality, const Matrix& data,
           const Timing& timing) {
          io::write_features(FeatureSequence(modality_from_string(modality), data, timing_of(timing)),
                             path);
        },
        py::arg("path"), py::arg("modality"), py::arg("data"), py::arg("timing") = Timing{0, 1, 1});

  m.def("align",
        [](const std::string& method, const Matrix& video, const Matrix& audio,
           const Timing& video_timing, const Timing& audio_timing, double window) {
          AlignedPair p = align(align_method_from_string(method),
                                FeatureSequence(Modality::audio, audio, timing_of(audio_timing)),
                                FeatureSequence(Modality::video, video, timing_of(video_timing)),
                                window);
          return std::make_tuple(p.video().data(), p.audio().data(), trace_dict(p.trace()));
        },
        py::arg("method"), py::arg("video"), py::arg("audio"),
        py::arg("video_timing") = Timing{0, 1, 1}, py::arg("audio_timing") = Timing{0, 0.96, 0.96},
        py::arg("window") = kDefaultPairWindow,
        "Returns (video, audio, trace) after paired / duptrim / avgtrim alignment.");

  py::class_<RMAttnParams>(m, "RMAttnParams")
      .def_readonly("video_dim", &RMAttnParams::video_dim)
      .def_readonly("audio_dim", &RMAttnParams::audio_dim)
      .def_readonly("hidden_dim", &RMAttnParams::hidden_dim)
      .def_readwrite("video_gate_hidden", &RMAttnParams::video_gate_hidden)
      .def_readwrite("video_gate_bias", &RMAttnParams::video_gate_bias)
      .def_readwrite("video_gate_out", &RMAttnParams::video_gate_out)
      .def_readwrite("audio_gate_hidden", &RMAttnParams::audio_gate_hidden)
      .def_readwrite("audio_gate_bias", &RMAttnParams::audio_gate_bias)
      .def_readwrite("audio_gate_out", &RMAttnParams::audio_gate_out)
      .def_readwrite("audio_to_video", &RMAttnParams::audio_to_video)
      .def_readwrite("video_to_audio", &RMAttnParams::video_to_audio)
      .def("parameter_count", &RMAttnParams::parameter_count);

  m.def("rmattn_init", &rmattn_init, py::arg("video_dim"), py::arg("audio_dim"),
        py::arg("hidden_dim") = 0, py::arg("seed") = 0);

  m.def("rmattn_forward",
        [](const RMAttnParams& p, const Matrix& video, const Matrix& audio) {
          p.validate();
          return rmattn_forward(p, video, audio);
        },
        py::arg("params"), py::arg("video"), py::arg("audio"));

  m.def("rmattn_backward",
        [](const RMAttnParams& p, const Matrix& video, const Matrix& audio, const Matrix& upstream) {
          p.validate();
          RMAttnCache cache;
          rmattn_forward(p, video, audio, &cache);
          RMAttnGradients g = rmattn_backward(p, cache, upstream);
          return std::make_tuple(g.params, g.video, g.audio);
        },
        py::arg("params"), py::arg("video"), py::arg("audio"), py::arg("upstream"),
        "Gradients of sum(upstream * forward) as (params, d_video, d_audio).");

  m.def("nms",
        [](const std::vector<PyProposal>& ps, double iou, std::optional<std::size_t> max_out) {
          return from_set(nms(to_set("", ps), iou, max_out));
        },
        py::arg("proposals"), py::arg("iou"), py::arg("max_out") = py::none(),
        "Proposals are (t_start, t_end, label, score) tuples.");

  m.def("pool_and_nms",
        [](const std::vector<std::vector<PyProposal>>& sets, double iou,
           std::optional<std::size_t> max_out) {
          std::vector<ProposalSet> converted;
          for (const auto& s : sets) converted.push_back(to_set("", s));
          return from_set(pool_and_nms(converted, iou, max_out));
        },
        py::arg("sets"), py::arg("iou"), py::arg("max_out") = py::none());

  m.def("average_precision",
        [](const std::vector<bool>& flags, std::size_t num_gt) {
          std::vector<char> buf(flags.begin(), flags.end());
          return average_precision(
              std::span<const bool>(reinterpret_cast<const bool*>(buf.data()), buf.size()), num_gt);
        },
        py::arg("flags"), py::arg("num_gt"));

  m.def("evaluate",
        [](const std::map<std::string, std::vector<PyProposal>>& preds,
           const std::map<std::string, std::vector<PySegment>>& gts,
           const std::vector<double>& thresholds) {
          std::vector<ProposalSet> p;
          for (const auto& [video, ps] : preds) p.push_back(to_set(video, ps));
          std::vector<GroundTruth> g;
          for (const auto& [video, segs] : gts) {
            GroundTruth gt{video, 0.0, {}};
            for (const auto& [a, b, label] : segs) {
              gt.segments.push_back({a, b, label});
              gt.duration = std::max(gt.duration, b);
            }
            g.push_back(std::move(gt));
          }
          return report_dict(evaluate(p, g, thresholds));
        },
        py::arg("preds"), py::arg("gts"), py::arg("thresholds") = kThumosThresholds,
        "preds: video -> [(t_start, t_end, label, score)], gts: video -> [(t_start, t_end, label)].");

  m.def("preset_thresholds", &preset_thresholds, py::arg("preset"));

  m.def("generate_episode",
        [](const std::string& config_json, std::uint64_t index, const std::string& video_id) {
          Episode e = synth::generate_episode(synth::parse_config(config_json), index, video_id);
          std::vector<PySegment> segs;
          for (const auto& s : e.ground_truth.segments) segs.emplace_back(s.t_start, s.t_end, s.label);
          py::dict d;
          d["video"] = e.video.data();
          d["audio"] = e.audio.data();
          d["video_timing"] = timing_tuple(e.video.timing());
          d["audio_timing"] = timing_tuple(e.audio.timing());
          d["segments"] = segs;
          d["duration"] = e.ground_truth.duration;
          return d;
        },
        py::arg("config_json") = "{}", py::arg("index") = 0, py::arg("video_id") = "episode");
}
