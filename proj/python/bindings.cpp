// Copyright 2026 The respdl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include "respdl/audio.hpp"
#include "respdl/config.hpp"
#include "respdl/dsp.hpp"
#include "respdl/errors.hpp"
#include "respdl/harness.hpp"
#include "respdl/ingest.hpp"
#include "respdl/metrics.hpp"
#include "respdl/models.hpp"
#include "respdl/synth.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Doubles& a) {
  if (a.ndim() != 1) throw respdl::ShapeError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<float> spectrogram_array(const respdl::Spectrogram& s) {
  py::array_t<float> out({s.rows, s.cols});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

py::dict metrics_dict(const respdl::Metrics& m) {
  py::dict d;
  d["specificity"] = m.specificity;
  d["sensitivity"] = m.sensitivity;
  d["icbhi_score"] = m.icbhi_score;
  d["confusion"] = m.confusion;
  return d;
}

py::list report_rows(const std::vector<respdl::ReportRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["task"] = r.task;
    d["setting"] = r.setting;
    d["fold"] = r.fold;
    d["specificity"] = r.specificity;
    d["sensitivity"] = r.sensitivity;
    d["icbhi_score"] = r.icbhi_score;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_respdl, m) {
  m.doc() = "Respiratory sound classification: features, models and evaluation.";

  // Every library error, including its subclasses, surfaces as respdl.Error.
  py::register_exception<respdl::Error>(m, "Error", PyExc_RuntimeError);

  m.def(
      "load_wav",
      [](const std::string& path) {
        const auto rec = respdl::load_wav(path);
        return py::make_tuple(py::array_t<double>(rec.samples.size(), rec.samples.data()),
                              rec.sample_rate);
      },
      py::arg("path"), "Decode a WAV file to (mono samples in [-1, 1], sample rate).");

  m.def(
      "resample",
      [](const Doubles& x, int src_rate, int dst_rate) {
        const auto y = respdl::resample(to_vector(x), src_rate, dst_rate);
        return py::array_t<double>(y.size(), y.data());
      },
      py::arg("samples"), py::arg("src_rate"), py::arg("dst_rate") = 16000);

  m.def(
      "frame_count", [](std::size_t length) { return respdl::frame_count(length); },
      py::arg("length"), "STFT frames for a 16 kHz signal of the given length.");

  m.def(
      "center_frequencies", [] { return respdl::default_bank().center_freqs; },
      "Center frequencies in Hz of the 64-channel gammatone bank.");

  m.def(
      "gammatone_spectrogram",
      [](const Doubles& x) {
        const auto s = respdl::gammatone_spectrogram(to_vector(x), respdl::default_bank());
        return spectrogram_array(s);
      },
      py::arg("samples"), "Log gammatone spectrogram (64 x frames) of 16 kHz samples.");

  m.def(
      "compute_metrics",
      [](const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
        return metrics_dict(respdl::compute_metrics(truth, pred, n_classes));
      },
      py::arg("truth"), py::arg("predictions"), py::arg("n_classes"));

  m.def(
      "ensemble_fuse",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return respdl::models::ensemble_fuse(a, b);
      },
      py::arg("p_a"), py::arg("p_b"));

  m.def(
      "write_synth_dataset",
      [](const std::string& out, int n, int classes, std::uint64_t seed) {
        respdl::SynthOptions o;
        o.n = n;
        o.classes = classes;
        o.seed = seed;
        const auto s = respdl::write_synth_dataset(out, o);
        py::dict d;
        d["audio_dir"] = s.audio_dir.string();
        d["diagnosis_file"] = s.diagnosis_file.string();
        d["recordings"] = s.recordings;
        d["cycles"] = s.cycles;
        return d;
      },
      py::arg("out"), py::arg("n") = 40, py::arg("classes") = 4, py::arg("seed") = 7);

  m.def(
      "config_keys",
      [] {
        std::vector<std::string> keys;
        for (const auto& k : respdl::config_schema()) keys.push_back(k.name);
        return keys;
      },
      "Configuration keys accepted by parse_config and the command line.");

  m.def(
      "normalize_config",
      [](const std::string& text) { return respdl::serialize_config(respdl::parse_config(text)); },
      py::arg("text"), "Parse key=value lines and return the full configuration text.");

  m.def(
      "cross_validate",
      [](const std::string& config_text, const std::string& out_dir, int jobs) {
        std::vector<respdl::ReportRow> rows;
        {
          py::gil_scoped_release release;
          const auto cfg = respdl::parse_config(config_text);
          const auto cache = respdl::feature_cache_root(cfg, fs::path(out_dir) / "cache");
          const auto data = respdl::prepare_dataset(cfg, cache);
          rows = respdl::cv_report_rows(cfg, respdl::run_cv(cfg, data, jobs));
        }
        return report_rows(rows);
      },
      py::arg("config"), py::arg("out_dir"), py::arg("jobs") = 1,
      "Run 5-fold cross-validation; returns per-fold rows and the mean row.");
}
