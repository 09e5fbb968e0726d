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

#include "respdl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace respdl::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  out << subject << ": max rel err " << max_rel_error();
  for (const auto& t : tensors) {
    out << "\n  " << t.name << " [" << t.checked << "] " << t.max_rel_error << " (analytic "
        << t.analytic << ", numeric " << t.numeric << ")";
  }
  return out.str();
}

GradCheckReport check_gradients(const std::string& subject,
                                const std::function<double()>& objective,
                                std::vector<GradProbe>& probes, const GradCheckOptions& opts) {
  GradCheckReport report;
  report.subject = subject;
  std::mt19937_64 rng(opts.seed);
  double global_scale = 0.0;
  for (const auto& probe : probes) {
    for (double a : probe.analytic) global_scale = std::max(global_scale, std::abs(a));
  }
  for (auto& probe : probes) {
    const std::size_t n = probe.values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (opts.max_entries_per_tensor != 0 && opts.max_entries_per_tensor < n) {
      for (std::size_t i = 0; i < opts.max_entries_per_tensor; ++i) {
        const std::size_t j = i + rng() % (n - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(opts.max_entries_per_tensor);
    }
    double scale = 0.0;
    for (double a : probe.analytic) scale = std::max(scale, std::abs(a));
    const double floor = std::max({1e-2 * scale, 1e-4 * global_scale, 1e-10});

    TensorCheck tc;
    tc.name = probe.name;
    for (std::size_t i : idx) {
      const double orig = probe.values[i];
      probe.values[i] = orig + opts.step;
      const double fp = objective();
      probe.values[i] = orig - opts.step;
      const double fm = objective();
      probe.values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * opts.step);
      const double err = relative_error(probe.analytic[i], numeric, floor);
      if (err > tc.max_rel_error || tc.checked == 0) {
        tc.max_rel_error = err;
        tc.worst_index = i;
        tc.analytic = probe.analytic[i];
        tc.numeric = numeric;
      }
      ++tc.checked;
    }
    report.tensors.push_back(tc);
  }
  return report;
}

GradCheckReport grad_check(Layer<double>& layer, const Shape& input_shape,
                           const GradCheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> x(input_shape);
  for (auto& v : x.values()) v = normal(rng);
  Tensor<double> proj(layer.output_shape(input_shape));
  for (auto& v : proj.values()) v = normal(rng);

  auto params = layer.parameters();
  for (auto* p : params) p->zero_grad();
  layer.forward(x, opts.mode);
  Tensor<double> dx = layer.backward(proj);

  auto objective = [&]() {
    const Tensor<double> y = layer.forward(x, opts.mode);
    double f = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) f += proj[i] * y[i];
    return f;
  };

  std::vector<GradProbe> probes;
  probes.push_back({"input", x.values(), std::vector<double>(dx.values().begin(), dx.values().end())});
  for (auto* p : params) {
    probes.push_back({p->name.empty() ? std::string("param") : p->name, p->value.values(),
                      std::vector<double>(p->grad.values().begin(), p->grad.values().end())});
  }
  return check_gradients(layer.kind(), objective, probes, opts);
}

}  // namespace respdl::nn
