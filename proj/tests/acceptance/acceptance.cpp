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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here, not taken from the command line.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "respdl/augment.hpp"
#include "respdl/config.hpp"
#include "respdl/dsp.hpp"
#include "respdl/gradcheck_suite.hpp"
#include "respdl/harness.hpp"
#include "respdl/ingest.hpp"
#include "respdl/log.hpp"
#include "respdl/metrics.hpp"
#include "respdl/models.hpp"
#include "respdl/nn/loss.hpp"
#include "respdl/synth.hpp"

namespace fs = std::filesystem;
using namespace respdl;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Runs a criterion, turning exceptions into a failure line.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(ok, name, detail);
  } catch (const std::exception& e) {
    report(false, name, std::string("exception: ") + e.what());
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Cmd {
  int code = -1;
  std::string out;
};

Cmd run_cli(const std::string& args) {
  Cmd r;
  const std::string cmd = std::string("'") + RESPDL_CLI_PATH + "' " + args + " 2>/dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string line_value(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

// ---- criteria -----------------------------------------------------------------

std::pair<bool, std::string> gradients() {
  const auto t0 = Clock::now();
  const auto suite = run_gradcheck_suite(true);
  const double secs = seconds_since(t0);
  bool ok = secs < 120.0;
  std::string worst;
  double worst_ratio = 0.0;
  for (const auto& e : suite) {
    ok = ok && e.passed();
    const double ratio = e.report.max_rel_error() / e.tolerance;
    if (ratio >= worst_ratio) {
      worst_ratio = ratio;
      worst = e.name + " " + fmt("%.2e", e.report.max_rel_error()) + " vs " + fmt("%.0e", e.tolerance);
    }
  }
  return {ok, std::to_string(suite.size()) + " checks, closest to tolerance: " + worst + ", " +
                  fmt("%.1f s", secs) + " (limit 120 s)"};
}

std::pair<bool, std::string> shapes() {
  bool ok = true;
  for (int n : {4, 2, 3}) {
    models::ModelOptions o;
    o.n_classes = n;
    models::CnnMoe<float> cnn(o);
    models::Crnn<float> crnn(o);
    ok = ok && cnn.shape_trace() == models::published_cnn_moe_trace(n);
    ok = ok && crnn.shape_trace() == models::published_crnn_trace(n);
    // The traced shapes are what a forward pass actually produces.
    const auto p = cnn.forward(nn::Tensor<float>({1, 64, 128}), nn::Mode::kInfer).probs;
    ok = ok && p.shape() == nn::Shape{1, static_cast<std::size_t>(n)};
  }
  return {ok, "CNN-MoE and C-RNN traces for N in {2,3,4} equal the published Output columns"};
}

std::pair<bool, std::string> eq1() {
  double worst = 0.0;
  nn::Rng rng(1);
  std::mt19937_64 drng(2);
  std::normal_distribution<double> g;
  auto randn = [&](std::size_t b, std::size_t d) {
    nn::Tensor<double> t({b, d});
    for (auto& v : t.values()) v = g(drng);
    return t;
  };
  {  // J = 1: g_1 = 1, output softmax(e_1)
    models::MoeLayer<double> moe(8, 4, 1, rng);
    const auto p = models::moe_probs(moe, randn(5, 8), nn::Mode::kInfer);
    const auto want = nn::softmax_rows(moe.expert_outputs().reshaped({5, 4}));
    for (double v : moe.gate().values()) worst = std::max(worst, std::abs(v - 1.0));
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - want[i]));
  }
  {  // identical experts: softmax(e) for any gate
    models::MoeLayer<double> moe(8, 3, 10, rng);
    auto& w = moe.expert_weight().value;
    auto& b = moe.expert_bias().value;
    for (std::size_t j = 1; j < 10; ++j) {
      for (std::size_t k = 0; k < 24; ++k) w[j * 24 + k] = w[k];
      for (std::size_t k = 0; k < 3; ++k) b[j * 3 + k] = b[k];
    }
    const auto p = models::moe_probs(moe, randn(4, 8), nn::Mode::kInfer);
    nn::Tensor<double> e({4, 3});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < 3; ++c) e[i * 3 + c] = moe.expert_outputs()[i * 30 + c];
    }
    const auto want = nn::softmax_rows(e);
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - want[i]));
  }
  {  // J = 2, e = (1,0), (0,1), g = (0.5, 0.5)
    models::MoeLayer<double> moe(2, 2, 2, rng);
    auto& w = moe.expert_weight().value;
    w.fill(0.0);
    w[0] = w[3] = w[5] = w[6] = 1.0;
    moe.expert_bias().value.fill(0.0);
    moe.gate_weight().value.fill(0.0);
    moe.gate_bias().value.fill(0.0);
    const auto p = models::moe_probs(moe, nn::Tensor<double>({1, 2}, std::vector<double>{1.0, 0.0}),
                                     nn::Mode::kInfer);
    worst = std::max({worst, std::abs(p[0] - 0.5), std::abs(p[1] - 0.5)});
  }
  return {worst <= 1e-9, "single-expert, equal-experts, symmetric two-expert identities; max deviation " +
                             fmt("%.1e", worst) + " (limit 1e-9)"};
}

std::pair<bool, std::string> eq2() {
  double worst = 0.0;
  for (std::size_t n : {2u, 3u, 4u}) {
    nn::Tensor<double> target({3, n});
    for (std::size_t i = 0; i < 3; ++i) target[i * n + i % n] = 1.0;
    const nn::Tensor<double> uniform({3, n}, 1.0 / static_cast<double>(n));
    worst = std::max(worst, std::abs(nn::cross_entropy(uniform, target) - std::log(static_cast<double>(n))));
  }
  nn::Parameter<double> ones("theta", nn::Tensor<double>({100}, 1.0));
  std::vector<nn::Parameter<double>*> ps = {&ones};
  const double l2_ones = nn::l2_penalty<double>(ps, 1e-4);
  nn::Parameter<double> fixture("theta", nn::Tensor<double>({4}, std::vector<double>{0.5, -1.5, 2.0, 0.25}));
  std::vector<nn::Parameter<double>*> pf = {&fixture};
  const double l2_fix = nn::l2_penalty<double>(pf, 0.5);
  // (0.5/2) * (0.25 + 2.25 + 4 + 0.0625) = 1.640625, exact in binary.
  const bool ok = worst <= 1e-9 && l2_ones == 0.005 && l2_fix == 1.640625;
  return {ok, "uniform CE - ln N max " + fmt("%.1e", worst) + "; L2(100 ones, 1e-4) = " +
                  fmt("%.17g", l2_ones) + "; L2(fixture, 0.5) = " + fmt("%.17g", l2_fix)};
}

std::pair<bool, std::string> eq3() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    nn::Tensor<double> a({5, 4}), b({5, 4});
    for (auto* t : {&a, &b}) {
      for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += ((*t)[i * 4 + c] = u(rng));
        for (std::size_t c = 0; c < 4; ++c) (*t)[i * 4 + c] /= s;
      }
    }
    const auto ab = models::ensemble_fuse(a, b).fused;
    const auto ba = models::ensemble_fuse(b, a).fused;
    const auto aa = models::ensemble_fuse(a, a).fused;
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max({worst, std::abs(ab[i] - (a[i] + b[i]) / 2), std::abs(ab[i] - ba[i]),
                        std::abs(aa[i] - a[i])});
    }
  }
  const auto f = models::ensemble_fuse(std::vector<double>{0.8, 0.2}, std::vector<double>{0.6, 0.4});
  worst = std::max({worst, std::abs(f[0] - 0.7), std::abs(f[1] - 0.3)});
  return {worst <= 1e-12, "mean, symmetry, idempotence over 50 random pairs; max deviation " +
                              fmt("%.1e", worst) + " (limit 1e-12)"};
}

std::pair<bool, std::string> metric_oracle() {
  bool ok = true;
  // Hand count: N N N N C C W W B B -> N N C N C W W W N B
  const std::vector<int> truth = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> pred = {0, 0, 1, 0, 1, 2, 2, 2, 0, 3};
  const auto m = compute_metrics(truth, pred, 4);
  const std::vector<std::vector<long>> conf = {{3, 1, 0, 0}, {0, 1, 1, 0}, {0, 0, 2, 0}, {1, 0, 0, 1}};
  ok = ok && m.confusion == conf && m.specificity == 0.75 && m.sensitivity == 4.0 / 6.0 &&
       m.icbhi_score == (m.specificity + m.sensitivity) / 2;
  // Two-class fixture: 5 healthy (4 right), 5 diseased (2 right).
  const auto m2 = compute_metrics(std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1},
                                  std::vector<int>{0, 0, 0, 1, 0, 1, 0, 1, 0, 0}, 2);
  ok = ok && m2.specificity == 0.8 && m2.sensitivity == 0.4 &&
       m2.icbhi_score == (m2.specificity + m2.sensitivity) / 2;
  // 6 s row of the cycle-length table.
  std::vector<int> t3(20), p3(20);
  for (int i = 0; i < 10; ++i) {
    t3[static_cast<std::size_t>(i)] = 0;
    p3[static_cast<std::size_t>(i)] = i < 9 ? 0 : 2;
    t3[10 + static_cast<std::size_t>(i)] = 1 + i % 3;
    p3[10 + static_cast<std::size_t>(i)] = i < 7 ? 1 + i % 3 : 0;
  }
  const auto m3 = compute_metrics(t3, p3, 4);
  ok = ok && m3.specificity == 0.9 && m3.sensitivity == 0.7 &&
       m3.icbhi_score == (m3.specificity + m3.sensitivity) / 2 && std::abs(m3.icbhi_score - 0.80) < 1e-15;
  return {ok, "hand-counted confusions exact; score == (spec+sen)/2 exactly; (0.90, 0.70) -> " +
                  fmt("%.17g", m3.icbhi_score)};
}

std::pair<bool, std::string> dsp_laws() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2026);
  bool frames_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t len = 1024 + rng() % 400000;
    frames_ok = frames_ok && frame_count(len) == static_cast<int>((len - 1024) / 256) + 1;
  }
  const auto bank = default_bank();
  const auto s = gammatone_spectrogram(std::vector<double>(20000, 0.1), bank);
  frames_ok = frames_ok && s.cols == (20000 - 1024) / 256 + 1;

  std::vector<double> x(44100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * i / 44100.0);
  const auto y = resample(x, 44100, 16000);
  double best_hz = 0.0, best = -1.0;
  for (double hz = 400.0; hz <= 480.0; hz += 0.05) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (y.size() - 1));
      re += w * y[i] * std::cos(2.0 * std::numbers::pi * hz * i / 16000.0);
      im -= w * y[i] * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0);
    }
    if (std::hypot(re, im) > best) {
      best = std::hypot(re, im);
      best_hz = hz;
    }
  }
  const bool peak_ok = std::abs(best_hz - 440.0) <= 2.0;

  auto erb = [](double f) { return 21.4 * std::log10(0.00437 * f + 1.0); };
  bool mono = true;
  double spread = 0.0;
  const double gap0 = erb(bank.center_freqs[1]) - erb(bank.center_freqs[0]);
  for (std::size_t i = 0; i + 1 < bank.center_freqs.size(); ++i) {
    mono = mono && bank.center_freqs[i + 1] > bank.center_freqs[i];
    spread = std::max(spread, std::abs(erb(bank.center_freqs[i + 1]) - erb(bank.center_freqs[i]) - gap0));
  }
  const double secs = seconds_since(t0);
  const bool ok = frames_ok && peak_ok && mono && spread < 1e-6 && secs < 60.0;
  return {ok, std::string("frame law over 1000 lengths ") + (frames_ok ? "holds" : "broken") +
                  "; 440 Hz peak at " + fmt("%.2f Hz", best_hz) + "; ERB spacing spread " +
                  fmt("%.1e", spread) + "; " + fmt("%.1f s", secs) + " (limit 60 s)"};
}

std::pair<bool, std::string> augmentation_laws() {
  std::mt19937_64 rng(5);
  bool dup = true;
  for (int i = 0; i < 500; ++i) {
    const std::size_t len = 1 + rng() % 40000;
    const std::size_t min = 1 + rng() % 100000;
    const std::vector<double> x(len, 0.5);
    const auto y = duplicate_to_min(x, min);
    dup = dup && y.size() >= min && duplicate_to_min(y, min) == y;
  }
  LabeledBatch<double> a, b;
  a.patches = nn::Tensor<double>({6, 4, 8});
  b.patches = nn::Tensor<double>({6, 4, 8});
  std::normal_distribution<double> g;
  for (auto& v : a.patches.values()) v = g(rng);
  for (auto& v : b.patches.values()) v = g(rng);
  const std::vector<int> la = {0, 1, 2, 3, 0, 1}, lb = {3, 3, 1, 0, 2, 2};
  a.targets = one_hot<double>(la, 4);
  b.targets = one_hot<double>(lb, 4);
  const auto m1 = mixup_with_lambdas(a, b, std::vector<double>(6, 1.0));
  const auto m0 = mixup_with_lambdas(a, b, std::vector<double>(6, 0.0));
  const bool ends = m1.patches == a.patches && m1.targets == a.targets && m0.patches == b.patches &&
                    m0.targets == b.targets;
  double simplex = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = mixup(a, b, MixupConfig{0.2, true}, rng);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += m.targets[i * 4 + c];
      simplex = std::max(simplex, std::abs(s - 1.0));
    }
  }
  const bool ok = dup && ends && simplex <= 1e-6;
  return {ok, std::string("duplication ") + (dup ? "meets minimum and is idempotent" : "broken") +
                  "; endpoints " + (ends ? "exact" : "differ") + "; target row-sum deviation " +
                  fmt("%.1e", simplex)};
}

// Desk-scale configuration for the synthetic corpus: reduced layer widths,
// short patches and early stopping once the training set is fitted.
ExperimentConfig desk_config(const SynthSummary& s, ModelKind model) {
  ExperimentConfig c;
  c.task = Task::kTask1_4class;
  c.model = model;
  c.min_cycle_seconds = 1.0;
  c.patch_width = 32;
  c.width_divisor = 4;
  c.gru_hidden = 64;
  c.train.epochs = 200;
  c.train.batch_size = 8;
  c.train.adam.lr = 1e-3;
  c.train.mixup.enabled = false;
  c.train.target_train_accuracy = 1.0;
  c.audio_dir = s.audio_dir.string();
  c.diagnosis_file = s.diagnosis_file.string();
  return c;
}

std::pair<bool, std::string> end_to_end(const SynthSummary& s, const fs::path& work) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (auto kind : {ModelKind::kCnnMoe, ModelKind::kCrnn}) {
    const auto cfg = desk_config(s, kind);
    const auto data = prepare_dataset(cfg, work / "cache");
    const auto cv = run_cv(cfg, data, 1);
    double min_acc = 1.0;
    int max_epochs = 0;
    for (const auto& f : cv.folds) {
      min_acc = std::min(min_acc, f.final_train_accuracy);
      max_epochs = std::max(max_epochs, static_cast<int>(f.history.size()));
    }
    const bool model_ok = min_acc >= 0.95 && max_epochs <= 200 && cv.mean.icbhi_score >= 0.90;
    ok = ok && model_ok;
    detail += std::string(models::to_string(kind)) + ": train acc >= " + fmt("%.3f", min_acc) +
              " by epoch " + std::to_string(max_epochs) + ", 5-fold ICBHI " +
              fmt("%.4f", cv.mean.icbhi_score) + "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 900.0;
  return {ok, detail + fmt("%.0f s", secs) + " (limit 900 s, data " + std::to_string(s.cycles) + " cycles)"};
}

std::pair<bool, std::string> determinism(const SynthSummary& s, const fs::path& work) {
  // Two CLI runs from the same config file into separate roots.
  auto cfg = desk_config(s, ModelKind::kCnnMoe);
  cfg.train.epochs = 5;
  cfg.train.target_train_accuracy = 0.0;
  cfg.train.mixup.enabled = true;
  cfg.cache_dir = (work / "cache").string();
  const auto cfg_path = work / "determinism.cfg";
  {
    std::ofstream out(cfg_path);
    out << serialize_config(cfg);
  }
  std::vector<std::string> reports;
  for (const char* root : {"det-a", "det-b"}) {
    const auto r = run_cli("train --config " + cfg_path.string() + " --out " + (work / root).string());
    if (r.code != 0) return {false, "train exited " + std::to_string(r.code)};
    reports.push_back(read_text(fs::path(line_value(r.out, "run_dir")) / "report.csv"));
  }
  const bool ok = !reports[0].empty() && reports[0] == reports[1];
  return {ok, "report.csv of two runs " + std::string(ok ? "bit-identical" : "differ") + " (" +
                  std::to_string(reports[0].size()) + " bytes, mixup on)"};
}

struct Target {
  Task task;
  ModelKind model;
  double score;
};

void extended(const fs::path& work) {
  const char* dir = std::getenv("RESPDL_ICBHI_AUDIO");
  const char* diag = std::getenv("RESPDL_ICBHI_DIAGNOSIS");
  if (!dir || !diag) {
    std::printf("SKIP extended ICBHI reproduction: set RESPDL_ICBHI_AUDIO and "
                "RESPDL_ICBHI_DIAGNOSIS to run it (hours of CPU time)\n");
    return;
  }
  criterion("extended ICBHI manifest", [&] {
    const auto m = build_manifest(dir, diag, Task::kTask1_4class);
    const bool ok = m.recordings.size() == 920 && m.total_cycles() == 6898;
    return std::pair{ok, std::to_string(m.recordings.size()) + " recordings, " +
                             std::to_string(m.total_cycles()) + " cycles (expected 920, 6898)"};
  });
  const Target targets[] = {{Task::kTask1_4class, ModelKind::kEnsemble, 0.80},
                            {Task::kTask1_2class, ModelKind::kEnsemble, 0.86},
                            {Task::kTask2_3class, ModelKind::kCnnMoe, 0.91},
                            {Task::kTask2_2class, ModelKind::kCnnMoe, 0.92}};
  for (const auto& t : targets) {
    criterion("extended " + std::string(to_string(t.task)), [&] {
      ExperimentConfig c;
      c.task = t.task;
      c.model = t.model;
      c.audio_dir = dir;
      c.diagnosis_file = diag;
      const auto data = prepare_dataset(c, work / "icbhi-cache");
      const auto cv = run_cv(c, data, 1);
      const bool ok = std::abs(cv.mean.icbhi_score - t.score) <= 0.05;
      return std::pair{ok, fmt("5-fold ICBHI %.4f", cv.mean.icbhi_score) + fmt(" vs %.2f +- 0.05", t.score)};
    });
  }
  ExperimentConfig base;
  base.task = Task::kTask1_4class;
  base.model = ModelKind::kCnnMoe;
  base.audio_dir = dir;
  base.diagnosis_file = diag;
  criterion("extended cycle-length sweep shape", [&] {
    const std::vector<double> lengths = {2, 3, 4, 5, 6, 7, 8};
    const auto r = sweep_cycle_length(base, lengths, work / "icbhi-cache", SweepOptions{});
    const double best = r.rows[r.best_index].seconds;
    return std::pair{best >= 5.0 && best <= 7.0, fmt("best cycle length %.0f s (expected 5-7 s)", best)};
  });
  criterion("extended time-resolution sweep shape", [&] {
    const std::vector<int> widths = {32, 64, 96, 128, 160, 192};
    const auto r = sweep_time_resolution(base, widths, work / "icbhi-cache", SweepOptions{});
    const auto best = r.rows[r.best_index].setting;
    const int w = std::stoi(best);
    return std::pair{w >= 96 && w <= 160, "best width " + best + " frames (expected 96-160)"};
  });
}

}  // namespace

int main() {
  log::set_level(log::Level::kError);
  const fs::path work = fs::temp_directory_path() / ("respdl-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(work);

  criterion("gradient correctness", gradients);
  criterion("shape conformance", shapes);
  criterion("MoE output semantics", eq1);
  criterion("loss semantics", eq2);
  criterion("ensemble fusion semantics", eq3);
  criterion("metric oracle", metric_oracle);
  criterion("DSP laws", dsp_laws);
  criterion("augmentation laws", augmentation_laws);

  SynthOptions so;
  so.n = 40;
  so.classes = 4;
  const auto synth = write_synth_dataset(work / "synth", so);
  criterion("end-to-end overfit and 5-fold CV on synth", [&] { return end_to_end(synth, work); });
  criterion("determinism", [&] { return determinism(synth, work); });
  extended(work);

  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
