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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "respdl/audio.hpp"
#include "respdl/errors.hpp"
#include "respdl/ingest.hpp"
#include "unit/test_util.hpp"

using namespace respdl;
using respdl::testing::TempDir;
using respdl::testing::write_text;

TEST_CASE("annotation flags map to the four classes") {
  CHECK(parse_annotation("0.0 2.5 0 0").at(0).class4() == Class4::kNormal);
  CHECK(parse_annotation("0.0 2.5 1 0").at(0).class4() == Class4::kCrackle);
  CHECK(parse_annotation("0.0 2.5 0 1").at(0).class4() == Class4::kWheeze);
  CHECK(parse_annotation("0.0 2.5 1 1").at(0).class4() == Class4::kBoth);
  for (auto c : {Class4::kNormal, Class4::kCrackle, Class4::kWheeze, Class4::kBoth}) {
    CHECK((to_class2(c) == Class2::kAnomaly) == (c != Class4::kNormal));
  }
}

TEST_CASE("annotation fixture with one cycle of each class") {
  const auto labels = parse_annotation(respdl::testing::read_text(respdl::testing::fixture("annotation_ncwb.txt")));
  REQUIRE(labels.size() == 4);
  std::map<Class4, int> counts;
  for (const auto& l : labels) ++counts[l.class4()];
  for (auto c : {Class4::kNormal, Class4::kCrackle, Class4::kWheeze, Class4::kBoth}) CHECK(counts[c] == 1);
  CHECK(labels[0].class4() == Class4::kNormal);
  CHECK(labels[3].class4() == Class4::kBoth);
  CHECK(labels[2].offset == 5.25);
}

TEST_CASE("annotation is sorted by onset and tolerates blank lines") {
  const auto labels = parse_annotation("3.0 4.0 0 1\n\n1.0\t2.0\t1\t0\r\n");
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].onset == 1.0);
  CHECK(labels[1].onset == 3.0);
}

TEST_CASE("annotation errors carry the line number") {
  auto line_of = [](const std::string& text) {
    try {
      parse_annotation(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("0 1 0 0\nabc 2 0 0\n") == 2);
  CHECK(line_of("0 1 0 0\n1 2 0 0\n3 2 0 0\n") == 3);
  CHECK(line_of("0 1 2 0\n") == 1);
  CHECK(line_of("0 1 0\n") == 1);
  CHECK(line_of("1 1 0 0\n") == 1);
}

TEST_CASE("extract_cycles index arithmetic and clipping") {
  AudioRecording rec;
  rec.sample_rate = 16000;
  rec.samples.resize(160000);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) rec.samples[i] = static_cast<double>(i) / 1e6;
  rec.recording_id = "101_1b1_Al_sc_Meditron";
  rec.patient_id = "101";

  const std::vector<CycleLabel> labels = {{2.0, 4.5, false, false},
                                          {9.5, 12.0, true, false},
                                          {10.0, 11.0, false, true}};
  const auto ex = extract_cycles(rec, labels);
  REQUIRE(ex.cycles.size() == 2);
  CHECK(ex.cycles[0].samples.size() == 40000);
  CHECK(ex.cycles[0].samples.front() == rec.samples[32000]);
  CHECK(ex.cycles[1].samples.size() == 8000);
  CHECK(ex.cycles[1].class4 == Class4::kCrackle);
  CHECK(ex.cycles[0].cycle_id == "101_1b1_Al_sc_Meditron:0");
  CHECK(ex.cycles[1].patient_id == "101");
  REQUIRE(ex.warnings.size() == 2);
  CHECK(ex.warnings[0].label_index == 1);  // clipped
  CHECK(ex.warnings[1].label_index == 2);  // skipped

  rec.sample_rate = 8000;
  CHECK_THROWS_AS(extract_cycles(rec, labels), ParameterError);
}

TEST_CASE("extracted durations match the labels within one sample") {
  AudioRecording rec;
  rec.sample_rate = 16000;
  rec.samples.assign(16000 * 8, 0.1);
  rec.recording_id = "r";
  const auto labels = parse_annotation(respdl::testing::read_text(respdl::testing::fixture("annotation_ncwb.txt")));
  const auto ex = extract_cycles(rec, labels);
  REQUIRE(ex.cycles.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const double want = (labels[i].offset - labels[i].onset) * 16000;
    CHECK(std::abs(static_cast<double>(ex.cycles[i].samples.size()) - want) <= 1.0);
    CHECK(ex.cycles[i].class4 == labels[i].class4());
  }
}

namespace {

void write_recording(const std::filesystem::path& dir, const std::string& stem,
                     const std::string& annotation) {
  const std::vector<double> x(4000, 0.0);
  write_wav(dir / (stem + ".wav"), x, 1, 4000);
  if (!annotation.empty()) write_text(dir / (stem + ".txt"), annotation);
}

}  // namespace

TEST_CASE("build_manifest counts, task labels and rejects") {
  TempDir tmp;
  const auto audio = tmp / "audio";
  std::filesystem::create_directories(audio);
  write_recording(audio, "101_1b1_Al_sc_X", "0 0.2 0 0\n0.2 0.5 1 0\n");
  write_recording(audio, "102_1b1_Al_sc_X", "0 0.5 0 1\n0.5 0.9 1 1\n");
  write_recording(audio, "103_1b1_Al_sc_X", "");          // no annotation
  write_recording(audio, "999_1b1_Al_sc_X", "0 1 0 0\n");  // unknown patient
  write_text(tmp / "diag.txt", "101,Healthy\n102\tCOPD\n103 URTI\n");

  const auto m = build_manifest(audio, tmp / "diag.txt", Task::kTask1_4class);
  REQUIRE(m.recordings.size() == 2);
  CHECK(m.recordings[0].recording_id == "101_1b1_Al_sc_X");
  CHECK(m.recordings[1].diagnosis == Diagnosis::kCOPD);
  CHECK(m.cycle_counts == std::array<std::size_t, 4>{1, 1, 1, 1});
  CHECK(m.total_cycles() == 4);
  REQUIRE(m.rejects.size() == 2);
  std::set<std::string> reasons;
  for (const auto& r : m.rejects) reasons.insert(r.reason);
  CHECK(reasons.count("missing annotation file") == 1);

  // Task 2 labels follow the diagnosis grouping.
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kCOPD) == 1);
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kAsthma) == 1);
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kBronchiectasis) == 1);
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kURTI) == 2);
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kPneumonia) == 2);
  CHECK(recording_class(Task::kTask2_3class, Diagnosis::kHealthy) == 0);
  CHECK(recording_class(Task::kTask2_2class, Diagnosis::kLRTI) == 1);
  CHECK(cycle_class(Task::kTask1_2class, Class4::kBoth) == 1);
  CHECK(cycle_class(Task::kTask1_4class, Class4::kWheeze) == 2);

  const auto m2 = build_manifest(audio, tmp / "diag.txt", Task::kTask2_3class);
  const auto ents = enumerate_entities(m2);
  REQUIRE(ents.size() == 2);
  CHECK(ents[1].label == 1);

  SUBCASE("manifest round trip") {
    CHECK(parse_manifest(serialize_manifest(m)) == m);
    save_manifest(m, tmp / "manifest.csv");
    CHECK(load_manifest(tmp / "manifest.csv") == m);
  }
  SUBCASE("rejects sidecar lists every reject") {
    save_rejects(m, tmp / "rejects.csv");
    const auto text = respdl::testing::read_text(tmp / "rejects.csv");
    CHECK(text.find("103_1b1_Al_sc_X.wav") != std::string::npos);
    CHECK(text.find("999_1b1_Al_sc_X.wav") != std::string::npos);
  }
}

TEST_CASE("empty directory gives an empty manifest") {
  TempDir tmp;
  write_text(tmp / "diag.txt", "");
  const auto m = build_manifest(tmp.path(), tmp / "diag.txt", Task::kTask1_4class);
  CHECK(m.recordings.empty());
  CHECK(m.total_cycles() == 0);
  CHECK(m.rejects.empty());
  CHECK_THROWS_AS(build_manifest(tmp / "missing", tmp / "diag.txt", Task::kTask1_4class), FormatError);
}

namespace {

std::vector<Entity> entities_with_counts(const std::vector<int>& counts, int patients = 0) {
  std::vector<Entity> out;
  int n = 0;
  for (std::size_t label = 0; label < counts.size(); ++label) {
    for (int i = 0; i < counts[label]; ++i, ++n) {
      Entity e;
      e.id = "e" + std::to_string(n);
      e.label = static_cast<int>(label);
      e.patient_id = patients > 0 ? "p" + std::to_string(n % patients) : "p" + std::to_string(n);
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("two classes of five over five folds: one of each per fold") {
  const auto ents = entities_with_counts({5, 5});
  const auto f = make_folds(ents, 5, 3);
  for (int k = 0; k < 5; ++k) {
    std::map<int, int> per;
    for (const auto& e : ents) {
      if (f.fold_of.at(e.id) == k) ++per[e.label];
    }
    CHECK(per[0] == 1);
    CHECK(per[1] == 1);
  }
  CHECK(make_folds(ents, 5, 3) == f);
}

TEST_CASE("folds over the published cycle counts") {
  // Crackle, Wheeze, Both, Normal as class indices 1..3, 0.
  const auto ents = entities_with_counts({3642, 1864, 886, 506});
  REQUIRE(ents.size() == 6898);
  const auto f = make_folds(ents, 5, 1);
  std::vector<int> sizes(5, 0);
  std::vector<std::map<int, int>> per(5);
  for (const auto& e : ents) {
    const int k = f.fold_of.at(e.id);
    ++sizes[static_cast<std::size_t>(k)];
    ++per[static_cast<std::size_t>(k)][e.label];
  }
  int total = 0;
  for (int s : sizes) {
    total += s;
    CHECK(std::abs(s - 6898.0 / 5) <= 1.0);
  }
  CHECK(total == 6898);
  CHECK(f.fold_of.size() == 6898);  // each id in exactly one fold
  const std::vector<int> counts = {3642, 1864, 886, 506};
  for (int k = 0; k < 5; ++k) {
    for (int c = 0; c < 4; ++c) {
      CHECK(std::abs(per[static_cast<std::size_t>(k)][c] - counts[static_cast<std::size_t>(c)] / 5.0) <= 1.0);
    }
  }
}

TEST_CASE("fold assignment depends on the seed only") {
  const auto ents = entities_with_counts({12, 9, 7});
  CHECK(make_folds(ents, 5, 11) == make_folds(ents, 5, 11));
  CHECK_FALSE(make_folds(ents, 5, 11) == make_folds(ents, 5, 12));
  auto shuffled = ents;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(make_folds(shuffled, 5, 11) == make_folds(ents, 5, 11));
}

TEST_CASE("fold errors") {
  CHECK_THROWS_AS(make_folds(entities_with_counts({5, 4}), 5, 1), StratificationError);
  CHECK_THROWS_AS(make_folds(entities_with_counts({5, 5}), 1, 1), ParameterError);
}

TEST_CASE("patient-independent folds keep patients together") {
  const auto ents = entities_with_counts({40, 40, 40}, 30);
  const auto f = make_folds(ents, 5, 2, FoldOptions{true});
  std::map<std::string, std::set<int>> folds_of_patient;
  for (const auto& e : ents) folds_of_patient[e.patient_id].insert(f.fold_of.at(e.id));
  for (const auto& [p, s] : folds_of_patient) CHECK(s.size() == 1);
}

TEST_CASE("folds csv round trip") {
  const auto f = make_folds(entities_with_counts({6, 6}), 3, 9);
  const auto text = serialize_folds(f);
  CHECK(text.rfind("entity_id,fold_index\n", 0) == 0);
  CHECK(parse_folds(text) == f);
}

TEST_CASE("task names") {
  for (auto t : {Task::kTask1_4class, Task::kTask1_2class, Task::kTask2_3class, Task::kTask2_2class}) {
    CHECK(parse_task(to_string(t)) == t);
    CHECK(class_names(t).size() == static_cast<std::size_t>(num_classes(t)));
  }
  CHECK(num_classes(Task::kTask2_3class) == 3);
  CHECK(is_cycle_task(Task::kTask1_2class));
  CHECK_FALSE(is_cycle_task(Task::kTask2_2class));
  CHECK_THROWS_AS(parse_task("task3"), ParameterError);
}
