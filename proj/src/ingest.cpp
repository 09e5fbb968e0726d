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

#include "respdl/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "respdl/errors.hpp"
#include "util.hpp"

namespace respdl {

namespace fs = std::filesystem;
using detail::format_double;

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kTask1_4class: return "task1_4class";
    case Task::kTask1_2class: return "task1_2class";
    case Task::kTask2_3class: return "task2_3class";
    case Task::kTask2_2class: return "task2_2class";
  }
  return "task1_4class";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::kTask1_4class, Task::kTask1_2class, Task::kTask2_3class,
                 Task::kTask2_2class}) {
    if (to_string(t) == name) return t;
  }
  throw ParameterError("unknown task '" + std::string(name) +
                       "' (expected task1_4class, task1_2class, task2_3class, "
                       "task2_2class)");
}

int num_classes(Task t) {
  switch (t) {
    case Task::kTask1_4class: return 4;
    case Task::kTask1_2class: return 2;
    case Task::kTask2_3class: return 3;
    case Task::kTask2_2class: return 2;
  }
  return 0;
}

bool is_cycle_task(Task t) {
  return t == Task::kTask1_4class || t == Task::kTask1_2class;
}

std::vector<std::string> class_names(Task t) {
  switch (t) {
    case Task::kTask1_4class: return {"Normal", "Crackle", "Wheeze", "Both"};
    case Task::kTask1_2class: return {"Normal", "Anomaly"};
    case Task::kTask2_3class: return {"Healthy", "Chronic", "NonChronic"};
    case Task::kTask2_2class: return {"Healthy", "Unhealthy"};
  }
  return {};
}

int cycle_class(Task t, Class4 c) {
  switch (t) {
    case Task::kTask1_4class: return static_cast<int>(c);
    case Task::kTask1_2class: return static_cast<int>(to_class2(c));
    default: throw ParameterError("cycle_class called for a recording task");
  }
}

int recording_class(Task t, Diagnosis d) {
  const bool healthy = d == Diagnosis::kHealthy;
  const bool chronic = d == Diagnosis::kCOPD ||
                       d == Diagnosis::kBronchiectasis ||
                       d == Diagnosis::kAsthma;
  switch (t) {
    case Task::kTask2_3class: return healthy ? 0 : (chronic ? 1 : 2);
    case Task::kTask2_2class: return healthy ? 0 : 1;
    default: throw ParameterError("recording_class called for a cycle task");
  }
}

std::vector<CycleLabel> parse_annotation(std::string_view text) {
  std::vector<CycleLabel> out;
  int line_no = 0;
  for (auto line : detail::lines(text)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 4) {
      throw ParseError("expected 4 columns, got " + std::to_string(fields.size()),
                       line_no);
    }
    const auto onset = detail::parse_double(fields[0]);
    const auto offset = detail::parse_double(fields[1]);
    if (!onset || !offset) throw ParseError("non-numeric time field", line_no);
    if (!std::isfinite(*onset) || !std::isfinite(*offset) || *onset < 0.0) {
      throw ParseError("invalid onset/offset", line_no);
    }
    if (*offset <= *onset) throw ParseError("offset <= onset", line_no);
    const auto crackle = detail::parse_int(fields[2]);
    const auto wheeze = detail::parse_int(fields[3]);
    if (!crackle || !wheeze) throw ParseError("non-numeric flag field", line_no);
    if ((*crackle != 0 && *crackle != 1) || (*wheeze != 0 && *wheeze != 1)) {
      throw ParseError("flag must be 0 or 1", line_no);
    }
    out.push_back({*onset, *offset, *crackle == 1, *wheeze == 1});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CycleLabel& a, const CycleLabel& b) {
                     return a.onset < b.onset;
                   });
  return out;
}

std::string cycle_id(const std::string& recording_id, std::size_t index) {
  return recording_id + ":" + std::to_string(index);
}

CycleExtraction extract_cycles(const AudioRecording& recording,
                               std::span<const CycleLabel> labels) {
  if (recording.sample_rate != kTargetRate) {
    throw ParameterError("extract_cycles expects 16 kHz audio, got " +
                         std::to_string(recording.sample_rate));
  }
  CycleExtraction out;
  const auto n = static_cast<long long>(recording.samples.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    const long long begin = std::llround(l.onset * kTargetRate);
    long long end = std::llround(l.offset * kTargetRate);
    if (begin >= n) {
      out.warnings.push_back({recording.recording_id, i,
                              "onset beyond end of audio; cycle skipped"});
      continue;
    }
    if (end > n) {
      out.warnings.push_back({recording.recording_id, i,
                              "offset beyond end of audio; clipped"});
      end = n;
    }
    if (end <= begin) {
      out.warnings.push_back({recording.recording_id, i,
                              "empty cycle after rounding; skipped"});
      continue;
    }
    RespiratoryCycle c;
    c.cycle_id = cycle_id(recording.recording_id, i);
    c.samples.assign(recording.samples.begin() + begin,
                     recording.samples.begin() + end);
    c.class4 = l.class4();
    c.recording_id = recording.recording_id;
    c.patient_id = recording.patient_id;
    out.cycles.push_back(std::move(c));
  }
  return out;
}

std::size_t DatasetManifest::total_cycles() const {
  std::size_t n = 0;
  for (auto c : cycle_counts) n += c;
  return n;
}

std::map<std::string, Diagnosis> parse_diagnosis_file(std::string_view text) {
  std::map<std::string, Diagnosis> out;
  int line_no = 0;
  for (auto raw : detail::lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::string normalized(line);
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    const auto fields = detail::split_ws(normalized);
    if (fields.size() != 2) throw ParseError("expected 'patient_id,diagnosis'", line_no);
    const auto d = parse_diagnosis(fields[1]);
    if (!d) throw ParseError("unknown diagnosis '" + std::string(fields[1]) + "'", line_no);
    out[std::string(fields[0])] = *d;
  }
  return out;
}

DatasetManifest build_manifest(const fs::path& audio_dir,
                               const fs::path& diagnosis_file, Task task) {
  DatasetManifest m;
  m.task = task;
  std::map<std::string, Diagnosis> diagnoses;
  if (!diagnosis_file.empty()) {
    diagnoses = parse_diagnosis_file(detail::read_text(diagnosis_file));
  }
  if (!fs::exists(audio_dir)) {
    throw FormatError("audio directory does not exist: " + audio_dir.string());
  }
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(audio_dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav") wavs.push_back(e.path());
  }
  // Visit order must not affect the result.
  std::sort(wavs.begin(), wavs.end());

  for (const auto& wav : wavs) {
    auto ann = wav;
    ann.replace_extension(".txt");
    const std::string stem = wav.stem().string();
    const auto us = stem.find('_');
    const std::string patient = us == std::string::npos ? stem : stem.substr(0, us);
    if (!fs::exists(ann)) {
      m.rejects.push_back({wav.string(), "missing annotation file"});
      continue;
    }
    const auto dit = diagnoses.find(patient);
    if (dit == diagnoses.end()) {
      m.rejects.push_back({wav.string(), "patient " + patient + " missing from diagnosis file"});
      continue;
    }
    ManifestEntry e;
    try {
      e.labels = parse_annotation(detail::read_text(ann));
    } catch (const ParseError& err) {
      m.rejects.push_back({ann.string(), std::string("annotation parse error: ") + err.what()});
      continue;
    }
    e.recording_id = stem;
    e.patient_id = patient;
    e.diagnosis = dit->second;
    e.wav_path = wav.string();
    for (const auto& l : e.labels) ++m.cycle_counts[static_cast<int>(l.class4())];
    m.recordings.push_back(std::move(e));
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << "#task=" << to_string(m.task) << "\n";
  out << "#recording_id,patient_id,diagnosis,cycle_count,wav_path,labels\n";
  for (const auto& r : m.recordings) {
    out << r.recording_id << ',' << r.patient_id << ',' << to_string(r.diagnosis)
        << ',' << r.labels.size() << ',' << r.wav_path << ',';
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const auto& l = r.labels[i];
      if (i) out << ';';
      out << format_double(l.onset) << ':' << format_double(l.offset) << ':'
          << (l.crackle ? 1 : 0) << ':' << (l.wheeze ? 1 : 0);
    }
    out << '\n';
  }
  for (const auto& rj : m.rejects) {
    out << "#reject," << rj.path << ',' << rj.reason << '\n';
  }
  return out.str();
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  int line_no = 0;
  for (auto line : detail::lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.starts_with("#task=")) {
      m.task = parse_task(detail::trim(line.substr(6)));
      continue;
    }
    if (line.starts_with("#reject,")) {
      auto rest = line.substr(8);
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos) throw ParseError("bad reject record", line_no);
      m.rejects.push_back({std::string(rest.substr(0, comma)),
                           std::string(rest.substr(comma + 1))});
      continue;
    }
    if (line.front() == '#') continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 6) throw ParseError("expected 6 fields", line_no);
    ManifestEntry e;
    e.recording_id = std::string(f[0]);
    e.patient_id = std::string(f[1]);
    const auto d = parse_diagnosis(f[2]);
    if (!d) throw ParseError("unknown diagnosis", line_no);
    e.diagnosis = *d;
    const auto count = detail::parse_int(f[3]);
    if (!count || *count < 0) throw ParseError("bad cycle count", line_no);
    e.wav_path = std::string(f[4]);
    if (!f[5].empty()) {
      for (auto rec : detail::split(f[5], ';')) {
        const auto p = detail::split(rec, ':');
        if (p.size() != 4) throw ParseError("bad label record", line_no);
        const auto on = detail::parse_double(p[0]);
        const auto off = detail::parse_double(p[1]);
        if (!on || !off) throw ParseError("bad label time", line_no);
        e.labels.push_back({*on, *off, p[2] == "1", p[3] == "1"});
      }
    }
    if (static_cast<std::size_t>(*count) != e.labels.size()) {
      throw ParseError("cycle count does not match labels", line_no);
    }
    for (const auto& l : e.labels) ++m.cycle_counts[static_cast<int>(l.class4())];
    m.recordings.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  detail::write_atomic(path, serialize_manifest(m));
}

DatasetManifest load_manifest(const fs::path& path) {
  return parse_manifest(detail::read_text(path));
}

void save_rejects(const DatasetManifest& m, const fs::path& path) {
  std::ostringstream out;
  out << "path,reason\n";
  for (const auto& r : m.rejects) out << r.path << ',' << r.reason << '\n';
  detail::write_atomic(path, out.str());
}

std::vector<Entity> enumerate_entities(const DatasetManifest& m) {
  std::vector<Entity> out;
  for (const auto& r : m.recordings) {
    if (is_cycle_task(m.task)) {
      for (std::size_t i = 0; i < r.labels.size(); ++i) {
        out.push_back({cycle_id(r.recording_id, i), r.recording_id, r.patient_id,
                       cycle_class(m.task, r.labels[i].class4()), i});
      }
    } else {
      out.push_back({r.recording_id, r.recording_id, r.patient_id,
                     recording_class(m.task, r.diagnosis), 0});
    }
  }
  return out;
}

}  // namespace respdl
