// Copyright 2026 The nestterm Authors.
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

#pragma once

// Run directories and manifests for experiment presets.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "nestterm/experiment.hpp"

namespace nestterm {

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<size_t>(i)] = digits[v & 0xF];
  return s;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

struct RunRequest {
  std::string preset;
  uint64_t seed = 0;
  std::filesystem::path train;
  std::filesystem::path dev;
  ExperimentConfig config;
  std::filesystem::path run_dir;
  LoadOptions load;
};

/// `<root>/<preset>-<UTC timestamp>`, with a numeric suffix on collision.
inline std::filesystem::path timestamped_run_dir(const std::filesystem::path& root, const std::string& preset) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  std::filesystem::path dir = root / (preset + "-" + stamp);
  for (int i = 1; std::filesystem::exists(dir); ++i) dir = root / (preset + "-" + stamp + "-" + std::to_string(i));
  return dir;
}

namespace detail {

inline std::string jsonl(const std::vector<nlohmann::ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

inline std::string corpus_text(const Corpus& c) {
  std::ostringstream buf;
  write_corpus(c, buf);
  return buf.str();
}

}  // namespace detail

/// Runs a preset and writes corpora, reports and manifest.json into
/// `req.run_dir`. Returns the manifest.
inline nlohmann::ordered_json run_and_record(const RunRequest& req) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const Preset& preset = find_preset(req.preset);
  Corpus train, dev;
  try {
    train = load_corpus(req.train, req.load);
  } catch (const std::exception& e) {
    throw Error(std::string("stage load-train: ") + e.what());
  }
  try {
    dev = load_corpus(req.dev, req.load);
  } catch (const std::exception& e) {
    throw Error(std::string("stage load-dev: ") + e.what());
  }
  ExperimentResult r = run_experiment(preset, train, dev, req.config, req.seed);

  fs::create_directories(req.run_dir);
  nlohmann::ordered_json outputs;
  auto emit = [&](const std::string& key, const std::string& name, const std::string& content) {
    write_file_atomic(req.run_dir / name, content);
    outputs[key] = name;
  };
  emit("training_corpus", "training_corpus.jsonl", detail::corpus_text(r.training));
  emit("predictions", "predictions.jsonl", detail::corpus_text(r.predictions));
  if (preset.inclusions != InclusionMode::none) {
    std::vector<nlohmann::ordered_json> rows;
    for (const auto& h : r.inclusion_hits) rows.push_back(to_json(h));
    emit("inclusion_hits", "inclusion_hits.jsonl", detail::jsonl(rows));
  }
  if (preset.damage) {
    std::vector<nlohmann::ordered_json> rows;
    for (const auto& d : r.damage_records) rows.push_back(to_json(d));
    emit("damage_records", "damage_records.jsonl", detail::jsonl(rows));
  }
  nlohmann::ordered_json rep;
  rep["preset"] = preset.name;
  rep["reports"] = nlohmann::ordered_json::array();
  for (const auto& x : r.reports) rep["reports"].push_back(to_json(x));
  emit("report_json", "report.json", rep.dump(2) + "\n");
  emit("report_text", "report.txt", render_text(r.reports));

  nlohmann::ordered_json m;
  m["tool"] = "nestterm";
  m["tool_version"] = kToolVersion;
  m["preset"] = preset.name;
  m["seed"] = req.seed;
  m["stage_seeds"] = {{"damage-cv", r.seeds.damage_cv}, {"train", r.seeds.train}};
  m["inputs"] = {
      {"train", {{"path", fs::absolute(req.train).string()}, {"fnv1a64", file_hash(req.train)}}},
      {"dev", {{"path", fs::absolute(req.dev).string()}, {"fnv1a64", file_hash(req.dev)}}},
  };
  m["lenient"] = !req.load.strict;
  m["config"] = to_json(req.config);
  m["lemma_table"] = req.config.lemma_table.to_text();
  m["counts"] = {{"inclusion_hits", r.inclusion_hits.size()},
                 {"inclusions_added", r.inclusions_added},
                 {"damage_records", r.damage_records.size()},
                 {"damage_added", r.damage_added},
                 {"rejected", r.rejected}};
  m["outputs"] = outputs;
  m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(req.run_dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

/// Rebuilds the request recorded in a manifest. Inputs must still hash to
/// the recorded values.
inline RunRequest request_from_manifest(const nlohmann::json& m, const std::filesystem::path& run_dir) {
  RunRequest req;
  try {
    if (m.at("tool").get<std::string>() != "nestterm") throw Error("not a nestterm manifest");
    req.preset = m.at("preset").get<std::string>();
    req.seed = m.at("seed").get<uint64_t>();
    req.train = m.at("inputs").at("train").at("path").get<std::string>();
    req.dev = m.at("inputs").at("dev").at("path").get<std::string>();
    req.load.strict = !m.value("lenient", false);
    std::istringstream table(m.at("lemma_table").get<std::string>());
    ExperimentConfig base;
    base.lemma_table = LemmaTable::parse(table);
    req.config = experiment_config_from_json(m.at("config"), base);
    for (const char* key : {"train", "dev"}) {
      const auto& in = m.at("inputs").at(key);
      const std::string recorded = in.at("fnv1a64").get<std::string>();
      const std::string path = in.at("path").get<std::string>();
      if (file_hash(path) != recorded) throw Error(std::string("input '") + key + "' changed since the manifest was written: " + path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  find_preset(req.preset);
  req.run_dir = run_dir;
  return req;
}

}  // namespace nestterm
