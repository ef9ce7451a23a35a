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

// End-to-end experiment presets: pseudo-label the training corpus, train the
// tagger on the result and score it on a nested dev corpus.

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"
#include "nestterm/damage_cv.hpp"
#include "nestterm/eval.hpp"
#include "nestterm/pseudolabel.hpp"
#include "nestterm/span_algebra.hpp"
#include "nestterm/tagger.hpp"

namespace nestterm {

inline constexpr const char* kToolVersion = "0.1.0";

enum class InclusionMode { none, surface, lemma };

struct Preset {
  std::string name;
  bool nested_gold = false;
  InclusionMode inclusions = InclusionMode::none;
  std::optional<DamageMode> damage;
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"pure-flat", false, InclusionMode::none, std::nullopt},
      {"inclusions", false, InclusionMode::surface, std::nullopt},
      {"lemm-inclusions", false, InclusionMode::lemma, std::nullopt},
      {"early-damage", false, InclusionMode::none, DamageMode::early},
      {"late-damage", false, InclusionMode::none, DamageMode::late},
      {"lemm-inc+early-dmg", false, InclusionMode::lemma, DamageMode::early},
      {"lemm-inc+late-dmg", false, InclusionMode::lemma, DamageMode::late},
      {"full", true, InclusionMode::none, std::nullopt},
  };
  return all;
}

inline const Preset& find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw Error("unknown preset '" + std::string(name) + "'");
}

struct ExperimentConfig {
  TaggerSpec tagger;
  size_t k = 5;
  size_t min_word_len = 3;
  ReplacementPolicy policy = ReplacementPolicy::same_length;
  LemmaTable lemma_table = LemmaTable::default_russian();
  std::optional<std::map<TermClass, double>> weights;
};

/// {"tagger": {...}, "damage_cv": {"k", "min_word_len", "policy"},
///  "weights": {...}}. The lemma table is supplied separately.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  for (const auto& [key, v] : j.items()) {
    if (key == "tagger") {
      c.tagger = tagger_spec_from_json(v);
    } else if (key == "damage_cv") {
      for (const auto& [dk, dv] : v.items()) {
        if (dk == "k") c.k = dv.get<size_t>();
        else if (dk == "min_word_len") c.min_word_len = dv.get<size_t>();
        else if (dk == "policy") c.policy = parse_replacement_policy(dv.get<std::string>());
        else throw Error("unknown damage_cv key '" + dk + "'");
      }
    } else if (key == "weights") {
      c.weights = weights_from_json(v);
    } else if (key == "training") {
      // Reference hyperparameters of the full-scale encoder; the toy tagger
      // ignores them.
    } else {
      throw Error("unknown config key '" + key + "'");
    }
  }
  if (c.k < 2) throw Error("damage_cv.k must be at least 2");
  if (c.min_word_len < 1) throw Error("damage_cv.min_word_len must be positive");
  return c;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["tagger"] = to_json(c.tagger);
  j["damage_cv"] = {{"k", c.k}, {"min_word_len", c.min_word_len}, {"policy", std::string(to_string(c.policy))}};
  if (c.weights) {
    nlohmann::ordered_json w = nlohmann::ordered_json::object();
    for (const auto& [cls, v] : *c.weights) w[std::string(to_string(cls))] = v;
    j["weights"] = w;
  }
  return j;
}

struct StageSeeds {
  uint64_t damage_cv = 0;
  uint64_t train = 0;
};

inline StageSeeds stage_seeds(uint64_t root) { return {derive_seed(root, "damage-cv"), derive_seed(root, "train")}; }

struct ExperimentResult {
  std::string preset;
  uint64_t seed = 0;
  StageSeeds seeds;
  Corpus training;  // gold or flat corpus plus merged pseudo-labels
  std::vector<InclusionHit> inclusion_hits;
  std::vector<DamageRecord> damage_records;
  size_t inclusions_added = 0;
  size_t damage_added = 0;
  size_t rejected = 0;
  Corpus predictions;  // dev documents with predicted entities
  std::vector<EvalReport> reports;
};

inline const EvalReport& find_report(const ExperimentResult& r, Partition p, bool class_aware = true) {
  for (const auto& rep : r.reports) {
    if (rep.partition == p && rep.class_aware == class_aware) return rep;
  }
  throw Error("no report for partition " + std::string(to_string(p)));
}

/// Builds the training corpus for a preset without training the final model.
inline ExperimentResult build_training_corpus(const Preset& preset, const Corpus& train_gold,
                                              const ExperimentConfig& cfg, uint64_t seed) {
  ExperimentResult r;
  r.preset = preset.name;
  r.seed = seed;
  r.seeds = stage_seeds(seed);
  for (const auto& d : train_gold) {
    if (auto v = validate_nesting(d); !v.empty()) throw Error("document '" + d.id + "': " + v.front().message());
  }
  if (preset.nested_gold) {
    r.training = train_gold;
    return r;
  }
  const Corpus flat = flatten(train_gold);
  r.training = flat;
  if (preset.inclusions != InclusionMode::none) {
    r.inclusion_hits = preset.inclusions == InclusionMode::surface ? find_inclusions(flat)
                                                                   : find_lemmatized_inclusions(flat, cfg.lemma_table);
    auto merged = merge_pseudo(r.training, to_candidates(r.inclusion_hits));
    r.training = std::move(merged.corpus);
    r.inclusions_added = merged.added;
    r.rejected += merged.rejected.size();
  }
  if (preset.damage) {
    CrossPredictionOptions opts;
    opts.k = cfg.k;
    opts.mode = *preset.damage;
    opts.seed = r.seeds.damage_cv;
    opts.min_word_len = cfg.min_word_len;
    opts.policy = cfg.policy;
    auto cv = run_cross_prediction(flat, opts, make_trainer(cfg.tagger));
    r.damage_records = std::move(cv.records);
    auto merged = harvest_and_merge(r.training, cv.predictions);
    r.training = std::move(merged.corpus);
    r.damage_added = merged.added;
    r.rejected += merged.rejected.size();
  }
  return r;
}

inline std::vector<EvalReport> standard_reports(const Corpus& gold, const Corpus& pred,
                                                const std::optional<std::map<TermClass, double>>& weights) {
  std::vector<EvalReport> out;
  for (bool aware : {true, false}) {
    for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
      ReportOptions o;
      o.class_aware = aware;
      o.partition = p;
      if (aware) o.weights = weights;
      out.push_back(report(gold, pred, o));
    }
  }
  return out;
}

inline Corpus predict_corpus(const Predictor& predictor, const Corpus& docs) {
  Corpus out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    Document bare{d.id, d.text, {}};
    bare.entities = predictor(bare);
    out.push_back(std::move(bare));
  }
  return out;
}

inline ExperimentResult run_experiment(const Preset& preset, const Corpus& train_gold, const Corpus& dev_gold,
                                       const ExperimentConfig& cfg, uint64_t seed) {
  ExperimentResult r = build_training_corpus(preset, train_gold, cfg, seed);
  Predictor predictor = make_trainer(cfg.tagger)(r.training, r.seeds.train);
  r.predictions = predict_corpus(predictor, dev_gold);
  r.reports = standard_reports(dev_gold, r.predictions, cfg.weights);
  return r;
}

}  // namespace nestterm
