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

// Span taggers behind one train/predict interface: the surface gazetteer
// baseline and the contrastive bi-encoder.

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nestterm/biencoder.hpp"
#include "nestterm/corpus.hpp"

namespace nestterm {

struct GazetteerIndex {
  std::map<std::string, std::set<TermClass>> surfaces;
  size_t max_tokens = 0;
};

inline GazetteerIndex gazetteer_train(const Corpus& corpus) {
  GazetteerIndex idx;
  for (const auto& d : corpus) {
    const auto cps = utf8::decode(d.text);
    const auto tokens = tokenize(std::u32string_view(cps));
    for (const auto& e : d.entities) {
      auto r = token_range(tokens, e);
      if (!r) continue;
      idx.surfaces[surface(e, cps)].insert(e.cls);
      idx.max_tokens = std::max(idx.max_tokens, r->second - r->first + 1);
    }
  }
  return idx;
}

/// Every token-aligned occurrence of an indexed surface, once per class. The
/// output may contain crossing spans; callers merge it conflict-safely.
inline std::vector<Entity> gazetteer_predict(const GazetteerIndex& idx, const Document& doc) {
  std::vector<Entity> out;
  if (idx.surfaces.empty()) return out;
  const auto cps = utf8::decode(doc.text);
  const auto tokens = tokenize(std::u32string_view(cps));
  for (size_t a = 0; a < tokens.size(); ++a) {
    for (size_t b = a; b < tokens.size() && b - a < idx.max_tokens; ++b) {
      const int64_t s = tokens[a].start, t = tokens[b].end;
      auto it = idx.surfaces.find(utf8::encode(std::u32string_view(cps).substr(s, t - s)));
      if (it == idx.surfaces.end()) continue;
      for (TermClass c : it->second) out.push_back({s, t, c, Provenance::gold});
    }
  }
  sort_canonical(out);
  return out;
}

// ---------------------------------------------------------------------------

using Predictor = std::function<std::vector<Entity>(const Document&)>;
using Trainer = std::function<Predictor(const Corpus& train, uint64_t seed)>;

struct TaggerSpec {
  enum class Kind { gazetteer, biencoder };
  Kind kind = Kind::biencoder;
  TaggerConfig config;
  TypeDescriptions descriptions = default_descriptions();
};

/// Accepts {"kind": "gazetteer" | "biencoder", ...bi-encoder keys}.
inline TaggerSpec tagger_spec_from_json(const nlohmann::json& j) {
  TaggerSpec spec;
  nlohmann::json rest = j;
  if (rest.contains("kind")) {
    const auto kind = rest["kind"].get<std::string>();
    if (kind == "gazetteer") spec.kind = TaggerSpec::Kind::gazetteer;
    else if (kind == "biencoder") spec.kind = TaggerSpec::Kind::biencoder;
    else throw Error("unknown tagger kind '" + kind + "'");
    rest.erase("kind");
  }
  if (rest.contains("descriptions")) {
    for (const auto& [c, text] : descriptions_from_json(rest["descriptions"])) spec.descriptions[c] = text;
    rest.erase("descriptions");
  }
  spec.config = tagger_config_from_json(rest);
  return spec;
}

inline nlohmann::ordered_json to_json(const TaggerSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = s.kind == TaggerSpec::Kind::gazetteer ? "gazetteer" : "biencoder";
  const auto cfg = to_json(s.config);
  for (const auto& [k, v] : cfg.items()) j[k] = v;
  nlohmann::ordered_json d = nlohmann::ordered_json::object();
  for (const auto& [c, text] : s.descriptions) d[std::string(to_string(c))] = text;
  j["descriptions"] = d;
  return j;
}

inline Trainer make_trainer(const TaggerSpec& spec) {
  if (spec.kind == TaggerSpec::Kind::gazetteer) {
    return [](const Corpus& train, uint64_t) -> Predictor {
      auto idx = std::make_shared<GazetteerIndex>(gazetteer_train(train));
      return [idx](const Document& d) { return gazetteer_predict(*idx, d); };
    };
  }
  return [spec](const Corpus& train, uint64_t seed) -> Predictor {
    TaggerConfig cfg = spec.config;
    cfg.seed = seed;
    auto model = std::make_shared<TaggerModel>(nestterm::train(train, spec.descriptions, cfg));
    return [model](const Document& d) { return predict(*model, d); };
  };
}

}  // namespace nestterm
