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

// Random corpora for property tests.

#include <string>
#include <vector>

#include "nestterm/corpus.hpp"
#include "nestterm/rng.hpp"

namespace nestterm::testing {

inline std::string random_word(Rng& rng) {
  static const std::vector<std::string> latin = {"a", "b", "c", "d", "e", "k", "o", "r", "s", "t"};
  static const std::vector<std::string> cyr = {"а", "б", "в", "е", "к", "о", "р", "с", "т", "ы"};
  const auto& alphabet = rng.index(3) == 0 ? cyr : latin;
  std::string w;
  const size_t n = 1 + rng.index(6);
  for (size_t i = 0; i < n; ++i) w += alphabet[rng.index(alphabet.size())];
  return w;
}

struct RandomText {
  std::string text;
  std::vector<TokenSpan> tokens;
};

inline RandomText random_text(Rng& rng, size_t n_tokens) {
  RandomText t;
  for (size_t i = 0; i < n_tokens; ++i) {
    if (i) t.text += rng.index(8) == 0 ? ", " : " ";
    t.text += random_word(rng);
  }
  t.tokens = tokenize(t.text);
  return t;
}

inline TermClass random_class(Rng& rng, const std::vector<TermClass>& classes) {
  return classes[rng.index(classes.size())];
}

/// Token-aligned, crossing-free, duplicate-free entities; identical spans
/// with different classes occur occasionally.
inline Document random_nested_doc(Rng& rng, const std::string& id, size_t max_entities,
                                  const std::vector<TermClass>& classes = {TermClass::specific, TermClass::common,
                                                                           TermClass::nomen}) {
  const size_t n_tokens = 1 + rng.index(40);
  RandomText t = random_text(rng, n_tokens);
  Document d{id, t.text, {}};
  const size_t target = rng.index(max_entities + 1);
  for (size_t attempt = 0; attempt < 8 * target + 8 && d.entities.size() < target; ++attempt) {
    size_t a = rng.index(t.tokens.size());
    size_t len = 1 + rng.index(std::min<size_t>(t.tokens.size() - a, rng.index(3) == 0 ? 12 : 4));
    Entity e{t.tokens[a].start, t.tokens[a + len - 1].end, random_class(rng, classes), Provenance::gold};
    if (!d.entities.empty() && rng.index(10) == 0) {
      const Entity& twin = d.entities[rng.index(d.entities.size())];
      e.start = twin.start;
      e.end = twin.end;
    }
    bool ok = true;
    for (const auto& x : d.entities) {
      if (x.crosses(e) || x.same_triple(e)) ok = false;
    }
    if (ok) d.entities.push_back(e);
  }
  rng.shuffle(d.entities);
  return d;
}

/// Token-aligned entities with no overlap at all.
inline Document random_flat_doc(Rng& rng, const std::string& id, size_t max_entities,
                                const std::vector<TermClass>& classes = {TermClass::specific, TermClass::common,
                                                                         TermClass::nomen}) {
  Document d = random_nested_doc(rng, id, max_entities, classes);
  std::vector<Entity> kept;
  for (const auto& e : d.entities) {
    bool ok = true;
    for (const auto& k : kept) {
      if (k.overlaps(e)) ok = false;
    }
    if (ok) kept.push_back(e);
  }
  d.entities = kept;
  return d;
}

/// Arbitrary spans, possibly crossing, duplicated or out of range.
inline Document random_messy_doc(Rng& rng, const std::string& id, size_t max_entities) {
  RandomText t = random_text(rng, 1 + rng.index(20));
  Document d{id, t.text, {}};
  const auto len = static_cast<int64_t>(utf8::length(t.text));
  const size_t n = rng.index(max_entities + 1);
  for (size_t i = 0; i < n; ++i) {
    if (!d.entities.empty() && rng.index(8) == 0) {
      d.entities.push_back(d.entities[rng.index(d.entities.size())]);
      continue;
    }
    int64_t s = static_cast<int64_t>(rng.index(static_cast<uint64_t>(len + 2))) - 1;
    int64_t e = s + static_cast<int64_t>(rng.index(12)) - 1;
    d.entities.push_back({s, e, random_class(rng, {TermClass::specific, TermClass::common}), Provenance::gold});
  }
  return d;
}

inline Corpus random_corpus(Rng& rng, size_t docs, size_t max_entities, bool flat = false,
                            const std::vector<TermClass>& classes = {TermClass::specific, TermClass::common,
                                                                     TermClass::nomen}) {
  Corpus c;
  for (size_t i = 0; i < docs; ++i) {
    const std::string id = "d" + std::to_string(i);
    c.push_back(flat ? random_flat_doc(rng, id, max_entities, classes)
                     : random_nested_doc(rng, id, max_entities, classes));
  }
  return c;
}

// Adds `e` unless it repeats a triple or crosses an entity already present.
inline void add_if_compatible(std::vector<Entity>& es, const Entity& e) {
  for (const auto& o : es) {
    if (o.same_triple(e)) return;
    const bool overlap = o.start < e.end && e.start < o.end;
    const bool nested = (o.start <= e.start && e.end <= o.end) || (e.start <= o.start && o.end <= e.end);
    if (overlap && !nested) return;
  }
  es.push_back(e);
}

/// Valid prediction corpus derived from gold by dropping, shifting,
/// reclassing and inventing entities.
inline Corpus perturb(Rng& rng, const Corpus& gold, const std::vector<TermClass>& classes) {
  Corpus pred;
  for (const auto& g : gold) {
    Document p{g.id, g.text, {}};
    const auto tokens = tokenize(g.text);
    for (const auto& e : g.entities) {
      const size_t r = rng.index(10);
      if (r < 2) continue;
      Entity x = e;
      if (r == 2) x.cls = random_class(rng, classes);
      if (r == 3 && !tokens.empty()) x.end = tokens[rng.index(tokens.size())].end;
      if (x.end > x.start) add_if_compatible(p.entities, x);
    }
    const size_t extra = rng.index(4);
    for (size_t i = 0; i < extra && !tokens.empty(); ++i) {
      size_t a = rng.index(tokens.size());
      size_t b = a + rng.index(std::min<size_t>(3, tokens.size() - a));
      add_if_compatible(p.entities, {tokens[a].start, tokens[b].end, random_class(rng, classes), Provenance::gold});
    }
    pred.push_back(std::move(p));
  }
  return pred;
}

}  // namespace nestterm::testing
