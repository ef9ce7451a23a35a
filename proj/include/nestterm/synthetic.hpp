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

// Synthetic nested-term corpora for desk-scale experiments.
//
// A seeded lexicon holds single-word terms, two-word compounds (head +
// dependent in the genitive), modifiers and filler words. Outer terms wrap
// compounds with modifiers and extra dependents; every lexicon term inside
// an outer term is annotated, so the gold labeling is nested. Words inflect
// by suffix, so mentions repeat in varying surface forms; `lemma_table()`
// undoes the inflection. Some single terms never occur on their own and are
// only recoverable from context.

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nestterm/corpus.hpp"
#include "nestterm/pseudolabel.hpp"
#include "nestterm/rng.hpp"

namespace nestterm::synthetic {

inline const std::vector<std::string>& case_suffixes() {
  static const std::vector<std::string> s = {"", "a", "u", "om", "e"};
  return s;
}
inline constexpr size_t kGenitive = 1;

struct Term {
  std::string stem;
  bool standalone = true;  // occurs outside outer terms
};

struct Compound {
  size_t head = 0;  // index into single terms
  size_t dep = 0;
};

struct Lexicon {
  std::vector<Term> singles;
  std::vector<Compound> compounds;
  std::vector<std::string> modifiers;
  std::vector<std::string> fillers;
};

struct LexiconSpec {
  size_t singles = 60;
  size_t compounds = 40;
  size_t modifiers = 15;
  size_t fillers = 120;
  double hidden_share = 0.2;  // singles that never stand alone
};

struct CorpusSpec {
  size_t docs = 300;
  size_t outers_per_doc = 2;
  size_t standalones_per_doc = 3;
  double nominative_share = 0.5;   // standalone mentions in the base form
  double compound_standalone = 0.3;
  TermClass cls = TermClass::any;
  std::string id_prefix = "doc";
};

namespace detail {

inline std::string make_stem(Rng& rng, std::set<std::string>& used) {
  static const char* onsets[] = {"b", "v", "g", "d", "z", "k", "l", "m", "n", "p", "r", "s", "t", "f", "kr", "pr", "st", "tr", "gr", "sl"};
  static const char* vowels[] = {"a", "o", "i", "e", "u"};
  static const char* codas[] = {"k", "t", "r", "n", "s", "l", "d", "v", "p", "z", "b", "g"};
  for (;;) {
    std::string s;
    const size_t syll = 1 + rng.index(2);
    for (size_t i = 0; i < syll; ++i) {
      s += onsets[rng.index(std::size(onsets))];
      s += vowels[rng.index(std::size(vowels))];
    }
    s += codas[rng.index(std::size(codas))];
    if (used.insert(s).second) return s;
  }
}

}  // namespace detail

inline Lexicon make_lexicon(const LexiconSpec& spec, uint64_t seed) {
  Rng rng(derive_seed(seed, "lexicon"));
  std::set<std::string> used;
  Lexicon lex;
  for (size_t i = 0; i < spec.singles; ++i) {
    lex.singles.push_back({detail::make_stem(rng, used), rng.uniform() >= spec.hidden_share});
  }
  std::set<std::pair<size_t, size_t>> pairs;
  while (lex.compounds.size() < spec.compounds) {
    size_t h = rng.index(spec.singles), d = rng.index(spec.singles);
    if (h == d || !pairs.emplace(h, d).second) continue;
    lex.compounds.push_back({h, d});
  }
  // Modifiers and fillers end in letters no inflection rule strips.
  for (size_t i = 0; i < spec.modifiers; ++i) lex.modifiers.push_back(detail::make_stem(rng, used) + "yj");
  for (size_t i = 0; i < spec.fillers; ++i) lex.fillers.push_back(detail::make_stem(rng, used) + "i");
  return lex;
}

/// Inflection rules matching the generator's case suffixes.
inline LemmaTable lemma_table() {
  LemmaTable t;
  for (const auto& s : case_suffixes()) {
    if (!s.empty()) t.add_rule(s, "");
  }
  return t;
}

inline std::string lemma_table_text() {
  std::string out = "# suffix<TAB>replacement\n";
  for (const auto& s : case_suffixes()) {
    if (!s.empty()) out += s + "\t\n";
  }
  return out;
}

namespace detail {

struct Builder {
  std::string text;
  int64_t pos = 0;  // code points; the generator emits ASCII only
  std::vector<Entity> entities;
  TermClass cls;

  int64_t word(const std::string& w) {
    if (!text.empty()) {
      text += ' ';
      ++pos;
    }
    const int64_t start = pos;
    text += w;
    pos += static_cast<int64_t>(w.size());
    return start;
  }
  void label(int64_t s, int64_t e) { entities.push_back({s, e, cls, Provenance::gold}); }
};

inline size_t pick_case(Rng& rng, double nominative_share) {
  if (rng.uniform() < nominative_share) return 0;
  return 1 + rng.index(case_suffixes().size() - 1);
}

}  // namespace detail

inline Corpus make_corpus(const Lexicon& lex, const CorpusSpec& spec, uint64_t seed) {
  Rng rng(derive_seed(seed, "corpus"));
  std::vector<size_t> visible;
  for (size_t i = 0; i < lex.singles.size(); ++i) {
    if (lex.singles[i].standalone) visible.push_back(i);
  }
  if (visible.empty()) throw Error("synthetic lexicon has no standalone terms");
  auto form = [&](size_t term, size_t c) { return lex.singles[term].stem + case_suffixes()[c]; };

  Corpus docs;
  for (size_t di = 0; di < spec.docs; ++di) {
    detail::Builder b;
    b.cls = spec.cls;
    // Segment plan: outer terms and standalone mentions in random order,
    // separated by filler runs.
    std::vector<int> plan(spec.outers_per_doc, 1);
    plan.insert(plan.end(), spec.standalones_per_doc, 0);
    rng.shuffle(plan);
    auto fillers = [&](size_t lo, size_t hi) {
      const size_t n = lo + rng.index(hi - lo + 1);
      for (size_t i = 0; i < n; ++i) b.word(lex.fillers[rng.index(lex.fillers.size())]);
    };
    fillers(1, 2);
    for (int seg : plan) {
      if (seg == 1) {
        const Compound& c = lex.compounds[rng.index(lex.compounds.size())];
        const size_t shape = rng.index(10);  // 0-2: bare, 3-7: modifier, 8-9: modifier + extra dependent
        const size_t head_case = detail::pick_case(rng, 0.6);
        const int64_t outer_start = shape >= 3 ? b.word(lex.modifiers[rng.index(lex.modifiers.size())]) : -1;
        const int64_t h0 = b.word(form(c.head, head_case));
        const int64_t h1 = b.pos;
        const int64_t d0 = b.word(form(c.dep, kGenitive));
        const int64_t d1 = b.pos;
        b.label(h0, h1);
        b.label(d0, d1);
        if (shape >= 3) b.label(h0, d1);  // the compound is inner here
        int64_t end = d1;
        if (shape >= 8) {
          size_t extra;
          do {
            extra = rng.index(lex.singles.size());
          } while (extra == c.head || extra == c.dep);
          const int64_t e0 = b.word(form(extra, kGenitive));
          end = b.pos;
          b.label(e0, end);
        }
        b.label(shape >= 3 ? outer_start : h0, end);
      } else if (rng.uniform() < spec.compound_standalone) {
        const Compound& c = lex.compounds[rng.index(lex.compounds.size())];
        if (!lex.singles[c.head].standalone || !lex.singles[c.dep].standalone) {
          const size_t t = visible[rng.index(visible.size())];
          const int64_t s = b.word(form(t, detail::pick_case(rng, spec.nominative_share)));
          b.label(s, b.pos);
        } else {
          const int64_t h0 = b.word(form(c.head, detail::pick_case(rng, spec.nominative_share)));
          const int64_t h1 = b.pos;
          const int64_t d0 = b.word(form(c.dep, kGenitive));
          b.label(h0, b.pos);
          b.label(h0, h1);
          b.label(d0, b.pos);
        }
      } else {
        const size_t t = visible[rng.index(visible.size())];
        const int64_t s = b.word(form(t, detail::pick_case(rng, spec.nominative_share)));
        b.label(s, b.pos);
      }
      fillers(1, 3);
    }
    b.text += " .";
    sort_canonical(b.entities);
    b.entities.erase(std::unique(b.entities.begin(), b.entities.end(),
                                 [](const Entity& x, const Entity& y) { return x.same_triple(y); }),
                     b.entities.end());
    docs.push_back({spec.id_prefix + "-" + std::to_string(di), b.text, b.entities});
  }
  return docs;
}

/// Small two-class corpus for fit checks: multiword outer terms of class
/// specific with a nested single-word term of class common.
inline Corpus make_fit_corpus(size_t docs, uint64_t seed) {
  Rng rng(derive_seed(seed, "fit"));
  LexiconSpec ls;
  ls.singles = 12;
  ls.compounds = 8;
  ls.modifiers = 6;
  ls.fillers = 30;
  ls.hidden_share = 0.0;
  const Lexicon lex = make_lexicon(ls, seed);
  Corpus out;
  for (size_t di = 0; di < docs; ++di) {
    detail::Builder b;
    b.cls = TermClass::common;
    auto filler = [&] { b.word(lex.fillers[rng.index(lex.fillers.size())]); };
    filler();
    const size_t t = rng.index(lex.singles.size());
    const int64_t s = b.word(lex.singles[t].stem);
    b.label(s, b.pos);
    filler();
    filler();
    const Compound& c = lex.compounds[rng.index(lex.compounds.size())];
    const int64_t o = b.word(lex.modifiers[rng.index(lex.modifiers.size())]);
    const int64_t h = b.word(lex.singles[c.head].stem);
    b.label(h, b.pos);
    b.word(lex.singles[c.dep].stem + case_suffixes()[kGenitive]);
    b.entities.push_back({o, b.pos, TermClass::specific, Provenance::gold});
    filler();
    b.text += " .";
    sort_canonical(b.entities);
    out.push_back({"fit-" + std::to_string(di), b.text, b.entities});
  }
  return out;
}

/// Train and dev splits over one shared lexicon.
struct Benchmark {
  Lexicon lexicon;
  Corpus train;
  Corpus dev;
};

inline Benchmark make_benchmark(uint64_t seed, size_t train_docs = 300, size_t dev_docs = 100) {
  Benchmark bm;
  bm.lexicon = make_lexicon({}, seed);
  CorpusSpec tr;
  tr.docs = train_docs;
  tr.id_prefix = "train";
  bm.train = make_corpus(bm.lexicon, tr, derive_seed(seed, "train"));
  CorpusSpec dv;
  dv.docs = dev_docs;
  dv.id_prefix = "dev";
  bm.dev = make_corpus(bm.lexicon, dv, derive_seed(seed, "dev"));
  return bm;
}

}  // namespace nestterm::synthetic
