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

// Inclusion pseudo-labels: mentions of labeled terms found inside other
// labeled terms of a flat corpus, matched either by exact surface or by the
// unordered multiset of token lemmas. Also the conflict-safe merge that every
// pseudo-labeling route feeds into.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"

namespace nestterm {

// ---------------------------------------------------------------------------
// Lemmatization

/// Suffix-strip rules plus an exception list. The lemma is only used as a
/// matching key, so a stem is as good as a dictionary form.
class LemmaTable {
 public:
  LemmaTable() = default;

  void add_rule(std::string suffix, std::string replacement) {
    rules_.emplace_back(std::move(suffix), std::move(replacement));
    // Longest suffix first; insertion order among equals.
    std::stable_sort(rules_.begin(), rules_.end(), [](const auto& a, const auto& b) {
      return utf8::length(a.first) > utf8::length(b.first);
    });
  }

  void add_exception(const std::string& surface, std::string lemma) {
    exceptions_[case_fold_ ? utf8::fold_case(surface) : surface] = std::move(lemma);
  }

  void set_case_fold(bool on) { case_fold_ = on; }
  bool case_fold() const { return case_fold_; }
  const std::vector<std::pair<std::string, std::string>>& rules() const { return rules_; }
  const std::map<std::string, std::string>& exceptions() const { return exceptions_; }

  /// Reads `suffix<TAB>replacement` rule lines and `!surface<TAB>lemma`
  /// exception lines. `#` starts a comment line; `@casefold<TAB>false`
  /// disables case folding.
  static LemmaTable parse(std::istream& in) {
    LemmaTable t;
    std::string line;
    size_t lineno = 0;
    std::vector<std::pair<std::string, std::string>> pending_exceptions;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      std::string key = line.substr(0, tab);
      std::string value = tab == std::string::npos ? std::string() : line.substr(tab + 1);
      if (key == "@casefold") {
        t.case_fold_ = !(value == "false" || value == "0" || value == "off");
      } else if (!key.empty() && key[0] == '!') {
        if (key.size() == 1) throw Error("lemma table line " + std::to_string(lineno) + ": empty exception surface");
        pending_exceptions.emplace_back(key.substr(1), value);
      } else {
        if (key.empty()) throw Error("lemma table line " + std::to_string(lineno) + ": empty suffix");
        t.add_rule(key, value);
      }
    }
    for (auto& [s, l] : pending_exceptions) t.add_exception(s, l);
    return t;
  }

  /// Inverse of parse().
  std::string to_text() const {
    std::string out;
    if (!case_fold_) out += "@casefold\tfalse\n";
    for (const auto& [suffix, repl] : rules_) out += suffix + "\t" + repl + "\n";
    for (const auto& [surface, lemma] : exceptions_) out += "!" + surface + "\t" + lemma + "\n";
    return out;
  }

  static LemmaTable load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open lemma table '" + path.string() + "'");
    return parse(in);
  }

  /// Russian nominal and adjectival endings, stripped to a bare stem.
  static LemmaTable default_russian() {
    LemmaTable t;
    for (const char* s : {"ами", "ями", "ого", "его", "ому", "ему", "ыми", "ими", "ах", "ях", "ам",
                          "ям", "ов", "ев", "ой", "ей", "ий", "ый", "ая", "яя", "ое", "ее", "ую",
                          "юю", "ом", "ем", "ы", "и", "а", "я", "у", "ю", "е", "о", "ь"}) {
      t.add_rule(s, "");
    }
    return t;
  }

 private:
  std::vector<std::pair<std::string, std::string>> rules_;
  std::map<std::string, std::string> exceptions_;
  bool case_fold_ = true;
};

/// Exceptions win; otherwise the longest matching suffix rule fires once,
/// provided a non-empty stem remains.
inline std::string lemma_of(std::string_view token_surface, const LemmaTable& table) {
  std::string s = table.case_fold() ? utf8::fold_case(token_surface) : std::string(token_surface);
  if (auto it = table.exceptions().find(s); it != table.exceptions().end()) return it->second;
  for (const auto& [suffix, replacement] : table.rules()) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return s.substr(0, s.size() - suffix.size()) + replacement;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Inclusions

enum class InclusionKind { surface, lemma };

inline std::string_view to_string(InclusionKind k) { return k == InclusionKind::surface ? "surface" : "lemma"; }

struct InclusionHit {
  std::string doc_id;
  int64_t start = 0;
  int64_t end = 0;
  TermClass cls = TermClass::specific;
  InclusionKind kind = InclusionKind::surface;
  Entity host;
  std::string source_doc_id;
  Entity source;

  Entity entity() const {
    return {start, end, cls, kind == InclusionKind::surface ? Provenance::inclusion : Provenance::lemma_inclusion};
  }
};

inline nlohmann::ordered_json to_json(const InclusionHit& h) {
  return {{"doc", h.doc_id},
          {"start", h.start},
          {"end", h.end},
          {"class", to_string(h.cls)},
          {"kind", to_string(h.kind)},
          {"host", {{"start", h.host.start}, {"end", h.host.end}, {"class", to_string(h.host.cls)}}},
          {"source",
           {{"doc", h.source_doc_id}, {"start", h.source.start}, {"end", h.source.end}}}};
}

namespace detail {

struct SourceRef {
  TermClass cls;
  std::string doc_id;
  Entity entity;
};

// Index key -> one source per class, first occurrence in corpus order.
using InclusionIndex = std::unordered_map<std::string, std::vector<SourceRef>>;

inline void index_add(InclusionIndex& idx, std::string key, const std::string& doc_id, const Entity& e) {
  auto& refs = idx[std::move(key)];
  for (const auto& r : refs) {
    if (r.cls == e.cls) return;
  }
  refs.push_back({e.cls, doc_id, e});
}

inline void require_flat(const Corpus& corpus) {
  for (const auto& d : corpus) {
    if (!is_flat(d)) throw Error("inclusion search needs flat input; document '" + d.id + "' has overlapping entities");
  }
}

struct PreparedDoc {
  std::u32string cps;
  std::vector<TokenSpan> tokens;
  std::vector<Entity> entities;  // canonical order
};

inline PreparedDoc prepare(const Document& d) {
  PreparedDoc p;
  p.cps = utf8::decode(d.text);
  p.tokens = tokenize(std::u32string_view(p.cps));
  p.entities = d.entities;
  sort_canonical(p.entities);
  return p;
}

inline std::string lemma_key(std::vector<std::string> lemmas) {
  std::sort(lemmas.begin(), lemmas.end());
  std::string key;
  for (const auto& l : lemmas) {
    key += l;
    key += '\x1f';
  }
  return key;
}

// Scans every token window strictly inside every entity. `key_of(di, a, b)`
// maps the token window [a, b] of document `di` to its index key.
template <typename KeyFn>
std::vector<InclusionHit> scan_windows(const Corpus& corpus, const std::vector<PreparedDoc>& prepared,
                                       const InclusionIndex& index, size_t max_tokens, InclusionKind kind,
                                       KeyFn&& key_of) {
  std::vector<InclusionHit> hits;
  for (size_t di = 0; di < corpus.size(); ++di) {
    const auto& p = prepared[di];
    std::vector<InclusionHit> doc_hits;
    std::set<std::tuple<int64_t, int64_t, int>> seen;
    for (const auto& e : p.entities) seen.emplace(e.start, e.end, static_cast<int>(e.cls));
    for (const auto& host : p.entities) {
      auto range = token_range(p.tokens, host);
      if (!range) continue;
      const auto [first, last] = *range;
      for (size_t a = first; a <= last; ++a) {
        for (size_t b = a; b <= last && b - a + 1 <= max_tokens; ++b) {
          if (a == first && b == last) continue;
          auto it = index.find(key_of(di, a, b));
          if (it == index.end()) continue;
          const int64_t s = p.tokens[a].start, t = p.tokens[b].end;
          for (const auto& ref : it->second) {
            if (!seen.emplace(s, t, static_cast<int>(ref.cls)).second) continue;
            doc_hits.push_back({corpus[di].id, s, t, ref.cls, kind, host, ref.doc_id, ref.entity});
          }
        }
      }
    }
    std::stable_sort(doc_hits.begin(), doc_hits.end(), [](const InclusionHit& x, const InclusionHit& y) {
      return canonical_less(x.entity(), y.entity());
    });
    hits.insert(hits.end(), doc_hits.begin(), doc_hits.end());
  }
  return hits;
}

}  // namespace detail

/// Every token-aligned occurrence of a labeled surface strictly inside a
/// labeled span, tagged with the class of the labeled surface.
inline std::vector<InclusionHit> find_inclusions(const Corpus& corpus) {
  detail::require_flat(corpus);
  std::vector<detail::PreparedDoc> prepared;
  prepared.reserve(corpus.size());
  for (const auto& d : corpus) prepared.push_back(detail::prepare(d));

  detail::InclusionIndex index;
  size_t max_tokens = 0;
  for (size_t di = 0; di < corpus.size(); ++di) {
    const auto& p = prepared[di];
    for (const auto& e : p.entities) {
      auto range = token_range(p.tokens, e);
      if (!range) continue;
      max_tokens = std::max(max_tokens, range->second - range->first + 1);
      detail::index_add(index, surface(e, p.cps), corpus[di].id, e);
    }
  }
  return detail::scan_windows(corpus, prepared, index, max_tokens, InclusionKind::surface,
                              [&](size_t di, size_t a, size_t b) {
                                const auto& p = prepared[di];
                                return utf8::encode(std::u32string_view(p.cps).substr(
                                    p.tokens[a].start, p.tokens[b].end - p.tokens[a].start));
                              });
}

/// Windows of the same token count as a labeled term whose lemma multiset
/// equals the term's.
inline std::vector<InclusionHit> find_lemmatized_inclusions(const Corpus& corpus, const LemmaTable& table) {
  detail::require_flat(corpus);
  std::vector<detail::PreparedDoc> prepared;
  std::vector<std::vector<std::string>> lemmas;
  prepared.reserve(corpus.size());
  for (const auto& d : corpus) {
    prepared.push_back(detail::prepare(d));
    auto& ls = lemmas.emplace_back();
    for (const auto& t : prepared.back().tokens) ls.push_back(lemma_of(t.surface, table));
  }

  detail::InclusionIndex index;
  size_t max_tokens = 0;
  for (size_t di = 0; di < corpus.size(); ++di) {
    const auto& p = prepared[di];
    for (const auto& e : p.entities) {
      auto range = token_range(p.tokens, e);
      if (!range) continue;
      max_tokens = std::max(max_tokens, range->second - range->first + 1);
      std::vector<std::string> ls(lemmas[di].begin() + range->first, lemmas[di].begin() + range->second + 1);
      detail::index_add(index, detail::lemma_key(std::move(ls)), corpus[di].id, e);
    }
  }
  return detail::scan_windows(corpus, prepared, index, max_tokens, InclusionKind::lemma,
                              [&](size_t di, size_t a, size_t b) {
                                const auto& ls = lemmas[di];
                                return detail::lemma_key({ls.begin() + a, ls.begin() + b + 1});
                              });
}

// ---------------------------------------------------------------------------
// Merging

struct Candidate {
  std::string doc_id;
  Entity entity;
};

struct Rejection {
  Candidate candidate;
  std::string reason;  // duplicate | crossing | out-of-range | unknown-document
};

struct MergeResult {
  Corpus corpus;
  std::vector<Rejection> rejected;
  size_t added = 0;
};

inline std::vector<Candidate> to_candidates(const std::vector<InclusionHit>& hits) {
  std::vector<Candidate> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back({h.doc_id, h.entity()});
  return out;
}

/// Adds candidates in (doc id, start, end desc, class) order. Existing
/// labels are never removed; a candidate that duplicates a retained triple
/// or crosses a retained span is rejected.
inline MergeResult merge_pseudo(const Corpus& corpus, std::vector<Candidate> candidates) {
  MergeResult r;
  r.corpus = corpus;
  std::unordered_map<std::string, size_t> by_id;
  for (size_t i = 0; i < r.corpus.size(); ++i) by_id.emplace(r.corpus[i].id, i);
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return canonical_less(a.entity, b.entity);
  });
  std::vector<int64_t> lengths(r.corpus.size(), -1);
  std::vector<bool> touched(r.corpus.size(), false);
  for (auto& c : candidates) {
    auto it = by_id.find(c.doc_id);
    if (it == by_id.end()) {
      r.rejected.push_back({std::move(c), "unknown-document"});
      continue;
    }
    Document& doc = r.corpus[it->second];
    auto& len = lengths[it->second];
    if (len < 0) len = static_cast<int64_t>(utf8::length(doc.text));
    const Entity& e = c.entity;
    if (e.start < 0 || e.start >= e.end || e.end > len) {
      r.rejected.push_back({std::move(c), "out-of-range"});
      continue;
    }
    bool duplicate = false, crossing = false;
    for (const auto& x : doc.entities) {
      if (x.same_triple(e)) duplicate = true;
      if (x.crosses(e)) crossing = true;
    }
    if (duplicate) {
      r.rejected.push_back({std::move(c), "duplicate"});
    } else if (crossing) {
      r.rejected.push_back({std::move(c), "crossing"});
    } else {
      doc.entities.push_back(e);
      touched[it->second] = true;
      ++r.added;
    }
  }
  for (size_t i = 0; i < r.corpus.size(); ++i) {
    if (touched[i]) sort_canonical(r.corpus[i].entities);
  }
  return r;
}

}  // namespace nestterm
