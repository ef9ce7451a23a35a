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

// Data model for nested-span corpora: term classes, entities, documents,
// tokenization, nesting validation and JSONL serialization.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "nestterm/utf8.hpp"

namespace nestterm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TermClass { specific, common, nomen, any };

inline constexpr TermClass kAllClasses[] = {TermClass::specific, TermClass::common,
                                            TermClass::nomen, TermClass::any};

inline std::string_view to_string(TermClass c) {
  switch (c) {
    case TermClass::specific: return "specific";
    case TermClass::common: return "common";
    case TermClass::nomen: return "nomen";
    case TermClass::any: return "any";
  }
  return "?";
}

inline TermClass parse_term_class(std::string_view s) {
  if (s == "specific") return TermClass::specific;
  if (s == "common") return TermClass::common;
  if (s == "nomen") return TermClass::nomen;
  if (s == "any") return TermClass::any;
  throw Error("unknown term class '" + std::string(s) + "'");
}

enum class Provenance { gold, inclusion, lemma_inclusion, damage_cv };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::gold: return "gold";
    case Provenance::inclusion: return "inclusion";
    case Provenance::lemma_inclusion: return "lemma-inclusion";
    case Provenance::damage_cv: return "damage-cv";
  }
  return "?";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "gold") return Provenance::gold;
  if (s == "inclusion") return Provenance::inclusion;
  if (s == "lemma-inclusion") return Provenance::lemma_inclusion;
  if (s == "damage-cv") return Provenance::damage_cv;
  throw Error("unknown provenance '" + std::string(s) + "'");
}

/// Half-open span [start, end) in code points, with a class and the source
/// that produced the label. Identity is the (start, end, cls) triple;
/// provenance is bookkeeping.
struct Entity {
  int64_t start = 0;
  int64_t end = 0;
  TermClass cls = TermClass::specific;
  Provenance provenance = Provenance::gold;

  int64_t length() const { return end - start; }
  bool same_span(const Entity& o) const { return start == o.start && end == o.end; }
  bool same_triple(const Entity& o) const { return same_span(o) && cls == o.cls; }

  // Non-strict: an entity covers itself.
  bool covers(const Entity& o) const { return start <= o.start && o.end <= end; }
  bool strictly_contains(const Entity& o) const { return covers(o) && !same_span(o); }
  bool overlaps(const Entity& o) const { return start < o.end && o.start < end; }
  bool crosses(const Entity& o) const {
    return overlaps(o) && !covers(o) && !o.covers(*this);
  }

  bool operator==(const Entity&) const = default;
};

/// Parents before children: start ascending, end descending, then class.
inline bool canonical_less(const Entity& a, const Entity& b) {
  return std::tuple(a.start, -a.end, static_cast<int>(a.cls)) <
         std::tuple(b.start, -b.end, static_cast<int>(b.cls));
}

inline void sort_canonical(std::vector<Entity>& es) {
  std::stable_sort(es.begin(), es.end(), canonical_less);
}

struct Document {
  std::string id;
  std::string text;
  std::vector<Entity> entities;

  bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;

inline const Document* find_document(const Corpus& docs, std::string_view id) {
  for (const auto& d : docs) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

inline std::string describe(const Entity& e) {
  return "(" + std::to_string(e.start) + "," + std::to_string(e.end) + "," +
         std::string(to_string(e.cls)) + ")";
}

// ---------------------------------------------------------------------------
// Tokenization

struct TokenSpan {
  int64_t start = 0;
  int64_t end = 0;
  std::string surface;

  bool operator==(const TokenSpan&) const = default;
};

/// Maximal runs of letters and digits. A hyphen is kept when it sits between
/// two alphanumerics ("beta-2"); all other punctuation separates tokens.
inline std::vector<TokenSpan> tokenize(std::u32string_view cps) {
  std::vector<TokenSpan> out;
  const int64_t n = static_cast<int64_t>(cps.size());
  int64_t i = 0;
  while (i < n) {
    if (!utf8::is_alnum(cps[i])) {
      ++i;
      continue;
    }
    int64_t j = i + 1;
    while (j < n) {
      if (utf8::is_alnum(cps[j])) {
        ++j;
      } else if (utf8::is_hyphen(cps[j]) && j + 1 < n && utf8::is_alnum(cps[j + 1])) {
        j += 2;
      } else {
        break;
      }
    }
    out.push_back({i, j, utf8::encode(cps.substr(i, j - i))});
    i = j;
  }
  return out;
}

inline std::vector<TokenSpan> tokenize(std::string_view text) {
  return tokenize(std::u32string_view(utf8::decode(text)));
}

/// Token index range [first, last] covered exactly by the entity, or nullopt
/// when a boundary falls inside a token or between tokens.
inline std::optional<std::pair<size_t, size_t>> token_range(const std::vector<TokenSpan>& tokens,
                                                            int64_t start, int64_t end) {
  auto by_start = std::lower_bound(tokens.begin(), tokens.end(), start,
                                   [](const TokenSpan& t, int64_t v) { return t.start < v; });
  if (by_start == tokens.end() || by_start->start != start) return std::nullopt;
  auto by_end = std::lower_bound(tokens.begin(), tokens.end(), end,
                                 [](const TokenSpan& t, int64_t v) { return t.end < v; });
  if (by_end == tokens.end() || by_end->end != end) return std::nullopt;
  size_t first = static_cast<size_t>(by_start - tokens.begin());
  size_t last = static_cast<size_t>(by_end - tokens.begin());
  if (last < first) return std::nullopt;
  return std::pair{first, last};
}

inline std::optional<std::pair<size_t, size_t>> token_range(const std::vector<TokenSpan>& tokens,
                                                            const Entity& e) {
  return token_range(tokens, e.start, e.end);
}

inline std::string surface(const Entity& e, std::u32string_view cps) {
  if (e.start < 0 || e.end > static_cast<int64_t>(cps.size()) || e.start > e.end) {
    throw Error("span " + describe(e) + " out of range");
  }
  return utf8::encode(cps.substr(e.start, e.end - e.start));
}

inline std::string surface(const Entity& e, const Document& doc) {
  return surface(e, std::u32string_view(utf8::decode(doc.text)));
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind { crossing, out_of_range, duplicate };
  Kind kind;
  Entity first;
  std::optional<Entity> second;

  std::string message() const {
    switch (kind) {
      case Kind::crossing:
        return "crossing spans " + describe(first) + " and " + describe(*second);
      case Kind::out_of_range:
        return "invalid span " + describe(first);
      case Kind::duplicate:
        return "duplicate entity " + describe(first);
    }
    return {};
  }
  bool operator==(const Violation&) const = default;
};

/// Lists every out-of-range entity, every repeated triple and every crossing
/// pair. Empty iff the document satisfies the nesting condition.
inline std::vector<Violation> validate_nesting(const Document& doc) {
  std::vector<Violation> out;
  const auto text_len = static_cast<int64_t>(utf8::length(doc.text));
  std::vector<Entity> ok;
  for (const auto& e : doc.entities) {
    if (e.start < 0 || e.start >= e.end || e.end > text_len) {
      out.push_back({Violation::Kind::out_of_range, e, std::nullopt});
    } else {
      ok.push_back(e);
    }
  }
  sort_canonical(ok);
  for (size_t i = 1; i < ok.size(); ++i) {
    if (ok[i].same_triple(ok[i - 1])) out.push_back({Violation::Kind::duplicate, ok[i], std::nullopt});
  }
  // Sweep in parent-first order; `open` holds entities whose span may still
  // reach the current start.
  std::vector<const Entity*> open;
  for (const auto& e : ok) {
    std::erase_if(open, [&](const Entity* a) { return a->end <= e.start; });
    for (const Entity* a : open) {
      if (a->start < e.start && a->end < e.end) {
        out.push_back({Violation::Kind::crossing, *a, e});
      }
    }
    open.push_back(&e);
  }
  return out;
}

inline bool is_valid(const Document& doc) { return validate_nesting(doc).empty(); }

inline bool is_flat(const Document& doc) {
  std::vector<Entity> es = doc.entities;
  sort_canonical(es);
  for (size_t i = 1; i < es.size(); ++i) {
    if (es[i].start < es[i - 1].end) return false;
  }
  return true;
}

/// Level of every entity (1 = contained in nothing), aligned with
/// doc.entities. Level counts distinct container spans, which under validity
/// form a chain.
inline std::vector<int> nesting_levels(const Document& doc) {
  const size_t n = doc.entities.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return canonical_less(doc.entities[a], doc.entities[b]);
  });
  std::vector<int> level(n, 1);
  // Stack of distinct open spans, outermost first.
  std::vector<std::pair<int64_t, int64_t>> stack;
  for (size_t idx : order) {
    const Entity& e = doc.entities[idx];
    while (!stack.empty() && stack.back().second <= e.start) stack.pop_back();
    while (!stack.empty() && stack.back().second < e.end) stack.pop_back();  // invalid input
    bool same = !stack.empty() && stack.back() == std::pair{e.start, e.end};
    level[idx] = static_cast<int>(stack.size()) + (same ? 0 : 1);
    if (!same) stack.emplace_back(e.start, e.end);
  }
  return level;
}

inline int nesting_level(const Entity& e, const Document& doc) {
  auto it = std::find_if(doc.entities.begin(), doc.entities.end(),
                         [&](const Entity& x) { return x.same_triple(e); });
  if (it == doc.entities.end()) {
    throw Error("entity " + describe(e) + " not in document '" + doc.id + "'");
  }
  return nesting_levels(doc)[static_cast<size_t>(it - doc.entities.begin())];
}

/// Entities whose boundaries do not coincide with token boundaries.
inline std::vector<Entity> misaligned_entities(const Document& doc,
                                               const std::vector<TokenSpan>& tokens) {
  std::vector<Entity> out;
  for (const auto& e : doc.entities) {
    if (!token_range(tokens, e)) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL I/O

struct LoadOptions {
  // Strict rejects entities with mid-token boundaries; lenient snaps them
  // outward to the enclosing token boundaries.
  bool strict = true;
};

inline nlohmann::ordered_json to_json(const Entity& e) {
  nlohmann::ordered_json j;
  j["start"] = e.start;
  j["end"] = e.end;
  j["class"] = to_string(e.cls);
  j["provenance"] = to_string(e.provenance);
  return j;
}

inline nlohmann::ordered_json to_json(const Document& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["text"] = d.text;
  j["entities"] = nlohmann::ordered_json::array();
  for (const auto& e : d.entities) j["entities"].push_back(to_json(e));
  return j;
}

inline Document document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("expected a JSON object");
  Document d;
  d.id = j.at("id").get<std::string>();
  d.text = j.at("text").get<std::string>();
  if (j.contains("entities")) {
    for (const auto& je : j.at("entities")) {
      Entity e;
      e.start = je.at("start").get<int64_t>();
      e.end = je.at("end").get<int64_t>();
      e.cls = parse_term_class(je.at("class").get<std::string>());
      if (je.contains("provenance")) e.provenance = parse_provenance(je.at("provenance").get<std::string>());
      d.entities.push_back(e);
    }
  }
  return d;
}

namespace detail {

inline void snap_outward(Document& doc, const std::vector<TokenSpan>& tokens) {
  std::vector<Entity> snapped;
  for (Entity e : doc.entities) {
    if (!token_range(tokens, e)) {
      int64_t s = e.start, t = e.end;
      bool any = false;
      for (const auto& tok : tokens) {
        if (tok.end > e.start && tok.start < e.end) {
          if (!any) s = tok.start;
          t = tok.end;
          any = true;
        }
      }
      if (!any) throw Error("span " + describe(e) + " covers no token");
      e.start = std::min(s, e.start);
      e.end = std::max(t, e.end);
    }
    bool dup = std::any_of(snapped.begin(), snapped.end(), [&](const Entity& x) { return x.same_triple(e); });
    if (!dup) snapped.push_back(e);
  }
  doc.entities = std::move(snapped);
}

inline void check_document(Document& doc, const LoadOptions& opts) {
  auto violations = validate_nesting(doc);
  for (const auto& v : violations) {
    if (v.kind == Violation::Kind::out_of_range) {
      throw Error("document '" + doc.id + "': " + v.message());
    }
  }
  auto tokens = tokenize(doc.text);
  auto bad = misaligned_entities(doc, tokens);
  if (!bad.empty()) {
    if (opts.strict) {
      std::string spans;
      for (const auto& e : bad) spans += " " + describe(e);
      throw Error("document '" + doc.id + "': spans not token-aligned:" + spans);
    }
    snap_outward(doc, tokens);
    violations = validate_nesting(doc);
  }
  if (!violations.empty()) {
    std::string msg = "document '" + doc.id + "':";
    for (const auto& v : violations) msg += " " + v.message() + ";";
    throw Error(msg);
  }
}

inline void check_track_mode(const Corpus& docs) {
  bool any = false, named = false;
  for (const auto& d : docs) {
    for (const auto& e : d.entities) (e.cls == TermClass::any ? any : named) = true;
  }
  if (any && named) throw Error("class 'any' mixed with specific/common/nomen in one corpus");
}

}  // namespace detail

inline Corpus read_corpus(std::istream& in, const LoadOptions& opts = {}) {
  Corpus docs;
  std::set<std::string> ids;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Document d = document_from_json(nlohmann::json::parse(line));
      if (!ids.insert(d.id).second) throw Error("duplicate document id '" + d.id + "'");
      detail::check_document(d, opts);
      docs.push_back(std::move(d));
    } catch (const std::exception& ex) {
      throw Error("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  detail::check_track_mode(docs);
  return docs;
}

inline Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  try {
    return read_corpus(in, opts);
  } catch (const Error& ex) {
    throw Error(path.string() + ": " + ex.what());
  }
}

inline void write_corpus(const Corpus& docs, std::ostream& out) {
  for (const auto& d : docs) {
    out << to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
  }
}

/// Writes `content` to a sibling temp file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename '" + tmp.string() + "': " + ec.message());
}

inline void save_corpus(const Corpus& docs, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_corpus(docs, buf);
  write_file_atomic(path, buf.str());
}

}  // namespace nestterm
