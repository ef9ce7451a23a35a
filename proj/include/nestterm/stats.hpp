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

// Descriptive statistics of nested corpora: class amounts, nestedness levels,
// term lengths by nesting scope, and the inner-to-container class matrix.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"

namespace nestterm {

enum class Scope { outermost, inner, overall };

inline std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::outermost: return "outermost";
    case Scope::inner: return "inner";
    case Scope::overall: return "overall";
  }
  return "?";
}

struct LengthStats {
  size_t count = 0;
  int64_t min_chars = 0;
  int64_t max_chars = 0;
  double mean_chars = 0.0;
  int64_t min_words = 0;
  int64_t max_words = 0;
  double mean_words = 0.0;

  void add(int64_t chars, int64_t words) {
    if (count == 0) {
      min_chars = max_chars = chars;
      min_words = max_words = words;
    } else {
      min_chars = std::min(min_chars, chars);
      max_chars = std::max(max_chars, chars);
      min_words = std::min(min_words, words);
      max_words = std::max(max_words, words);
    }
    sum_chars_ += chars;
    sum_words_ += words;
    ++count;
    mean_chars = static_cast<double>(sum_chars_) / static_cast<double>(count);
    mean_words = static_cast<double>(sum_words_) / static_cast<double>(count);
  }

 private:
  int64_t sum_chars_ = 0;
  int64_t sum_words_ = 0;
};

struct NestingReport {
  size_t total = 0;
  std::map<TermClass, size_t> class_counts;
  std::map<TermClass, double> class_percent;
  int max_level = 0;
  // level_counts[cls][level - 1]
  std::map<TermClass, std::vector<size_t>> level_counts;
  std::vector<size_t> level_totals;
  // lengths[scope][cls]; the `all` row is stored under `all_lengths`.
  std::map<Scope, std::map<TermClass, LengthStats>> lengths;
  std::map<Scope, LengthStats> all_lengths;
  // inner_to_outer[inner cls][container cls], counted over every
  // (inner entity, strictly containing entity) pair.
  std::map<TermClass, std::map<TermClass, size_t>> inner_to_outer;

  size_t level_count(TermClass c, int level) const {
    auto it = level_counts.find(c);
    if (it == level_counts.end() || level < 1 || level > static_cast<int>(it->second.size())) return 0;
    return it->second[level - 1];
  }
  size_t inner_count(TermClass c) const {
    size_t n = 0;
    for (int l = 2; l <= max_level; ++l) n += level_count(c, l);
    return n;
  }
  size_t outermost_total() const { return level_totals.empty() ? 0 : level_totals[0]; }
  size_t inner_total() const { return total - outermost_total(); }
  /// Level share within one class column, in percent.
  double level_percent(TermClass c, int level) const {
    auto it = class_counts.find(c);
    if (it == class_counts.end() || it->second == 0) return 0.0;
    return 100.0 * static_cast<double>(level_count(c, level)) / static_cast<double>(it->second);
  }
  size_t container_total(TermClass outer) const {
    size_t n = 0;
    for (const auto& [inner, row] : inner_to_outer) {
      auto it = row.find(outer);
      if (it != row.end()) n += it->second;
    }
    return n;
  }
};

inline NestingReport corpus_stats(const Corpus& docs) {
  NestingReport r;
  for (const auto& doc : docs) {
    const std::u32string cps = utf8::decode(doc.text);
    const auto tokens = tokenize(std::u32string_view(cps));
    const auto levels = nesting_levels(doc);
    for (size_t i = 0; i < doc.entities.size(); ++i) {
      const Entity& e = doc.entities[i];
      const int level = levels[i];
      ++r.total;
      ++r.class_counts[e.cls];
      auto& lc = r.level_counts[e.cls];
      if (static_cast<int>(lc.size()) < level) lc.resize(level, 0);
      ++lc[level - 1];
      if (static_cast<int>(r.level_totals.size()) < level) r.level_totals.resize(level, 0);
      ++r.level_totals[level - 1];
      r.max_level = std::max(r.max_level, level);

      int64_t words = 0;
      for (const auto& t : tokens) {
        if (t.start >= e.start && t.end <= e.end) ++words;
      }
      const Scope scope = level == 1 ? Scope::outermost : Scope::inner;
      r.lengths[scope][e.cls].add(e.length(), words);
      r.lengths[Scope::overall][e.cls].add(e.length(), words);
      r.all_lengths[scope].add(e.length(), words);
      r.all_lengths[Scope::overall].add(e.length(), words);

      for (const Entity& c : doc.entities) {
        if (c.strictly_contains(e)) ++r.inner_to_outer[e.cls][c.cls];
      }
    }
  }
  for (auto& [cls, levels] : r.level_counts) levels.resize(r.max_level, 0);
  for (const auto& [cls, n] : r.class_counts) {
    r.class_percent[cls] = r.total == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(r.total);
  }
  return r;
}

inline nlohmann::ordered_json to_json(const LengthStats& s) {
  return {{"count", s.count},         {"min_chars", s.min_chars}, {"max_chars", s.max_chars},
          {"mean_chars", s.mean_chars}, {"min_words", s.min_words}, {"max_words", s.max_words},
          {"mean_words", s.mean_words}};
}

inline nlohmann::ordered_json to_json(const NestingReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["total"] = r.total;
  j["classes"] = ordered_json::object();
  for (const auto& [cls, n] : r.class_counts) {
    j["classes"][std::string(to_string(cls))] = {{"count", n}, {"percent", r.class_percent.at(cls)}};
  }
  j["max_level"] = r.max_level;
  ordered_json levels = ordered_json::array();
  for (int l = 1; l <= r.max_level; ++l) {
    ordered_json row;
    row["level"] = l;
    for (const auto& [cls, counts] : r.level_counts) {
      row[std::string(to_string(cls))] = {{"count", r.level_count(cls, l)},
                                          {"percent", r.level_percent(cls, l)}};
    }
    row["total"] = {{"count", r.level_totals[l - 1]},
                    {"percent", r.total == 0 ? 0.0
                                             : 100.0 * static_cast<double>(r.level_totals[l - 1]) /
                                                   static_cast<double>(r.total)}};
    levels.push_back(row);
  }
  j["levels"] = levels;
  ordered_json inner;
  for (const auto& [cls, n] : r.class_counts) inner[std::string(to_string(cls))] = r.inner_count(cls);
  inner["total"] = r.inner_total();
  j["inner_totals"] = inner;
  ordered_json lengths;
  for (Scope s : {Scope::outermost, Scope::inner, Scope::overall}) {
    ordered_json block;
    auto it = r.lengths.find(s);
    if (it != r.lengths.end()) {
      for (const auto& [cls, st] : it->second) block[std::string(to_string(cls))] = to_json(st);
    }
    auto all = r.all_lengths.find(s);
    block["all"] = to_json(all == r.all_lengths.end() ? LengthStats{} : all->second);
    lengths[std::string(to_string(s))] = block;
  }
  j["lengths"] = lengths;
  ordered_json matrix = ordered_json::object();
  for (const auto& [in_cls, row] : r.inner_to_outer) {
    for (const auto& [out_cls, n] : row) {
      matrix[std::string(to_string(in_cls))][std::string(to_string(out_cls))] = n;
    }
  }
  j["inner_to_outer"] = matrix;
  return j;
}

}  // namespace nestterm
