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

// Exact-span evaluation of nested predictions: per-class precision, recall
// and F1, micro/macro/weighted aggregates, class-agnostic matching, and
// overall/inner/outer partitions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"
#include "nestterm/span_algebra.hpp"

namespace nestterm {

struct ClassMetrics {
  TermClass cls = TermClass::any;
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators give 0, never NaN.
inline ClassMetrics make_metrics(TermClass cls, size_t tp, size_t fp, size_t fn) {
  ClassMetrics m{cls, tp, fp, fn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

struct MatchResult {
  std::vector<std::pair<Entity, Entity>> tp;  // (gold, pred)
  std::vector<Entity> fp;
  std::vector<Entity> fn;
};

/// One-to-one greedy matching on identical triples (class-aware) or
/// identical spans (class-agnostic), in canonical order.
inline MatchResult match_exact(std::vector<Entity> gold, std::vector<Entity> pred, bool class_aware) {
  sort_canonical(gold);
  sort_canonical(pred);
  auto key = [class_aware](const Entity& e) {
    return std::tuple(e.start, e.end, class_aware ? static_cast<int>(e.cls) : -1);
  };
  std::map<std::tuple<int64_t, int64_t, int>, std::vector<size_t>> unused;
  for (size_t i = gold.size(); i-- > 0;) unused[key(gold[i])].push_back(i);
  std::vector<bool> used(gold.size(), false);
  MatchResult r;
  for (const auto& p : pred) {
    auto it = unused.find(key(p));
    if (it != unused.end() && !it->second.empty()) {
      size_t g = it->second.back();
      it->second.pop_back();
      used[g] = true;
      r.tp.emplace_back(gold[g], p);
    } else {
      r.fp.push_back(p);
    }
  }
  for (size_t i = 0; i < gold.size(); ++i) {
    if (!used[i]) r.fn.push_back(gold[i]);
  }
  return r;
}

enum class Partition { overall, inner, outer };

inline std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::overall: return "overall";
    case Partition::inner: return "inner";
    case Partition::outer: return "outer";
  }
  return "?";
}

inline Partition parse_partition(std::string_view s) {
  if (s == "overall") return Partition::overall;
  if (s == "inner") return Partition::inner;
  if (s == "outer") return Partition::outer;
  throw Error("unknown partition '" + std::string(s) + "'");
}

struct Aggregate {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  bool class_aware = true;
  Partition partition = Partition::overall;
  std::vector<ClassMetrics> per_class;
  Aggregate micro;
  Aggregate macro;  // unweighted means of per-class P, R, F1
  double weighted_f1 = 0.0;
  std::map<TermClass, double> weights;
  // Mean per-document micro F1 over documents with any gold or predicted
  // entity in the partition.
  double doc_macro_f1 = 0.0;
};

struct ReportOptions {
  bool class_aware = true;
  Partition partition = Partition::overall;
  std::optional<std::map<TermClass, double>> weights;
};

inline std::vector<Entity> select_partition(const std::vector<Entity>& es, Partition p) {
  if (p == Partition::overall) return es;
  auto part = partition_inner_outer(es);
  return p == Partition::inner ? part.inner : part.outer;
}

inline EvalReport report(const Corpus& gold, const Corpus& pred, const ReportOptions& opts = {}) {
  std::unordered_map<std::string, const Document*> pred_by_id;
  for (const auto& d : pred) {
    if (!find_document(gold, d.id)) throw Error("prediction for unknown document '" + d.id + "'");
    pred_by_id.emplace(d.id, &d);
  }

  // Classes are those present in the partition on either side.
  std::vector<std::pair<std::vector<Entity>, std::vector<Entity>>> parts;
  std::vector<bool> seen(std::size(kAllClasses), false);
  // Id order keeps floating-point sums independent of document order.
  std::vector<const Document*> by_id;
  for (const auto& g : gold) by_id.push_back(&g);
  std::sort(by_id.begin(), by_id.end(), [](const Document* a, const Document* b) { return a->id < b->id; });
  for (const Document* gp : by_id) {
    const Document& g = *gp;
    auto& [gold_es, pred_es] = parts.emplace_back(select_partition(g.entities, opts.partition), std::vector<Entity>{});
    if (auto it = pred_by_id.find(g.id); it != pred_by_id.end()) {
      pred_es = select_partition(it->second->entities, opts.partition);
    }
    for (const auto* es : {&gold_es, &pred_es}) {
      for (const auto& e : *es) seen[static_cast<size_t>(e.cls)] = true;
    }
  }
  std::vector<TermClass> classes;
  if (opts.class_aware) {
    for (TermClass c : kAllClasses) {
      if (seen[static_cast<size_t>(c)]) classes.push_back(c);
    }
  } else {
    classes.push_back(TermClass::any);
  }
  auto cls_of = [&](const Entity& e) { return opts.class_aware ? e.cls : TermClass::any; };

  std::map<TermClass, std::array<size_t, 3>> counts;  // tp, fp, fn
  for (TermClass c : classes) counts[c] = {0, 0, 0};
  double doc_f1_sum = 0.0;
  size_t doc_count = 0;
  for (const auto& [gold_es, pred_es] : parts) {
    auto m = match_exact(gold_es, pred_es, opts.class_aware);
    for (const auto& [ge, pe] : m.tp) ++counts[cls_of(ge)][0];
    for (const auto& e : m.fp) ++counts[cls_of(e)][1];
    for (const auto& e : m.fn) ++counts[cls_of(e)][2];
    if (!gold_es.empty() || !pred_es.empty()) {
      doc_f1_sum += make_metrics(TermClass::any, m.tp.size(), m.fp.size(), m.fn.size()).f1;
      ++doc_count;
    }
  }

  EvalReport r;
  r.class_aware = opts.class_aware;
  r.partition = opts.partition;
  for (TermClass c : classes) {
    const auto& [tp, fp, fn] = counts[c];
    r.per_class.push_back(make_metrics(c, tp, fp, fn));
    r.micro.tp += tp;
    r.micro.fp += fp;
    r.micro.fn += fn;
  }
  auto micro = make_metrics(TermClass::any, r.micro.tp, r.micro.fp, r.micro.fn);
  r.micro.precision = micro.precision;
  r.micro.recall = micro.recall;
  r.micro.f1 = micro.f1;
  if (!r.per_class.empty()) {
    for (const auto& m : r.per_class) {
      r.macro.precision += m.precision;
      r.macro.recall += m.recall;
      r.macro.f1 += m.f1;
    }
    const double n = static_cast<double>(r.per_class.size());
    r.macro.precision /= n;
    r.macro.recall /= n;
    r.macro.f1 /= n;
  }
  r.macro.tp = r.micro.tp;
  r.macro.fp = r.micro.fp;
  r.macro.fn = r.micro.fn;

  if (opts.weights) {
    double sum = 0.0;
    for (const auto& [c, w] : *opts.weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) throw Error("class weights sum to " + std::to_string(sum) + ", expected 1");
    r.weights = *opts.weights;
  } else {
    size_t support = 0;
    for (const auto& m : r.per_class) support += m.tp + m.fn;
    for (const auto& m : r.per_class) {
      r.weights[m.cls] = support == 0 ? 1.0 / static_cast<double>(r.per_class.size())
                                      : static_cast<double>(m.tp + m.fn) / static_cast<double>(support);
    }
  }
  if (opts.weights) {
    for (const auto& m : r.per_class) {
      auto it = r.weights.find(m.cls);
      if (it != r.weights.end()) r.weighted_f1 += it->second * m.f1;
    }
  } else {
    // Support-weighted sum over the total, so perfect scores stay exactly 1.
    double num = 0.0, den = 0.0;
    for (const auto& m : r.per_class) {
      const double n = static_cast<double>(m.tp + m.fn);
      num += n * m.f1;
      den += n;
    }
    if (den > 0) {
      r.weighted_f1 = num / den;
    } else {
      for (const auto& m : r.per_class) r.weighted_f1 += r.weights[m.cls] * m.f1;
    }
  }
  r.doc_macro_f1 = doc_count == 0 ? 0.0 : doc_f1_sum / static_cast<double>(doc_count);
  return r;
}

inline std::map<TermClass, double> weights_from_json(const nlohmann::json& j) {
  std::map<TermClass, double> w;
  for (const auto& [k, v] : j.items()) w[parse_term_class(k)] = v.get<double>();
  return w;
}

struct Scoreboard {
  int track = 1;
  double primary = 0.0;  // track 1: class-agnostic F1; tracks 2-3: weighted F1
  std::optional<double> class_agnostic_f1;
};

inline Scoreboard scoreboard(const Corpus& gold, const Corpus& pred, int track,
                             const std::optional<std::map<TermClass, double>>& weights = std::nullopt) {
  if (track < 1 || track > 3) throw Error("track must be 1, 2 or 3");
  const double agnostic = report(gold, pred, {false, Partition::overall, std::nullopt}).micro.f1;
  if (track == 1) return {1, agnostic, std::nullopt};
  const double weighted = report(gold, pred, {true, Partition::overall, weights}).weighted_f1;
  return {track, weighted, agnostic};
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::ordered_json to_json(const ClassMetrics& m) {
  return {{"class", to_string(m.cls)}, {"tp", m.tp},         {"fp", m.fp}, {"fn", m.fn},
          {"precision", m.precision},  {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::ordered_json to_json(const Aggregate& a) {
  return {{"tp", a.tp}, {"fp", a.fp}, {"fn", a.fn}, {"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.class_aware ? "class-aware" : "class-agnostic";
  j["partition"] = to_string(r.partition);
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& m : r.per_class) j["per_class"].push_back(to_json(m));
  j["micro"] = to_json(r.micro);
  j["macro"] = to_json(r.macro);
  j["weighted_f1"] = r.weighted_f1;
  j["weights"] = nlohmann::ordered_json::object();
  for (const auto& [c, w] : r.weights) j["weights"][std::string(to_string(c))] = w;
  j["doc_macro_f1"] = r.doc_macro_f1;
  return j;
}

namespace detail {

inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

inline std::string pad(std::string s, size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace detail

/// Summary grid (rows: mode; columns: micro and macro F1 per partition)
/// followed by per-class detail for every report.
inline std::string render_text(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  std::vector<Partition> parts;
  for (const auto& r : reports) {
    if (std::find(parts.begin(), parts.end(), r.partition) == parts.end()) parts.push_back(r.partition);
  }
  out << detail::pad("", 16) << "| F1 micro, %";
  out << std::string(parts.size() * 9 > 12 ? parts.size() * 9 - 12 : 0, ' ') << "| F1 macro, %\n";
  out << detail::pad("mode", 16);
  for (int pass = 0; pass < 2; ++pass) {
    out << "|";
    for (Partition p : parts) out << detail::pad(" " + std::string(to_string(p)), 9);
  }
  out << "\n";
  for (bool aware : {true, false}) {
    bool any = false;
    for (const auto& r : reports) any = any || r.class_aware == aware;
    if (!any) continue;
    out << detail::pad(aware ? "class-aware" : "class-agnostic", 16);
    for (int pass = 0; pass < 2; ++pass) {
      out << "|";
      for (Partition p : parts) {
        std::string cell = "      -";
        for (const auto& r : reports) {
          if (r.class_aware == aware && r.partition == p) cell = detail::pct(pass == 0 ? r.micro.f1 : r.macro.f1);
        }
        out << detail::pad(" " + cell, 9);
      }
    }
    out << "\n";
  }
  for (const auto& r : reports) {
    out << "\n[" << to_string(r.partition) << ", " << (r.class_aware ? "class-aware" : "class-agnostic") << "]\n";
    out << detail::pad("class", 10) << detail::pad("tp", 7) << detail::pad("fp", 7) << detail::pad("fn", 7)
        << detail::pad("P, %", 8) << detail::pad("R, %", 8) << "F1, %\n";
    auto line = [&](const std::string& name, size_t tp, size_t fp, size_t fn, double p, double rc, double f) {
      out << detail::pad(name, 10) << detail::pad(std::to_string(tp), 7) << detail::pad(std::to_string(fp), 7)
          << detail::pad(std::to_string(fn), 7) << detail::pad(detail::pct(p), 8) << detail::pad(detail::pct(rc), 8)
          << detail::pct(f) << "\n";
    };
    for (const auto& m : r.per_class) line(std::string(to_string(m.cls)), m.tp, m.fp, m.fn, m.precision, m.recall, m.f1);
    line("micro", r.micro.tp, r.micro.fp, r.micro.fn, r.micro.precision, r.micro.recall, r.micro.f1);
    line("macro", r.macro.tp, r.macro.fp, r.macro.fn, r.macro.precision, r.macro.recall, r.macro.f1);
    out << detail::pad("weighted", 52) << detail::pct(r.weighted_f1) << "\n";
  }
  return out.str();
}

}  // namespace nestterm
