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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "nestterm/nestterm.hpp"
#include "support/generators.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace nestterm;

namespace {

constexpr auto S = TermClass::specific;
constexpr auto C = TermClass::common;
constexpr auto N = TermClass::nomen;

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Tuples = std::multiset<std::tuple<int64_t, int64_t, int>>;

Tuples tuples(const std::vector<Entity>& es) {
  Tuples out;
  for (const auto& e : es) out.emplace(e.start, e.end, static_cast<int>(e.cls));
  return out;
}

size_t entity_count(const Corpus& c) {
  size_t n = 0;
  for (const auto& d : c) n += d.entities.size();
  return n;
}

// 1 -------------------------------------------------------------------------

std::string span_algebra_oracles() {
  Rng rng(101);
  size_t entities = 0;
  for (int i = 0; i < 1000; ++i) {
    const Document d = testing::random_nested_doc(rng, "a" + std::to_string(i), 30);
    entities += d.entities.size();
    require(validate_nesting(d).empty(), "valid document flagged: " + d.id);
    require(tuples(outermost_projection(d).entities) == tuples(testing::bf_outermost(d.entities)),
            "outermost mismatch: " + d.id);
    require(tuples(inner_set(d)) == tuples(testing::bf_inner(d.entities)), "inner mismatch: " + d.id);
    const auto levels = nesting_levels(d);
    for (size_t k = 0; k < d.entities.size(); ++k) {
      require(levels[k] == testing::bf_level(d.entities[k], d.entities), "level mismatch: " + d.id);
    }
    // A crossing partner must be caught, matching the pairwise oracle.
    Document broken = testing::random_messy_doc(rng, "m" + std::to_string(i), 30);
    const auto v = validate_nesting(broken);
    const auto bf = testing::bf_violations(broken, static_cast<int64_t>(utf8::length(broken.text)));
    require(v.empty() == (bf.out_of_range == 0 && bf.duplicates == 0 && bf.crossings.empty()),
            "validate_nesting disagrees: " + broken.id);
  }
  return "1000 docs, " + std::to_string(entities) + " entities";
}

// 2 -------------------------------------------------------------------------

std::string reference_counts() {
  const char* path = std::getenv("NESTTERM_RUTERMEVAL_TRAIN");
  if (path && *path) {
    const Corpus gold = load_corpus(path);
    const auto st = corpus_stats(gold);
    require(st.total == 18103 && st.class_counts.at(S) == 12664, "term totals");
    require(st.outermost_total() == 12887, "level-1 count");
    require(st.container_total(S) == 4636 && st.container_total(C) == 776 && st.container_total(N) == 644,
            "container totals");
    const Corpus flat = flatten(gold);
    const auto hits = find_inclusions(flat);
    require(hits.size() == 1296, "inclusion hits " + std::to_string(hits.size()));
    require(entity_count(merge_pseudo(flat, to_candidates(hits)).corpus) == 14183, "merged inclusions");
    const auto lhits = find_lemmatized_inclusions(flat, LemmaTable::default_russian());
    const auto lmerged = entity_count(merge_pseudo(flat, to_candidates(lhits)).corpus);
    require(std::abs(double(lhits.size()) - 3681) <= 0.02 * 3681, "lemma hits " + std::to_string(lhits.size()));
    require(std::abs(double(lmerged) - 16568) <= 0.02 * 16568, "lemma merged " + std::to_string(lmerged));
    const auto dmg = damage_documents(flat, {});
    require(dmg.records.size() == 2053 && entity_count(dmg.docs) == 10834, "damage counts");
    return "RuTermEval train split";
  }
  const Corpus gold = load_corpus(std::string(NESTTERM_TEST_DATA) + "/ru_nested.jsonl");
  const auto st = corpus_stats(gold);
  require(st.total == 13 && st.class_counts.at(S) == 6, "fixture totals");
  require(st.level_totals == std::vector<size_t>{6, 5, 2}, "fixture levels");
  require(st.container_total(S) == 9, "fixture container totals");
  const Corpus flat = flatten(gold);
  const auto hits = find_inclusions(flat);
  require(hits.size() == 1 && entity_count(merge_pseudo(flat, to_candidates(hits)).corpus) == 7, "fixture inclusions");
  const auto lhits = find_lemmatized_inclusions(flat, LemmaTable::default_russian());
  require(lhits.size() == 4 && entity_count(merge_pseudo(flat, to_candidates(lhits)).corpus) == 10,
          "fixture lemma inclusions");
  const auto dmg = damage_documents(flat, {});
  require(dmg.records.size() == 1 && entity_count(dmg.docs) == 5, "fixture damage");
  return "dataset absent (NESTTERM_RUTERMEVAL_TRAIN unset): shipped fixture counts";
}

// 3 -------------------------------------------------------------------------

std::string gradient_check() {
  const Corpus docs = {
      {"a", "Методы синтеза речи и распознавания речи .", {{7, 19, S}, {15, 19, C}}},
      {"b", "Нейронная сеть обучена быстро .", {{0, 14, S}}},
  };
  double worst = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto m = init_model({S, C}, default_descriptions(), testing::gradcheck_config(seed));
    std::vector<PreparedExample> batch;
    for (const auto& d : docs) batch.push_back(prepare_example(d, m));
    for (const auto& [group, err] : testing::gradient_check(m, batch)) {
      require(err.checked > 0, group + " unchecked");
      require(err.max_rel < 1e-4, group + " rel " + fmt("%.3g", err.max_rel) + " seed " + std::to_string(seed));
      worst = std::max(worst, err.max_rel);
    }
  }
  return "10 seeds, max rel " + fmt("%.2e", worst);
}

// 4 -------------------------------------------------------------------------

std::string overfit() {
  const Corpus docs = synthetic::make_fit_corpus(20, 7);
  require(active_classes(docs).size() == 2, "fit corpus must have two classes");
  size_t reached = 0;
  std::string first_bytes;
  for (int rep = 0; rep < 2; ++rep) {
    // Retrain with growing budgets until perfect; 500 is the cap.
    for (size_t epochs : {10, 20, 40, 80, 160, 320, 500}) {
      TaggerConfig cfg;
      cfg.epochs = epochs;
      cfg.seed = 3;
      const auto m = train(docs, default_descriptions(), cfg);
      Corpus pred;
      for (const auto& d : docs) pred.push_back({d.id, d.text, predict(m, d)});
      if (report(docs, pred).micro.f1 == 1.0) {
        const auto bytes = to_json(m).dump();
        if (rep == 0) {
          reached = epochs;
          first_bytes = bytes;
        } else {
          require(epochs == reached && bytes == first_bytes, "second run differs");
        }
        break;
      }
      require(epochs != 500, "F1 below 1.0 after 500 epochs");
    }
  }
  return "F1 = 1.0 at " + std::to_string(reached) + " epochs, identical on rerun";
}

// 5 -------------------------------------------------------------------------

std::string metric_identities() {
  Rng rng(505);
  const std::vector<TermClass> classes = {S, C, N};
  for (int i = 0; i < 1000; ++i) {
    const Corpus gold = testing::random_corpus(rng, 2, 12, false, classes);
    const Corpus pred = testing::perturb(rng, gold, classes);
    for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
      require(report(gold, pred, {false, p, std::nullopt}).micro.f1 >= report(gold, pred, {true, p, std::nullopt}).micro.f1,
              "agnostic below aware");
    }
    const Corpus g1 = testing::random_corpus(rng, 2, 8, false, {C});
    const auto r1 = report(g1, testing::perturb(rng, g1, {C}));
    require(r1.micro.f1 == r1.macro.f1, "single-class micro != macro");
  }
  const auto empty = report(testing::random_corpus(rng, 2, 5), Corpus{});
  require(empty.micro.precision == 0 && empty.micro.recall == 0 && empty.micro.f1 == 0, "zero convention");
  for (const auto& m : empty.per_class) require(m.precision == 0 && m.f1 == 0, "zero convention per class");
  for (int i = 0; i < 100; ++i) {
    const Corpus gold = testing::random_corpus(rng, 3, 10, false, classes);
    const Corpus pred = testing::perturb(rng, gold, classes);
    for (bool aware : {true, false}) {
      for (auto [p, bp] : {std::pair(Partition::overall, testing::BfPart::overall),
                           std::pair(Partition::inner, testing::BfPart::inner),
                           std::pair(Partition::outer, testing::BfPart::outer)}) {
        const auto r = report(gold, pred, {aware, p, std::nullopt});
        const auto bf = testing::bf_report(gold, pred, aware, bp);
        require(r.per_class.size() == bf.per_class.size(), "class set");
        for (const auto& m : r.per_class) {
          const auto& cell = bf.per_class.at(aware ? static_cast<int>(m.cls) : -1);
          require(m.tp == cell.tp && m.fp == cell.fp && m.fn == cell.fn, "per-class counts");
          require(std::abs(m.f1 - testing::bf_f1(cell)) < 1e-12, "per-class F1");
        }
        require(std::abs(r.micro.f1 - testing::bf_f1(bf.micro)) < 1e-12, "micro F1");
        require(std::abs(r.macro.f1 - bf.macro_f1) < 1e-12, "macro F1");
        require(std::abs(r.weighted_f1 - bf.weighted_f1) < 1e-12, "weighted F1");
        require(std::abs(r.doc_macro_f1 - bf.doc_macro_f1) < 1e-12, "doc-macro F1");
      }
    }
  }
  return "1000 random pairs, 100 brute-force fixtures";
}

// 6 -------------------------------------------------------------------------

std::string benchmark() {
  const std::vector<std::string> names = {"pure-flat", "inclusions", "lemm-inclusions", "lemm-inc+early-dmg"};
  std::map<std::string, double> mean;
  for (uint64_t seed : {1, 2, 3}) {
    const auto bm = synthetic::make_benchmark(seed);
    ExperimentConfig cfg;
    cfg.lemma_table = synthetic::lemma_table();
    for (const auto& name : names) {
      const auto r = run_experiment(find_preset(name), bm.train, bm.dev, cfg, seed);
      const double f1 = find_report(r, Partition::inner).micro.f1;
      std::printf("    seed %llu %-20s inner F1 %6.2f%%\n", static_cast<unsigned long long>(seed), name.c_str(),
                  100 * f1);
      std::fflush(stdout);
      mean[name] += f1 / 3;
    }
  }
  const double flat = mean["pure-flat"], inc = mean["inclusions"], lemm = mean["lemm-inclusions"],
               early = mean["lemm-inc+early-dmg"];
  std::string summary = "inner F1 %: pure-flat " + fmt("%.2f", 100 * flat) + ", inclusions " + fmt("%.2f", 100 * inc) +
                        ", lemm-inclusions " + fmt("%.2f", 100 * lemm) + ", lemm-inc+early-dmg " +
                        fmt("%.2f", 100 * early);
  require(flat < inc && inc <= lemm && flat < early, "ordering violated: " + summary);
  require(flat < 0.05, "pure-flat too high: " + summary);
  require(lemm > 0.25, "lemm-inclusions too low: " + summary);
  return summary;
}

// 7 -------------------------------------------------------------------------

int shell(const std::string& args) {
  const std::string cmd = std::string(NESTTERM_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "missing " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string replay() {
  const fs::path work = fs::absolute("acceptance_replay");
  fs::remove_all(work);
  fs::create_directories(work);
  require(shell("generate --kind benchmark --docs 40 --dev-docs 10 --seed 9 --out-dir " + (work / "data").string()) == 0,
          "generate failed");
  {
    std::ofstream cfg(work / "config.json");
    cfg << R"({"tagger":{"epochs":3,"buckets":2048,"dim":12,"proj_dim":12},"damage_cv":{"k":3},)"
        << R"("lemma_table":"data/lemma_table.tsv"})";
  }
  size_t files = 0;
  for (const auto& p : presets()) {
    const std::string base = "--quiet --config " + (work / "config.json").string() + " experiment --preset " + p.name +
                             " --seed 17 --train " + (work / "data/train.jsonl").string() + " --dev " +
                             (work / "data/dev.jsonl").string() + " --run-dir ";
    const fs::path a = work / (p.name + "-a"), b = work / (p.name + "-b"), c = work / (p.name + "-replay");
    require(shell(base + a.string()) == 0, p.name + ": first run failed");
    require(shell(base + b.string()) == 0, p.name + ": second run failed");
    require(shell("--quiet experiment --manifest " + (a / "manifest.json").string() + " --run-dir " + c.string()) == 0,
            p.name + ": replay failed");
    auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    for (const auto& [key, name] : manifest.at("outputs").items()) {
      const auto ref = slurp(a / name.get<std::string>());
      require(ref == slurp(b / name.get<std::string>()), p.name + ": rerun differs in " + key);
      require(ref == slurp(c / name.get<std::string>()), p.name + ": replay differs in " + key);
      ++files;
    }
    for (const fs::path& other : {b, c}) {
      auto m2 = nlohmann::json::parse(slurp(other / "manifest.json"));
      manifest.erase("wall_clock_seconds");
      m2.erase("wall_clock_seconds");
      require(manifest == m2, p.name + ": manifests differ beyond wall clock");
    }
  }
  fs::remove_all(work);
  return "8 presets x 3 runs, " + std::to_string(files) + " artifacts byte-identical";
}

// 8 -------------------------------------------------------------------------

std::string damage_exactness() {
  Rng rng(808);
  size_t damaged = 0, spans = 0;
  const std::vector<Corpus> corpora = {
      flatten(load_corpus(std::string(NESTTERM_TEST_DATA) + "/ru_nested.jsonl")),
      flatten(synthetic::make_benchmark(4, 100, 1).train),
  };
  std::vector<Corpus> all = corpora;
  for (int i = 0; i < 50; ++i) all.push_back(testing::random_corpus(rng, 10, 8, true));
  for (size_t round = 0; round < all.size(); ++round) {
    const Corpus& c = all[round];
    DamageOptions o;
    o.seed = round;
    const auto r = damage_documents(c, o);
    size_t long_ones = 0;
    for (const auto& d : c) {
      const auto tokens = tokenize(d.text);
      for (const auto& e : d.entities) {
        auto span = token_range(tokens, e);
        if (span && span->second - span->first + 1 >= 3) ++long_ones;
      }
    }
    require(r.records.size() == long_ones, "damaged count != long entity count");
    damaged += long_ones;
    for (size_t i = 0; i < c.size(); ++i) {
      const auto before = tokenize(c[i].text), after = tokenize(r.docs[i].text);
      require(before.size() == after.size(), "token count changed");
      std::vector<DamageRecord> recs;
      for (const auto& rec : r.records) {
        if (rec.doc_id == c[i].id) recs.push_back(rec);
      }
      size_t differing = 0;
      for (size_t t = 0; t < before.size(); ++t) differing += before[t].surface != after[t].surface;
      require(differing == recs.size(), "document " + c[i].id + " differs by wrong token count");
      for (size_t a = 0; a < after.size(); ++a) {
        for (size_t b = a; b < after.size() && b < a + 5; ++b) {
          bool touches = false;
          for (size_t t = a; t <= b; ++t) touches = touches || before[t].surface != after[t].surface;
          if (touches) continue;
          const Entity span{after[a].start, after[b].end, S};
          const auto back = remap_to_original(span, recs);
          require(back.has_value(), "undamaged span not remapped");
          require(surface(*back, c[i]) == surface(span, r.docs[i]), "remapped surface differs");
          ++spans;
        }
      }
    }
  }
  return std::to_string(damaged) + " damaged entities, " + std::to_string(spans) + " remapped spans";
}

}  // namespace

int main() {
  const std::vector<std::tuple<int, std::string, double, std::function<std::string()>>> criteria = {
      {1, "span-algebra oracle equivalence", 10, span_algebra_oracles},
      {2, "reference-count reproduction", 0, reference_counts},
      {3, "gradient check", 30, gradient_check},
      {4, "overfit harness", 60, overfit},
      {5, "metric identities", 0, metric_identities},
      {6, "directional flat-supervision benchmark", 600, benchmark},
      {7, "determinism and replay", 0, replay},
      {8, "damage protocol exactness", 0, damage_exactness},
  };
  int failures = 0;
  for (const auto& [id, name, budget, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = fn();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && budget > 0 && secs >= budget) {
      ok = false;
      detail += "; over time budget of " + fmt("%.0f", budget) + " s";
    }
    failures += !ok;
    std::printf("%s [%d] %s: %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
