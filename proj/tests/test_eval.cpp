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

#include <gtest/gtest.h>

#include "nestterm/eval.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nestterm {
namespace {

constexpr auto S = TermClass::specific;
constexpr auto C = TermClass::common;
constexpr auto N = TermClass::nomen;

using testing::BfPart;

const std::string kText = "alpha beta gamma delta epsilon";

Corpus one(std::vector<Entity> es) { return {{"d", kText, std::move(es)}}; }

BfPart to_bf(Partition p) {
  return p == Partition::overall ? BfPart::overall : p == Partition::inner ? BfPart::inner : BfPart::outer;
}

void expect_matches_oracle(const Corpus& gold, const Corpus& pred, bool aware, Partition p) {
  const auto r = report(gold, pred, {aware, p, std::nullopt});
  const auto bf = testing::bf_report(gold, pred, aware, to_bf(p));
  ASSERT_EQ(r.per_class.size(), bf.per_class.size());
  for (const auto& m : r.per_class) {
    const auto& cell = bf.per_class.at(aware ? static_cast<int>(m.cls) : -1);
    EXPECT_EQ(m.tp, cell.tp);
    EXPECT_EQ(m.fp, cell.fp);
    EXPECT_EQ(m.fn, cell.fn);
    EXPECT_NEAR(m.f1, testing::bf_f1(cell), 1e-12);
  }
  EXPECT_EQ(r.micro.tp, bf.micro.tp);
  EXPECT_EQ(r.micro.fp, bf.micro.fp);
  EXPECT_EQ(r.micro.fn, bf.micro.fn);
  EXPECT_NEAR(r.micro.f1, testing::bf_f1(bf.micro), 1e-12);
  EXPECT_NEAR(r.macro.precision, bf.macro_p, 1e-12);
  EXPECT_NEAR(r.macro.recall, bf.macro_r, 1e-12);
  EXPECT_NEAR(r.macro.f1, bf.macro_f1, 1e-12);
  EXPECT_NEAR(r.weighted_f1, bf.weighted_f1, 1e-12);
  EXPECT_NEAR(r.doc_macro_f1, bf.doc_macro_f1, 1e-12);
}

TEST(MatchExact, ClassAwareVersusAgnostic) {
  const std::vector<Entity> g = {{0, 10, C}}, p = {{0, 10, S}};
  EXPECT_EQ(match_exact(g, p, true).tp.size(), 0u);
  EXPECT_EQ(match_exact(g, p, false).tp.size(), 1u);
}

TEST(MatchExact, EachEntityUsedOnce) {
  // Two gold labels on one span, one prediction: agnostic matching pairs one.
  const std::vector<Entity> g = {{0, 5, S}, {0, 5, C}}, p = {{0, 5, N}};
  const auto m = match_exact(g, p, false);
  EXPECT_EQ(m.tp.size(), 1u);
  EXPECT_EQ(m.fn.size(), 1u);
  EXPECT_EQ(m.fp.size(), 0u);
}

TEST(MatchExact, IdentityIsAllTruePositives) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto d = testing::random_nested_doc(rng, "d", 12);
    const auto m = match_exact(d.entities, d.entities, true);
    EXPECT_EQ(m.tp.size(), d.entities.size());
    EXPECT_TRUE(m.fp.empty() && m.fn.empty());
  }
}

TEST(Report, PerfectPredictions) {
  const Corpus g = one({{0, 10, S}, {6, 10, C}, {11, 16, N}});
  for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
    const auto r = report(g, g, {true, p, std::nullopt});
    for (const auto& m : r.per_class) {
      if (m.tp + m.fn == 0) continue;  // class absent from this partition
      EXPECT_EQ(m.f1, 1.0);
    }
    EXPECT_EQ(r.micro.precision, 1.0);
    EXPECT_EQ(r.micro.recall, 1.0);
    EXPECT_EQ(r.micro.f1, 1.0);
  }
}

TEST(Report, EmptyPredictionsFollowZeroConvention) {
  const Corpus g = one({{0, 10, S}});
  const auto r = report(g, one({}));
  EXPECT_EQ(r.micro.precision, 0.0);
  EXPECT_EQ(r.micro.recall, 0.0);
  EXPECT_EQ(r.micro.f1, 0.0);
  const auto e = report(one({}), one({}));
  EXPECT_TRUE(e.per_class.empty());
  EXPECT_EQ(e.micro.f1, 0.0);
  EXPECT_EQ(e.doc_macro_f1, 0.0);
  EXPECT_EQ(make_metrics(S, 0, 0, 0).f1, 0.0);
}

TEST(Report, InnerAndOuterUseOwnSideContainment) {
  const Corpus g = one({{0, 10, S}, {6, 10, C}});
  // The prediction has only the inner span, so on its side it is outermost.
  const Corpus p = one({{6, 10, C}});
  EXPECT_EQ(report(g, p, {true, Partition::inner, std::nullopt}).micro.tp, 0u);
  const auto outer = report(g, p, {true, Partition::outer, std::nullopt});
  EXPECT_EQ(outer.micro.tp, 0u);
  EXPECT_EQ(outer.micro.fp, 1u);
  EXPECT_EQ(outer.micro.fn, 1u);
}

TEST(Report, Errors) {
  EXPECT_THROW(report(one({}), Corpus{{"zzz", kText, {}}}), Error);
  std::map<TermClass, double> w = {{S, 0.5}, {C, 0.4}};
  EXPECT_THROW(report(one({{0, 5, S}}), one({}), {true, Partition::overall, w}), Error);
  w[C] = 0.5;
  EXPECT_NO_THROW(report(one({{0, 5, S}}), one({}), {true, Partition::overall, w}));
}

TEST(Report, ExplicitWeights) {
  const Corpus g = one({{0, 5, S}, {6, 10, C}});
  const Corpus p = one({{0, 5, S}});
  const auto r = report(g, p, {true, Partition::overall, std::map<TermClass, double>{{S, 0.25}, {C, 0.75}}});
  EXPECT_DOUBLE_EQ(r.weighted_f1, 0.25);
  // Default: gold support shares, here one half each.
  EXPECT_DOUBLE_EQ(report(g, p).weighted_f1, 0.5);
}

TEST(Report, MissingPredictionDocumentCountsAsEmpty) {
  const Corpus g = {{"a", kText, {{0, 5, S}}}, {"b", kText, {{0, 5, S}}}};
  const Corpus p = {{"a", kText, {{0, 5, S}}}};
  const auto r = report(g, p);
  EXPECT_EQ(r.micro.tp, 1u);
  EXPECT_EQ(r.micro.fn, 1u);
  EXPECT_DOUBLE_EQ(r.doc_macro_f1, 0.5);
}

TEST(Report, AgreesWithBruteForceScorer) {
  Rng rng(2);
  const std::vector<TermClass> classes = {S, C, N};
  for (int i = 0; i < 100; ++i) {
    const Corpus gold = testing::random_corpus(rng, 3, 10, false, classes);
    const Corpus pred = testing::perturb(rng, gold, classes);
    for (bool aware : {true, false}) {
      for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
        expect_matches_oracle(gold, pred, aware, p);
      }
    }
  }
}

TEST(Report, AgnosticNeverBelowAware) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const Corpus gold = testing::random_corpus(rng, 2, 10);
    const Corpus pred = testing::perturb(rng, gold, {S, C, N});
    for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
      EXPECT_GE(report(gold, pred, {false, p, std::nullopt}).micro.f1,
                report(gold, pred, {true, p, std::nullopt}).micro.f1);
    }
  }
}

TEST(Report, SingleClassMicroEqualsMacro) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Corpus gold = testing::random_corpus(rng, 2, 8, false, {C});
    const Corpus pred = testing::perturb(rng, gold, {C});
    const auto r = report(gold, pred);
    EXPECT_EQ(r.micro.f1, r.macro.f1);
  }
}

TEST(Report, InnerPlusOuterBoundedByOverall) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Corpus gold = testing::random_corpus(rng, 2, 10);
    const Corpus pred = testing::perturb(rng, gold, {S, C, N});
    const auto tp = [&](Partition p) { return report(gold, pred, {true, p, std::nullopt}).micro.tp; };
    EXPECT_LE(tp(Partition::inner) + tp(Partition::outer), tp(Partition::overall));
  }
}

TEST(Report, InvariantUnderReordering) {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    Corpus gold = testing::random_corpus(rng, 4, 10);
    Corpus pred = testing::perturb(rng, gold, {S, C, N});
    const auto before = to_json(report(gold, pred)).dump();
    rng.shuffle(gold);
    rng.shuffle(pred);
    for (auto& d : pred) rng.shuffle(d.entities);
    for (auto& d : gold) rng.shuffle(d.entities);
    EXPECT_EQ(to_json(report(gold, pred)).dump(), before);
  }
}

TEST(Scoreboard, Tracks) {
  const Corpus g = one({{0, 5, S}, {6, 10, C}});
  EXPECT_EQ(scoreboard(g, g, 1).primary, 1.0);
  const auto perfect = scoreboard(g, g, 2);
  EXPECT_EQ(perfect.primary, 1.0);
  EXPECT_EQ(perfect.class_agnostic_f1, 1.0);
  const Corpus wrong = one({{0, 5, C}, {6, 10, S}});
  const auto s = scoreboard(g, wrong, 2);
  EXPECT_EQ(s.primary, 0.0);
  EXPECT_EQ(s.class_agnostic_f1, 1.0);
  EXPECT_EQ(scoreboard(g, wrong, 1).primary, 1.0);
  EXPECT_THROW(scoreboard(g, g, 4), Error);
  EXPECT_THROW(scoreboard(g, g, 0), Error);
}

TEST(RenderText, HasOneRowPerMode) {
  const Corpus g = one({{0, 10, S}, {6, 10, C}});
  std::vector<EvalReport> rs;
  for (bool aware : {true, false}) {
    for (Partition p : {Partition::overall, Partition::inner, Partition::outer}) {
      rs.push_back(report(g, g, {aware, p, std::nullopt}));
    }
  }
  const auto text = render_text(rs);
  EXPECT_NE(text.find("class-aware"), std::string::npos);
  EXPECT_NE(text.find("class-agnostic"), std::string::npos);
  EXPECT_NE(text.find("100.00"), std::string::npos);
  EXPECT_NE(text.find("inner"), std::string::npos);
}

TEST(WeightsJson, ParsesClassNames) {
  const auto w = weights_from_json(nlohmann::json::parse(R"({"specific":0.7,"common":0.3})"));
  EXPECT_EQ(w.at(S), 0.7);
  EXPECT_EQ(w.at(C), 0.3);
  EXPECT_THROW(weights_from_json(nlohmann::json::parse(R"({"bogus":1})")), Error);
}

}  // namespace
}  // namespace nestterm
