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

#include "nestterm/span_algebra.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nestterm {
namespace {

constexpr auto S = TermClass::specific;
constexpr auto C = TermClass::common;

Document doc_with(std::vector<Entity> es) { return {"d", std::string(40, 'x'), std::move(es)}; }

std::multiset<std::tuple<int64_t, int64_t, int>> as_set(const std::vector<Entity>& es) {
  std::multiset<std::tuple<int64_t, int64_t, int>> out;
  for (const auto& e : es) out.emplace(e.start, e.end, static_cast<int>(e.cls));
  return out;
}

TEST(ValidateNesting, CrossingPairIsOneViolation) {
  auto v = validate_nesting(doc_with({{0, 10, S}, {2, 16, S}}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::crossing);
}

TEST(ValidateNesting, ProperContainmentIsValid) {
  EXPECT_TRUE(validate_nesting(doc_with({{0, 16, S}, {0, 10, C}, {11, 16, C}})).empty());
}

TEST(ValidateNesting, SameSpanDifferentClassesIsValidButRepeatedTripleIsNot) {
  EXPECT_TRUE(is_valid(doc_with({{0, 10, S}, {0, 10, C}})));
  auto v = validate_nesting(doc_with({{0, 10, S}, {0, 10, S}}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::duplicate);
}

TEST(ValidateNesting, OutOfRangeSpans) {
  for (Entity e : {Entity{-1, 3, S}, Entity{5, 5, S}, Entity{30, 41, S}, Entity{7, 2, S}}) {
    auto v = validate_nesting(doc_with({e}));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::out_of_range);
    EXPECT_NE(v[0].message().find("invalid span"), std::string::npos);
  }
}

TEST(ValidateNesting, AgreesWithPairwiseOracleOnLargeMessyDocuments) {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const Document d = testing::random_messy_doc(rng, "m", 200);
    const auto v = validate_nesting(d);
    const auto bf = testing::bf_violations(d, static_cast<int64_t>(utf8::length(d.text)));
    size_t oor = 0, dup = 0;
    std::multiset<std::tuple<int64_t, int64_t, int64_t, int64_t>> cross;
    for (const auto& x : v) {
      if (x.kind == Violation::Kind::out_of_range) ++oor;
      if (x.kind == Violation::Kind::duplicate) ++dup;
      if (x.kind == Violation::Kind::crossing) {
        auto a = std::pair(x.first.start, x.first.end), b = std::pair(x.second->start, x.second->end);
        if (b < a) std::swap(a, b);
        cross.emplace(a.first, a.second, b.first, b.second);
      }
    }
    ASSERT_EQ(oor, bf.out_of_range);
    ASSERT_EQ(dup, bf.duplicates);
    ASSERT_EQ(cross, bf.crossings);
    ASSERT_EQ(v.empty(), bf.out_of_range == 0 && bf.duplicates == 0 && bf.crossings.empty());
  }
}

TEST(NestingLevel, OutermostIsOneAndChildIsTwo) {
  const Document d = doc_with({{0, 16, S}, {0, 10, C}, {2, 5, C}, {20, 30, S}});
  EXPECT_EQ(nesting_level({0, 16, S}, d), 1);
  EXPECT_EQ(nesting_level({0, 10, C}, d), 2);
  EXPECT_EQ(nesting_level({2, 5, C}, d), 3);
  EXPECT_EQ(nesting_level({20, 30, S}, d), 1);
  EXPECT_THROW(nesting_level({1, 2, S}, d), Error);
}

TEST(NestingLevel, SameSpanClassesShareALevel) {
  const Document d = doc_with({{0, 16, S}, {0, 16, C}, {0, 10, C}});
  EXPECT_EQ(nesting_level({0, 16, S}, d), 1);
  EXPECT_EQ(nesting_level({0, 16, C}, d), 1);
  EXPECT_EQ(nesting_level({0, 10, C}, d), 2);
}

TEST(NestingLevel, AgreesWithContainerCounting) {
  Rng rng(22);
  for (int i = 0; i < 300; ++i) {
    const Document d = testing::random_nested_doc(rng, "n", 30);
    const auto levels = nesting_levels(d);
    for (size_t k = 0; k < d.entities.size(); ++k) {
      ASSERT_EQ(levels[k], testing::bf_level(d.entities[k], d.entities));
    }
  }
}

TEST(OutermostProjection, DropsContainedEntities) {
  const Document d = doc_with({{0, 16, S}, {0, 10, C}, {18, 28, C}});
  EXPECT_EQ(as_set(outermost_projection(d).entities), as_set({{0, 16, S}, {18, 28, C}}));
  EXPECT_EQ(as_set(inner_set(d)), as_set({{0, 10, C}}));
}

TEST(OutermostProjection, FlatDocumentIsFixedPoint) {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const Document d = testing::random_flat_doc(rng, "f", 10);
    EXPECT_EQ(outermost_projection(d).entities, d.entities);
    EXPECT_TRUE(inner_set(d).empty());
  }
}

TEST(OutermostProjection, RejectsInvalidDocuments) {
  EXPECT_THROW(outermost_projection(doc_with({{0, 10, S}, {2, 16, S}})), Error);
  EXPECT_THROW(inner_set(doc_with({{0, 10, S}, {0, 10, S}})), Error);
}

TEST(OutermostProjection, PropertiesAgainstOracle) {
  Rng rng(24);
  for (int i = 0; i < 300; ++i) {
    const Document d = testing::random_nested_doc(rng, "p", 30);
    const auto outer = outermost_projection(d).entities;
    const auto inner = inner_set(d);
    ASSERT_EQ(as_set(outer), as_set(testing::bf_outermost(d.entities)));
    ASSERT_EQ(as_set(inner), as_set(testing::bf_inner(d.entities)));
    // Partition, idempotence, and level correspondence.
    ASSERT_EQ(outer.size() + inner.size(), d.entities.size());
    const Document projected{d.id, d.text, outer};
    ASSERT_EQ(outermost_projection(projected).entities, outer);
    for (const auto& e : outer) ASSERT_EQ(nesting_level(e, d), 1);
    for (const auto& e : inner) ASSERT_GE(nesting_level(e, d), 2);
  }
}

TEST(Flatten, ProjectsEveryDocument) {
  Rng rng(25);
  const Corpus c = testing::random_corpus(rng, 20, 15);
  const Corpus f = flatten(c);
  ASSERT_EQ(f.size(), c.size());
  for (size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(f[i].id, c[i].id);
    EXPECT_EQ(f[i].text, c[i].text);
    EXPECT_EQ(as_set(f[i].entities), as_set(testing::bf_outermost(c[i].entities)));
  }
}

}  // namespace
}  // namespace nestterm
