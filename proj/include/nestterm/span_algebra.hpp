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

// Outermost projection and inner/outer partitioning of nested labelings.

#include <string>
#include <vector>

#include "nestterm/corpus.hpp"

namespace nestterm {

/// Pairwise-disjoint labeling of one document.
struct FlatView {
  std::string doc_id;
  std::vector<Entity> entities;
};

struct InnerOuterPartition {
  std::vector<Entity> outer;
  std::vector<Entity> inner;
};

namespace detail {

// Flags entities that are strictly contained in another one. Assumes the
// set is crossing-free; identical spans never contain each other.
inline std::vector<bool> contained_flags(const std::vector<Entity>& es) {
  std::vector<size_t> order(es.size());
  for (size_t i = 0; i < es.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return canonical_less(es[a], es[b]); });
  std::vector<bool> inner(es.size(), false);
  bool have_top = false;
  int64_t top_start = 0, top_end = 0;
  for (size_t idx : order) {
    const Entity& e = es[idx];
    if (have_top && e.start < top_end) {
      inner[idx] = !(e.start == top_start && e.end == top_end);
    } else {
      have_top = true;
      top_start = e.start;
      top_end = e.end;
    }
  }
  return inner;
}

inline void require_crossing_free(const std::vector<Entity>& es, const std::string& what) {
  std::vector<Entity> sorted = es;
  sort_canonical(sorted);
  std::vector<const Entity*> open;
  for (const auto& e : sorted) {
    std::erase_if(open, [&](const Entity* a) { return a->end <= e.start; });
    for (const Entity* a : open) {
      if (a->start < e.start && a->end < e.end) {
        throw Error(what + ": crossing spans " + describe(*a) + " and " + describe(e));
      }
    }
    open.push_back(&e);
  }
}

}  // namespace detail

inline InnerOuterPartition partition_inner_outer(const std::vector<Entity>& entities) {
  detail::require_crossing_free(entities, "entity set");
  auto flags = detail::contained_flags(entities);
  InnerOuterPartition p;
  for (size_t i = 0; i < entities.size(); ++i) {
    (flags[i] ? p.inner : p.outer).push_back(entities[i]);
  }
  return p;
}

inline FlatView outermost_projection(const Document& doc) {
  auto violations = validate_nesting(doc);
  if (!violations.empty()) {
    throw Error("document '" + doc.id + "' is not a valid nested labeling: " + violations.front().message());
  }
  return {doc.id, partition_inner_outer(doc.entities).outer};
}

inline std::vector<Entity> inner_set(const Document& doc) {
  auto violations = validate_nesting(doc);
  if (!violations.empty()) {
    throw Error("document '" + doc.id + "' is not a valid nested labeling: " + violations.front().message());
  }
  return partition_inner_outer(doc.entities).inner;
}

/// Corpus-level projection used by every flat-supervision pipeline.
inline Corpus flatten(const Corpus& docs) {
  Corpus out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    out.push_back({d.id, d.text, outermost_projection(d).entities});
  }
  return out;
}

}  // namespace nestterm
