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

// Damaged cross-prediction: K document folds, removal and corruption of long
// flat entities, K train/predict rounds, and the harvest of held-out
// predictions as pseudo-labels.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"
#include "nestterm/pseudolabel.hpp"
#include "nestterm/rng.hpp"
#include "nestterm/tagger.hpp"

namespace nestterm {

struct FoldPlan {
  size_t k = 0;
  uint64_t seed = 0;
  std::map<std::string, size_t> assignment;

  size_t fold_of(const std::string& doc_id) const {
    auto it = assignment.find(doc_id);
    if (it == assignment.end()) throw Error("document '" + doc_id + "' has no fold");
    return it->second;
  }
  std::vector<size_t> fold_sizes() const {
    std::vector<size_t> sizes(k, 0);
    for (const auto& [id, f] : assignment) ++sizes[f];
    return sizes;
  }
};

/// Seeded shuffle of the documents, then round-robin over folds, so sizes
/// differ by at most one.
inline FoldPlan make_folds(const Corpus& corpus, size_t k, uint64_t seed) {
  if (k < 2) throw Error("fold count must be at least 2");
  if (corpus.empty()) throw Error("cannot fold an empty corpus");
  if (k > corpus.size()) {
    throw Error("fold count " + std::to_string(k) + " exceeds document count " + std::to_string(corpus.size()));
  }
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(order);
  FoldPlan plan{k, seed, {}};
  for (size_t pos = 0; pos < order.size(); ++pos) {
    if (!plan.assignment.emplace(corpus[order[pos]].id, pos % k).second) {
      throw Error("duplicate document id '" + corpus[order[pos]].id + "'");
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Damage

enum class ReplacementPolicy { same_length, mask, vocabulary };

inline ReplacementPolicy parse_replacement_policy(std::string_view s) {
  if (s == "same-length") return ReplacementPolicy::same_length;
  if (s == "mask") return ReplacementPolicy::mask;
  if (s == "vocabulary") return ReplacementPolicy::vocabulary;
  throw Error("unknown replacement policy '" + std::string(s) + "'");
}

inline std::string_view to_string(ReplacementPolicy p) {
  switch (p) {
    case ReplacementPolicy::same_length: return "same-length";
    case ReplacementPolicy::mask: return "mask";
    case ReplacementPolicy::vocabulary: return "vocabulary";
  }
  return "?";
}

struct DamageOptions {
  size_t min_word_len = 3;
  uint64_t seed = 0;
  ReplacementPolicy policy = ReplacementPolicy::same_length;
  std::string mask = "xxxx";
};

struct DamageRecord {
  std::string doc_id;
  Entity original;
  size_t token_index = 0;  // within the entity
  std::string original_surface;
  std::string replacement;
  int64_t offset = 0;  // start of the replaced token in the original text
  int64_t delta = 0;   // replacement length minus original length

  int64_t original_length() const { return static_cast<int64_t>(utf8::length(original_surface)); }
  int64_t replacement_length() const { return original_length() + delta; }
};

inline nlohmann::ordered_json to_json(const DamageRecord& r) {
  return {{"doc", r.doc_id},
          {"entity", {{"start", r.original.start}, {"end", r.original.end}, {"class", to_string(r.original.cls)}}},
          {"token_index", r.token_index},
          {"original", r.original_surface},
          {"replacement", r.replacement},
          {"offset", r.offset},
          {"delta", r.delta}};
}

struct DamageResult {
  Corpus docs;
  std::vector<DamageRecord> records;
};

namespace detail {

inline std::string pseudo_word(std::u32string_view original, Rng& rng) {
  const bool cyr = !original.empty() && utf8::is_cyrillic(original[0]);
  const char32_t base = cyr ? 0x430 : U'a';
  const size_t span = cyr ? 32 : 26;
  std::u32string folded;
  for (char32_t c : original) folded.push_back(utf8::fold_case(c));
  std::u32string w(original.size(), U'a');
  do {
    for (auto& c : w) c = base + static_cast<char32_t>(rng.index(span));
  } while (w == folded);
  return utf8::encode(w);
}

inline std::vector<std::string> vocabulary(const Corpus& docs) {
  std::set<std::string> v;
  for (const auto& d : docs) {
    for (const auto& t : tokenize(d.text)) v.insert(t.surface);
  }
  return {v.begin(), v.end()};
}

}  // namespace detail

/// Unlabels every entity of at least `min_word_len` tokens and replaces one
/// uniformly chosen token of it. Randomness is keyed by (seed, document id),
/// so a document is damaged identically whichever batch it arrives in.
inline DamageResult damage_documents(const Corpus& docs, const DamageOptions& opts) {
  if (opts.policy == ReplacementPolicy::mask) {
    auto t = tokenize(opts.mask);
    if (t.size() != 1 || t[0].start != 0 || t[0].end != static_cast<int64_t>(utf8::length(opts.mask))) {
      throw Error("mask word must be a single token");
    }
  }
  std::vector<std::string> vocab;
  if (opts.policy == ReplacementPolicy::vocabulary) vocab = detail::vocabulary(docs);

  DamageResult out;
  for (const auto& doc : docs) {
    if (!is_flat(doc)) throw Error("damage needs flat input; document '" + doc.id + "' has overlapping entities");
    const std::u32string cps = utf8::decode(doc.text);
    const auto tokens = tokenize(std::u32string_view(cps));
    Rng rng(derive_seed(opts.seed, doc.id));
    std::vector<Entity> ordered = doc.entities;
    sort_canonical(ordered);

    std::vector<DamageRecord> recs;
    std::vector<bool> removed_flag;
    for (const auto& e : ordered) {
      auto r = token_range(tokens, e);
      const size_t words = r ? r->second - r->first + 1 : 0;
      if (!r || words < opts.min_word_len) continue;
      const size_t pick = rng.index(words);
      const TokenSpan& tok = tokens[r->first + pick];
      const auto orig = std::u32string_view(cps).substr(tok.start, tok.end - tok.start);
      std::string repl;
      switch (opts.policy) {
        case ReplacementPolicy::same_length: repl = detail::pseudo_word(orig, rng); break;
        case ReplacementPolicy::mask: repl = opts.mask; break;
        case ReplacementPolicy::vocabulary: {
          if (vocab.size() < 2) throw Error("vocabulary replacement needs at least two distinct tokens");
          do {
            repl = vocab[rng.index(vocab.size())];
          } while (repl == tok.surface);
          break;
        }
      }
      DamageRecord rec;
      rec.doc_id = doc.id;
      rec.original = e;
      rec.token_index = pick;
      rec.original_surface = tok.surface;
      rec.replacement = repl;
      rec.offset = tok.start;
      rec.delta = static_cast<int64_t>(utf8::length(repl)) - static_cast<int64_t>(orig.size());
      recs.push_back(std::move(rec));
    }

    Document damaged{doc.id, {}, {}};
    std::u32string text;
    int64_t cursor = 0;
    for (const auto& rec : recs) {
      text.append(cps, cursor, rec.offset - cursor);
      text += utf8::decode(rec.replacement);
      cursor = rec.offset + rec.original_length();
    }
    text.append(cps, cursor, std::u32string::npos);
    damaged.text = utf8::encode(text);
    auto shift_at = [&](int64_t pos) {
      int64_t s = 0;
      for (const auto& rec : recs) {
        if (rec.offset + rec.original_length() <= pos) s += rec.delta;
      }
      return s;
    };
    for (const auto& e : doc.entities) {
      bool gone = std::any_of(recs.begin(), recs.end(), [&](const DamageRecord& r) { return r.original.same_triple(e); });
      if (gone) continue;
      Entity moved = e;
      moved.start += shift_at(e.start);
      moved.end += shift_at(e.end);
      damaged.entities.push_back(moved);
    }
    out.docs.push_back(std::move(damaged));
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  return out;
}

/// Maps a span on damaged text back to the original text. Spans touching a
/// replaced token have no original surface and map to nullopt.
inline std::optional<Entity> remap_to_original(const Entity& e, const std::vector<DamageRecord>& doc_records) {
  int64_t shift_before_start = 0;
  int64_t shift = 0;  // cumulative delta of records already passed
  for (const auto& r : doc_records) {
    const int64_t dstart = r.offset + shift;
    const int64_t dend = dstart + r.replacement_length();
    if (e.start < dend && dstart < e.end) return std::nullopt;
    if (dend <= e.start) shift_before_start += r.delta;
    shift += r.delta;
  }
  // No record lies inside the span, so both ends shift alike.
  Entity out = e;
  out.start -= shift_before_start;
  out.end -= shift_before_start;
  return out;
}

// ---------------------------------------------------------------------------
// Cross-prediction

enum class DamageMode { early, late };

inline DamageMode parse_damage_mode(std::string_view s) {
  if (s == "early") return DamageMode::early;
  if (s == "late") return DamageMode::late;
  throw Error("unknown damage mode '" + std::string(s) + "'");
}

inline std::string_view to_string(DamageMode m) { return m == DamageMode::early ? "early" : "late"; }

struct CrossPredictionOptions {
  size_t k = 5;
  DamageMode mode = DamageMode::early;
  uint64_t seed = 0;
  size_t min_word_len = 3;
  ReplacementPolicy policy = ReplacementPolicy::same_length;
};

struct CrossPredictionResult {
  FoldPlan plan;
  std::vector<Candidate> predictions;   // provenance damage-cv
  std::vector<DamageRecord> records;    // one set per damaged document
  std::vector<Corpus> training_sets;    // per fold, as fed to the trainer
  std::vector<Corpus> prediction_sets;  // per fold, as fed to the predictor
};

inline CrossPredictionResult run_cross_prediction(const Corpus& corpus, const CrossPredictionOptions& opts,
                                                  const Trainer& trainer) {
  for (const auto& d : corpus) {
    if (!is_valid(d) || !is_flat(d)) throw Error("cross-prediction needs a flat valid corpus; document '" + d.id + "'");
  }
  CrossPredictionResult res;
  res.plan = make_folds(corpus, opts.k, derive_seed(opts.seed, "folds"));
  const DamageOptions dmg{opts.min_word_len, derive_seed(opts.seed, "damage"), opts.policy, "xxxx"};
  std::set<std::string> recorded;
  auto keep_records = [&](const std::vector<DamageRecord>& recs) {
    std::set<std::string> fresh;
    for (const auto& r : recs) {
      if (!recorded.count(r.doc_id)) {
        res.records.push_back(r);
        fresh.insert(r.doc_id);
      }
    }
    recorded.insert(fresh.begin(), fresh.end());
  };

  for (size_t fold = 0; fold < opts.k; ++fold) {
    Corpus train_docs, held_out;
    for (const auto& d : corpus) (res.plan.fold_of(d.id) == fold ? held_out : train_docs).push_back(d);
    const uint64_t fold_seed = derive_seed(opts.seed, fold);
    try {
      if (opts.mode == DamageMode::early) {
        auto damaged = damage_documents(train_docs, dmg);
        keep_records(damaged.records);
        Predictor predict_fn = trainer(damaged.docs, fold_seed);
        for (const auto& d : held_out) {
          for (Entity e : predict_fn(d)) {
            e.provenance = Provenance::damage_cv;
            res.predictions.push_back({d.id, e});
          }
        }
        res.training_sets.push_back(std::move(damaged.docs));
        res.prediction_sets.push_back(std::move(held_out));
      } else {
        Predictor predict_fn = trainer(train_docs, fold_seed);
        auto damaged = damage_documents(held_out, dmg);
        keep_records(damaged.records);
        std::unordered_map<std::string, std::vector<DamageRecord>> by_doc;
        for (const auto& r : damaged.records) by_doc[r.doc_id].push_back(r);
        for (const auto& d : damaged.docs) {
          const auto& recs = by_doc[d.id];
          for (const Entity& e : predict_fn(d)) {
            auto back = remap_to_original(e, recs);
            if (!back) continue;
            back->provenance = Provenance::damage_cv;
            res.predictions.push_back({d.id, *back});
          }
        }
        res.training_sets.push_back(std::move(train_docs));
        res.prediction_sets.push_back(std::move(damaged.docs));
      }
    } catch (const std::exception& ex) {
      throw Error("fold " + std::to_string(fold) + ": " + ex.what());
    }
  }
  std::unordered_map<std::string, size_t> position;
  for (size_t i = 0; i < corpus.size(); ++i) position.emplace(corpus[i].id, i);
  auto by_corpus_order = [&](const auto& a, const auto& b) { return position.at(a.doc_id) < position.at(b.doc_id); };
  std::stable_sort(res.records.begin(), res.records.end(), by_corpus_order);
  std::stable_sort(res.predictions.begin(), res.predictions.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.doc_id != b.doc_id) return by_corpus_order(a, b);
    return canonical_less(a.entity, b.entity);
  });
  return res;
}

/// Gold labels are retained first, so they win every conflict.
inline MergeResult harvest_and_merge(const Corpus& corpus, const std::vector<Candidate>& predictions) {
  return merge_pseudo(corpus, predictions);
}

}  // namespace nestterm
