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

// Desk-scale contrastive bi-encoder span tagger with a dynamic threshold.
//
// Tokens are embedded from hashed character n-grams and mixed with their
// neighbours by a linear map. A span is the projection of its boundary
// tokens; a class anchor is the projection of the class description; the
// sentence vector, projected into the same space, yields a per-sentence,
// per-class threshold. A span is emitted when its scaled cosine to the anchor
// beats the threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nestterm/corpus.hpp"
#include "nestterm/rng.hpp"

namespace nestterm {

struct TaggerConfig {
  size_t buckets = 1 << 14;  // hashed n-gram table rows
  size_t dim = 24;           // token embedding width
  size_t window = 1;         // context radius
  size_t proj_dim = 24;      // shared space width
  double temperature = 0.1;
  size_t max_width = 14;  // longest candidate, in tokens
  size_t epochs = 20;
  double step = 0.05;
  size_t batch_size = 1;
  double margin = 0.0;  // threshold margin in the loss
  size_t min_ngram = 3;
  size_t max_ngram = 5;
  double init_scale = 0.5;
  uint64_t seed = 0;

  bool operator==(const TaggerConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const TaggerConfig& c) {
  return {{"buckets", c.buckets},     {"dim", c.dim},
          {"window", c.window},       {"proj_dim", c.proj_dim},
          {"temperature", c.temperature}, {"max_width", c.max_width},
          {"epochs", c.epochs},       {"step", c.step},
          {"batch_size", c.batch_size}, {"margin", c.margin},
          {"min_ngram", c.min_ngram}, {"max_ngram", c.max_ngram},
          {"init_scale", c.init_scale}, {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are an error.
inline TaggerConfig tagger_config_from_json(const nlohmann::json& j, TaggerConfig c = {}) {
  for (const auto& [key, v] : j.items()) {
    if (key == "buckets") c.buckets = v.get<size_t>();
    else if (key == "dim") c.dim = v.get<size_t>();
    else if (key == "window") c.window = v.get<size_t>();
    else if (key == "proj_dim") c.proj_dim = v.get<size_t>();
    else if (key == "temperature") c.temperature = v.get<double>();
    else if (key == "max_width") c.max_width = v.get<size_t>();
    else if (key == "epochs") c.epochs = v.get<size_t>();
    else if (key == "step") c.step = v.get<double>();
    else if (key == "batch_size") c.batch_size = v.get<size_t>();
    else if (key == "margin") c.margin = v.get<double>();
    else if (key == "min_ngram") c.min_ngram = v.get<size_t>();
    else if (key == "max_ngram") c.max_ngram = v.get<size_t>();
    else if (key == "init_scale") c.init_scale = v.get<double>();
    else if (key == "seed") c.seed = v.get<uint64_t>();
    else throw Error("unknown tagger config key '" + key + "'");
  }
  if (c.buckets == 0 || c.dim == 0 || c.proj_dim == 0 || c.max_width == 0 || c.batch_size == 0) {
    throw Error("tagger config: dimensions must be positive");
  }
  if (!(c.temperature > 0.0)) throw Error("tagger config: temperature must be positive");
  if (c.min_ngram == 0 || c.min_ngram > c.max_ngram) throw Error("tagger config: bad n-gram range");
  return c;
}

using TypeDescriptions = std::map<TermClass, std::string>;

inline TypeDescriptions default_descriptions() {
  return {
      {TermClass::specific, "domain term that is specialised both in meaning and in wording, used mostly by experts"},
      {TermClass::common, "domain term with everyday wording that non-specialists also know and use"},
      {TermClass::nomen, "proper name of a unique object, resource, organisation or product of the domain"},
      {TermClass::any, "domain term of any kind, specialised, common or a named object"},
  };
}

inline TypeDescriptions descriptions_from_json(const nlohmann::json& j) {
  TypeDescriptions d;
  for (const auto& [key, v] : j.items()) d[parse_term_class(key)] = v.get<std::string>();
  return d;
}

// ---------------------------------------------------------------------------
// Parameters

struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return data[r * cols + c]; }
  double* row(size_t r) { return data.data() + r * cols; }
  const double* row(size_t r) const { return data.data() + r * cols; }

  bool operator==(const Matrix&) const = default;
};

struct EncoderParams {
  size_t buckets = 0;
  size_t dim = 0;
  size_t window = 0;
  size_t proj_dim = 0;
  size_t min_ngram = 3;
  size_t max_ngram = 5;
  double temperature = 1.0;
  Matrix embeddings;  // buckets x dim
  Matrix mixing;      // dim x (2 * window + 1) * dim
  Matrix span_proj;   // proj_dim x 2 * dim: [start half | end half]
  Matrix desc_proj;   // proj_dim x dim
  Matrix sent_proj;   // proj_dim x dim

  bool operator==(const EncoderParams&) const = default;
};

struct TaggerModel {
  TaggerConfig config;
  EncoderParams params;
  std::vector<TermClass> classes;
  TypeDescriptions descriptions;
  std::vector<std::vector<double>> anchors;  // unit norm, aligned with classes
  uint64_t seed = 0;
  size_t max_width = 14;

  bool operator==(const TaggerModel&) const = default;
};

namespace detail {

inline double dot(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const double* a, size_t n) { return std::sqrt(dot(a, a, n)); }

// y += M x
inline void gemv_add(const Matrix& m, const double* x, double* y, size_t col_offset = 0, size_t ncols = SIZE_MAX) {
  if (ncols == SIZE_MAX) ncols = m.cols - col_offset;
  for (size_t r = 0; r < m.rows; ++r) y[r] += dot(m.row(r) + col_offset, x, ncols);
}

// y += M^T x
inline void gemv_t_add(const Matrix& m, const double* x, double* y, size_t col_offset = 0, size_t ncols = SIZE_MAX) {
  if (ncols == SIZE_MAX) ncols = m.cols - col_offset;
  for (size_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* mr = m.row(r) + col_offset;
    for (size_t c = 0; c < ncols; ++c) y[c] += mr[c] * xr;
  }
}

// G += a b^T
inline void outer_add(Matrix& g, const double* a, const double* b, size_t col_offset = 0, size_t ncols = SIZE_MAX) {
  if (ncols == SIZE_MAX) ncols = g.cols - col_offset;
  for (size_t r = 0; r < g.rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* gr = g.row(r) + col_offset;
    for (size_t c = 0; c < ncols; ++c) gr[c] += ar * b[c];
  }
}

inline double log_sum_exp(std::span<const double> xs) {
  double mx = -INFINITY;
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline void fill_uniform(Matrix& m, Rng& rng, double scale) {
  for (auto& v : m.data) v = rng.uniform(-scale, scale);
}

}  // namespace detail

/// Hashed features of one token: the whole bracketed word plus its character
/// n-grams, over case-folded code points.
inline std::vector<uint32_t> token_features(std::string_view surface, const EncoderParams& p) {
  std::u32string w = U"<";
  for (char32_t c : utf8::decode(surface)) w.push_back(utf8::fold_case(c));
  w.push_back(U'>');
  std::vector<uint32_t> feats;
  auto add = [&](std::u32string_view gram, uint64_t salt) {
    feats.push_back(static_cast<uint32_t>(fnv1a64(utf8::encode(gram), splitmix64(salt)) % p.buckets));
  };
  add(w, 0);
  for (size_t n = p.min_ngram; n <= p.max_ngram; ++n) {
    if (n >= w.size()) break;
    for (size_t i = 0; i + n <= w.size(); ++i) add(std::u32string_view(w).substr(i, n), n);
  }
  return feats;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace detail {

struct Forward {
  size_t n = 0;
  std::vector<std::vector<uint32_t>> feats;
  Matrix x;  // n x dim, raw embeddings
  Matrix m;  // n x dim, context-mixed
  Matrix us; // n x proj, start-boundary projections
  Matrix ue; // n x proj, end-boundary projections
  std::vector<double> mean_m;
  std::vector<double> z;  // projected sentence vector
};

inline void embed(const EncoderParams& p, const std::vector<uint32_t>& feats, double* out) {
  std::fill(out, out + p.dim, 0.0);
  for (uint32_t f : feats) {
    const double* e = p.embeddings.row(f);
    for (size_t k = 0; k < p.dim; ++k) out[k] += e[k];
  }
  const double inv = 1.0 / static_cast<double>(feats.size());
  for (size_t k = 0; k < p.dim; ++k) out[k] *= inv;
}

inline Forward forward(const EncoderParams& p, std::vector<std::vector<uint32_t>> feats) {
  Forward f;
  f.n = feats.size();
  f.feats = std::move(feats);
  const size_t d = p.dim, w = p.window;
  f.x = Matrix(f.n, d);
  f.m = Matrix(f.n, d);
  f.us = Matrix(f.n, p.proj_dim);
  f.ue = Matrix(f.n, p.proj_dim);
  f.mean_m.assign(d, 0.0);
  f.z.assign(p.proj_dim, 0.0);
  for (size_t t = 0; t < f.n; ++t) embed(p, f.feats[t], f.x.row(t));
  for (size_t t = 0; t < f.n; ++t) {
    for (size_t o = 0; o <= 2 * w; ++o) {
      const auto src = static_cast<int64_t>(t + o) - static_cast<int64_t>(w);
      if (src < 0 || src >= static_cast<int64_t>(f.n)) continue;
      gemv_add(p.mixing, f.x.row(static_cast<size_t>(src)), f.m.row(t), o * d, d);
    }
    gemv_add(p.span_proj, f.m.row(t), f.us.row(t), 0, d);
    gemv_add(p.span_proj, f.m.row(t), f.ue.row(t), d, d);
    for (size_t k = 0; k < d; ++k) f.mean_m[k] += f.m(t, k);
  }
  if (f.n > 0) {
    for (auto& v : f.mean_m) v /= static_cast<double>(f.n);
    gemv_add(p.sent_proj, f.mean_m.data(), f.z.data());
  }
  return f;
}

inline std::vector<std::vector<uint32_t>> features_of(const std::vector<TokenSpan>& tokens, const EncoderParams& p) {
  std::vector<std::vector<uint32_t>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(token_features(t.surface, p));
  return out;
}

// Description encoder: mean raw embedding of the description tokens, then
// the description projection.
struct AnchorState {
  std::vector<std::vector<uint32_t>> feats;
  std::vector<double> h;  // dim
  std::vector<double> a;  // proj, unnormalized
};

inline AnchorState anchor_state(const EncoderParams& p, const std::string& description) {
  AnchorState s;
  s.feats = features_of(tokenize(description), p);
  if (s.feats.empty()) throw Error("class description has no tokens");
  s.h.assign(p.dim, 0.0);
  std::vector<double> x(p.dim);
  for (const auto& f : s.feats) {
    embed(p, f, x.data());
    for (size_t k = 0; k < p.dim; ++k) s.h[k] += x[k];
  }
  for (auto& v : s.h) v /= static_cast<double>(s.feats.size());
  s.a.assign(p.proj_dim, 0.0);
  gemv_add(p.desc_proj, s.h.data(), s.a.data());
  return s;
}

}  // namespace detail

struct EncodedTokens {
  std::vector<std::vector<double>> tokens;  // context-mixed, dim each
  std::vector<double> sentence;             // projected sentence vector
};

inline EncodedTokens encode_tokens(const std::vector<TokenSpan>& tokens, const EncoderParams& params) {
  if (tokens.empty()) throw Error("encode_tokens: empty token sequence");
  auto f = detail::forward(params, detail::features_of(tokens, params));
  EncodedTokens out;
  for (size_t t = 0; t < f.n; ++t) out.tokens.emplace_back(f.m.row(t), f.m.row(t) + params.dim);
  out.sentence = f.z;
  return out;
}

/// Cosine similarity scaled by 1/temperature.
inline double score(std::span<const double> span_vector, std::span<const double> anchor, double temperature) {
  if (span_vector.size() != anchor.size()) throw Error("score: dimension mismatch");
  const double nu = detail::norm(span_vector.data(), span_vector.size());
  const double na = detail::norm(anchor.data(), anchor.size());
  if (nu == 0.0 || na == 0.0) throw Error("score: zero vector");
  return detail::dot(span_vector.data(), anchor.data(), anchor.size()) / (nu * na) / temperature;
}

/// The per-sentence, per-class decision value: the same scoring function
/// applied to the projected sentence vector.
inline double dynamic_threshold(std::span<const double> sentence_vector, std::span<const double> anchor,
                                double temperature) {
  return score(sentence_vector, anchor, temperature);
}

// ---------------------------------------------------------------------------
// Model construction

inline EncoderParams init_params(const TaggerConfig& c, uint64_t seed) {
  EncoderParams p;
  p.buckets = c.buckets;
  p.dim = c.dim;
  p.window = c.window;
  p.proj_dim = c.proj_dim;
  p.min_ngram = c.min_ngram;
  p.max_ngram = c.max_ngram;
  p.temperature = c.temperature;
  p.embeddings = Matrix(c.buckets, c.dim);
  p.mixing = Matrix(c.dim, (2 * c.window + 1) * c.dim);
  p.span_proj = Matrix(c.proj_dim, 2 * c.dim);
  p.desc_proj = Matrix(c.proj_dim, c.dim);
  p.sent_proj = Matrix(c.proj_dim, c.dim);
  Rng rng(derive_seed(seed, "init"));
  detail::fill_uniform(p.embeddings, rng, c.init_scale);
  detail::fill_uniform(p.mixing, rng, 1.0 / std::sqrt(static_cast<double>(p.mixing.cols)));
  detail::fill_uniform(p.span_proj, rng, 1.0 / std::sqrt(static_cast<double>(p.span_proj.cols)));
  detail::fill_uniform(p.desc_proj, rng, 1.0 / std::sqrt(static_cast<double>(p.desc_proj.cols)));
  detail::fill_uniform(p.sent_proj, rng, 1.0 / std::sqrt(static_cast<double>(p.sent_proj.cols)));
  return p;
}

inline void refresh_anchors(TaggerModel& m) {
  m.anchors.clear();
  for (TermClass k : m.classes) {
    auto s = detail::anchor_state(m.params, m.descriptions.at(k));
    const double n = detail::norm(s.a.data(), s.a.size());
    if (n == 0.0) throw Error("anchor for class " + std::string(to_string(k)) + " is zero");
    for (auto& v : s.a) v /= n;
    m.anchors.push_back(std::move(s.a));
  }
}

inline TaggerModel init_model(std::vector<TermClass> classes, const TypeDescriptions& descriptions,
                              const TaggerConfig& cfg) {
  if (classes.empty()) throw Error("tagger needs at least one class");
  TaggerModel m;
  m.config = cfg;
  m.seed = cfg.seed;
  m.max_width = cfg.max_width;
  m.classes = std::move(classes);
  for (TermClass k : m.classes) {
    auto it = descriptions.find(k);
    if (it == descriptions.end()) throw Error("no description for class " + std::string(to_string(k)));
    m.descriptions[k] = it->second;
  }
  m.params = init_params(cfg, cfg.seed);
  refresh_anchors(m);
  return m;
}

inline std::vector<TermClass> active_classes(const Corpus& corpus) {
  std::vector<bool> seen(std::size(kAllClasses), false);
  for (const auto& d : corpus) {
    for (const auto& e : d.entities) seen[static_cast<size_t>(e.cls)] = true;
  }
  std::vector<TermClass> out;
  for (TermClass c : kAllClasses) {
    if (seen[static_cast<size_t>(c)]) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and gradients

struct Gradients {
  std::map<uint32_t, std::vector<double>> embeddings;  // sparse rows
  Matrix mixing;
  Matrix span_proj;
  Matrix desc_proj;
  Matrix sent_proj;

  explicit Gradients(const EncoderParams& p)
      : mixing(p.mixing.rows, p.mixing.cols),
        span_proj(p.span_proj.rows, p.span_proj.cols),
        desc_proj(p.desc_proj.rows, p.desc_proj.cols),
        sent_proj(p.sent_proj.rows, p.sent_proj.cols) {}

  double* embedding_row(uint32_t r, size_t dim) {
    auto [it, fresh] = embeddings.try_emplace(r);
    if (fresh) it->second.assign(dim, 0.0);
    return it->second.data();
  }

  Matrix dense_embeddings(const EncoderParams& p) const {
    Matrix g(p.embeddings.rows, p.embeddings.cols);
    for (const auto& [r, v] : embeddings) std::copy(v.begin(), v.end(), g.row(r));
    return g;
  }
};

/// Tokenized document with gold spans per model class, as token index pairs.
struct PreparedExample {
  std::string doc_id;
  std::vector<TokenSpan> tokens;
  std::vector<std::vector<uint32_t>> feats;
  std::vector<std::vector<std::pair<size_t, size_t>>> gold;  // per class in model order
};

inline PreparedExample prepare_example(const Document& doc, const TaggerModel& model) {
  PreparedExample ex;
  ex.doc_id = doc.id;
  ex.tokens = tokenize(doc.text);
  ex.feats = detail::features_of(ex.tokens, model.params);
  ex.gold.resize(model.classes.size());
  for (const auto& e : doc.entities) {
    auto k = std::find(model.classes.begin(), model.classes.end(), e.cls);
    if (k == model.classes.end()) continue;
    auto r = token_range(ex.tokens, e);
    if (!r || r->second - r->first + 1 > model.max_width) continue;
    auto& g = ex.gold[static_cast<size_t>(k - model.classes.begin())];
    if (std::find(g.begin(), g.end(), *r) == g.end()) g.push_back(*r);
  }
  return ex;
}

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

namespace detail {

// d cos(x, y) / dx accumulated as scale * gradient into `out`.
inline void cos_grad_add(const double* x, double nx, const double* yhat, double cos, double scale, double* out,
                         size_t n) {
  const double a = scale / nx;
  const double b = scale * cos / (nx * nx);
  for (size_t i = 0; i < n; ++i) out[i] += a * yhat[i] - b * x[i];
}

// Loss of one document against precomputed anchors; accumulates gradients of
// the loss w.r.t. token parameters into `g` and w.r.t. the unnormalized
// anchors into `g_anchor`.
inline double example_loss(const TaggerModel& model, const std::vector<AnchorState>& anchors,
                           const PreparedExample& ex, Gradients* g, std::vector<std::vector<double>>* g_anchor) {
  const EncoderParams& p = model.params;
  if (ex.tokens.empty()) return 0.0;
  Forward f = forward(p, ex.feats);
  const size_t n = f.n, P = p.proj_dim, d = p.dim;
  const size_t width = std::min(model.max_width, n);
  const double inv_tau = 1.0 / p.temperature;
  const double margin = model.config.margin;

  struct Cand {
    size_t i, j;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n && j - i < width; ++j) cands.push_back({i, j});
  }
  const size_t nc = cands.size();
  auto cand_index = [&](size_t i, size_t j) {
    // Row-major over (i, j - i) with rows truncated at the sequence end.
    size_t idx = 0;
    for (size_t r = 0; r < i; ++r) idx += std::min(width, n - r);
    return idx + (j - i);
  };

  std::vector<double> v(P), s(nc), ds(nc), vnorm(nc), cosv(nc);
  Matrix gus(g ? n : 0, P), gue(g ? n : 0, P);
  std::vector<double> gz(P, 0.0);
  double total = 0.0;

  const double nz = norm(f.z.data(), P);
  if (nz == 0.0) throw Error("sentence vector is zero in document '" + ex.doc_id + "'");

  for (size_t k = 0; k < model.classes.size(); ++k) {
    const auto& a = anchors[k].a;
    const double na = norm(a.data(), P);
    if (na == 0.0) throw Error("zero anchor");
    std::vector<double> ahat(P);
    for (size_t q = 0; q < P; ++q) ahat[q] = a[q] / na;

    for (size_t c = 0; c < nc; ++c) {
      for (size_t q = 0; q < P; ++q) v[q] = f.us(cands[c].i, q) + f.ue(cands[c].j, q);
      vnorm[c] = norm(v.data(), P);
      if (vnorm[c] == 0.0) throw Error("zero span vector in document '" + ex.doc_id + "'");
      cosv[c] = dot(v.data(), ahat.data(), P) / vnorm[c];
      s[c] = cosv[c] * inv_tau;
    }
    const double cosz = dot(f.z.data(), ahat.data(), P) / nz;
    const double st = cosz * inv_tau;

    std::vector<char> positive(nc, 0);
    std::vector<size_t> pos;
    for (const auto& [i, j] : ex.gold[k]) {
      size_t c = cand_index(i, j);
      if (!positive[c]) {
        positive[c] = 1;
        pos.push_back(c);
      }
    }
    std::fill(ds.begin(), ds.end(), 0.0);
    double dst = 0.0;

    // (a) each positive against every candidate and the threshold.
    if (!pos.empty()) {
      double mx = st;
      for (double x : s) mx = std::max(mx, x);
      double z = std::exp(st - mx);
      for (double x : s) z += std::exp(x - mx);
      const double lse = mx + std::log(z);
      const double np = static_cast<double>(pos.size());
      for (size_t c : pos) {
        total += lse - s[c];
        ds[c] -= 1.0;
      }
      for (size_t c = 0; c < nc; ++c) ds[c] += np * std::exp(s[c] - lse);
      dst += np * std::exp(st - lse);
    }
    // (b) each positive above the threshold.
    for (size_t c : pos) {
      const double other = st + margin;
      const double hi = std::max(s[c], other);
      const double lse = hi + std::log(std::exp(s[c] - hi) + std::exp(other - hi));
      total += lse - s[c];
      const double q = std::exp(other - lse);
      ds[c] -= q;
      dst += q;
    }
    // (c) the threshold above every negative.
    if (pos.size() < nc) {
      double mx = st;
      for (size_t c = 0; c < nc; ++c) {
        if (!positive[c]) mx = std::max(mx, s[c] + margin);
      }
      double z = std::exp(st - mx);
      for (size_t c = 0; c < nc; ++c) {
        if (!positive[c]) z += std::exp(s[c] + margin - mx);
      }
      const double lse = mx + std::log(z);
      total += lse - st;
      dst += std::exp(st - lse) - 1.0;
      for (size_t c = 0; c < nc; ++c) {
        if (!positive[c]) ds[c] += std::exp(s[c] + margin - lse);
      }
    }

    if (!g) continue;
    // Back through the cosines.
    std::vector<double> gahat(P, 0.0);
    for (size_t c = 0; c < nc; ++c) {
      if (ds[c] == 0.0) continue;
      for (size_t q = 0; q < P; ++q) v[q] = f.us(cands[c].i, q) + f.ue(cands[c].j, q);
      const double sc = ds[c] * inv_tau;
      double* gs = gus.row(cands[c].i);
      double* ge = gue.row(cands[c].j);
      const double a1 = sc / vnorm[c], b1 = sc * cosv[c] / (vnorm[c] * vnorm[c]);
      for (size_t q = 0; q < P; ++q) {
        const double gv = a1 * ahat[q] - b1 * v[q];
        gs[q] += gv;
        ge[q] += gv;
        gahat[q] += sc * v[q] / vnorm[c];
      }
    }
    if (dst != 0.0) {
      cos_grad_add(f.z.data(), nz, ahat.data(), cosz, dst * inv_tau, gz.data(), P);
      for (size_t q = 0; q < P; ++q) gahat[q] += dst * inv_tau * f.z[q] / nz;
    }
    // ahat = a / |a|
    const double proj = dot(gahat.data(), ahat.data(), P);
    auto& ga = (*g_anchor)[k];
    for (size_t q = 0; q < P; ++q) ga[q] += (gahat[q] - proj * ahat[q]) / na;
  }

  if (!g) return total;

  // Back through projections, mixing and embeddings.
  const size_t w = p.window;
  Matrix gm(n, d), gx(n, d);
  std::vector<double> gmean(d, 0.0);
  gemv_t_add(p.sent_proj, gz.data(), gmean.data());
  outer_add(g->sent_proj, gz.data(), f.mean_m.data());
  for (size_t t = 0; t < n; ++t) {
    double* gmt = gm.row(t);
    gemv_t_add(p.span_proj, gus.row(t), gmt, 0, d);
    gemv_t_add(p.span_proj, gue.row(t), gmt, d, d);
    outer_add(g->span_proj, gus.row(t), f.m.row(t), 0, d);
    outer_add(g->span_proj, gue.row(t), f.m.row(t), d, d);
    for (size_t k = 0; k < d; ++k) gmt[k] += gmean[k] / static_cast<double>(n);
    for (size_t o = 0; o <= 2 * w; ++o) {
      const auto src = static_cast<int64_t>(t + o) - static_cast<int64_t>(w);
      if (src < 0 || src >= static_cast<int64_t>(n)) continue;
      outer_add(g->mixing, gmt, f.x.row(static_cast<size_t>(src)), o * d, d);
      gemv_t_add(p.mixing, gmt, gx.row(static_cast<size_t>(src)), o * d, d);
    }
  }
  for (size_t t = 0; t < n; ++t) {
    const double inv = 1.0 / static_cast<double>(f.feats[t].size());
    for (uint32_t feat : f.feats[t]) {
      double* ge = g->embedding_row(feat, d);
      for (size_t k = 0; k < d; ++k) ge[k] += gx(t, k) * inv;
    }
  }
  return total;
}

// Pushes anchor gradients through the description encoder.
inline void anchor_backward(const EncoderParams& p, const std::vector<AnchorState>& anchors,
                            const std::vector<std::vector<double>>& g_anchor, Gradients& g) {
  const size_t d = p.dim;
  std::vector<double> gh(d);
  for (size_t k = 0; k < anchors.size(); ++k) {
    outer_add(g.desc_proj, g_anchor[k].data(), anchors[k].h.data());
    std::fill(gh.begin(), gh.end(), 0.0);
    gemv_t_add(p.desc_proj, g_anchor[k].data(), gh.data());
    const double inv_tokens = 1.0 / static_cast<double>(anchors[k].feats.size());
    for (const auto& feats : anchors[k].feats) {
      const double inv = inv_tokens / static_cast<double>(feats.size());
      for (uint32_t feat : feats) {
        double* ge = g.embedding_row(feat, d);
        for (size_t q = 0; q < d; ++q) ge[q] += gh[q] * inv;
      }
    }
  }
}

inline std::vector<AnchorState> anchor_states(const TaggerModel& m) {
  std::vector<AnchorState> out;
  for (TermClass k : m.classes) out.push_back(anchor_state(m.params, m.descriptions.at(k)));
  return out;
}

}  // namespace detail

/// Summed contrastive loss over a batch, with gradients for every parameter
/// group (anchor gradients are folded into the description projection and
/// the embedding rows of the description tokens).
inline LossAndGrad contrastive_loss(std::span<const PreparedExample> batch, const TaggerModel& model) {
  LossAndGrad out{0.0, Gradients(model.params)};
  auto anchors = detail::anchor_states(model);
  std::vector<std::vector<double>> g_anchor(anchors.size(), std::vector<double>(model.params.proj_dim, 0.0));
  for (const auto& ex : batch) out.loss += detail::example_loss(model, anchors, ex, &out.grads, &g_anchor);
  detail::anchor_backward(model.params, anchors, g_anchor, out.grads);
  return out;
}

inline double contrastive_loss_value(std::span<const PreparedExample> batch, const TaggerModel& model) {
  auto anchors = detail::anchor_states(model);
  double total = 0.0;
  for (const auto& ex : batch) total += detail::example_loss(model, anchors, ex, nullptr, nullptr);
  return total;
}

inline LossAndGrad contrastive_loss(const Corpus& docs, const TaggerModel& model) {
  std::vector<PreparedExample> batch;
  for (const auto& d : docs) batch.push_back(prepare_example(d, model));
  return contrastive_loss(std::span<const PreparedExample>(batch), model);
}

// ---------------------------------------------------------------------------
// Training

struct TrainTrace {
  std::vector<double> epoch_loss;
};

inline void apply_gradients(EncoderParams& p, const Gradients& g, double step) {
  auto upd = [step](Matrix& m, const Matrix& gm) {
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] -= step * gm.data[i];
  };
  upd(p.mixing, g.mixing);
  upd(p.span_proj, g.span_proj);
  upd(p.desc_proj, g.desc_proj);
  upd(p.sent_proj, g.sent_proj);
  for (const auto& [r, v] : g.embeddings) {
    double* row = p.embeddings.row(r);
    for (size_t k = 0; k < v.size(); ++k) row[k] -= step * v[k];
  }
}

/// Mini-batch gradient descent over shuffled documents. Deterministic for a
/// given corpus order and config seed.
inline TaggerModel train(const Corpus& corpus, const TypeDescriptions& descriptions, const TaggerConfig& cfg,
                         TrainTrace* trace = nullptr) {
  auto classes = active_classes(corpus);
  if (classes.empty()) classes.push_back(TermClass::any);
  TaggerModel model = init_model(classes, descriptions, cfg);
  std::vector<PreparedExample> examples;
  examples.reserve(corpus.size());
  for (const auto& d : corpus) {
    auto ex = prepare_example(d, model);
    if (!ex.tokens.empty()) examples.push_back(std::move(ex));
  }
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, "epoch-order"));

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t b = 0; b < order.size(); b += cfg.batch_size) {
      auto anchors = detail::anchor_states(model);
      std::vector<std::vector<double>> g_anchor(anchors.size(), std::vector<double>(cfg.proj_dim, 0.0));
      Gradients g(model.params);
      const size_t e = std::min(order.size(), b + cfg.batch_size);
      double batch_loss = 0.0;
      for (size_t i = b; i < e; ++i) {
        batch_loss += detail::example_loss(model, anchors, examples[order[i]], &g, &g_anchor);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting with '" +
                    examples[order[b]].doc_id + "'");
      }
      detail::anchor_backward(model.params, anchors, g_anchor, g);
      apply_gradients(model.params, g, cfg.step / static_cast<double>(e - b));
      epoch_loss += batch_loss;
    }
    if (trace) trace->epoch_loss.push_back(epoch_loss);
  }
  refresh_anchors(model);
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

struct ScoredSpan {
  size_t first = 0;
  size_t last = 0;
  TermClass cls = TermClass::specific;
  double score = 0.0;
};

/// Keeps spans greedily by score (ties: earlier start, longer span, class
/// order), dropping any span that crosses an already kept one.
inline std::vector<ScoredSpan> resolve_crossings(std::vector<ScoredSpan> spans) {
  std::stable_sort(spans.begin(), spans.end(), [](const ScoredSpan& a, const ScoredSpan& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.first != b.first) return a.first < b.first;
    if (a.last != b.last) return a.last > b.last;
    return static_cast<int>(a.cls) < static_cast<int>(b.cls);
  });
  std::vector<ScoredSpan> kept;
  for (const auto& s : spans) {
    bool ok = true;
    for (const auto& k : kept) {
      const bool overlap = s.first <= k.last && k.first <= s.last;
      const bool nested = (s.first <= k.first && k.last <= s.last) || (k.first <= s.first && s.last <= k.last);
      if (overlap && !nested) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(s);
  }
  return kept;
}

inline std::vector<Entity> predict(const TaggerModel& model, const Document& doc) {
  const auto tokens = tokenize(doc.text);
  if (tokens.empty()) return {};
  const EncoderParams& p = model.params;
  auto f = detail::forward(p, detail::features_of(tokens, p));
  const size_t n = f.n, P = p.proj_dim;
  const size_t width = std::min(model.max_width, n);
  std::vector<ScoredSpan> emitted;
  std::vector<double> v(P);
  for (size_t k = 0; k < model.classes.size(); ++k) {
    const auto& a = model.anchors[k];
    const double threshold = dynamic_threshold(f.z, a, p.temperature);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i; j < n && j - i < width; ++j) {
        for (size_t q = 0; q < P; ++q) v[q] = f.us(i, q) + f.ue(j, q);
        const double s = score(v, a, p.temperature);
        if (s > threshold) emitted.push_back({i, j, model.classes[k], s});
      }
    }
  }
  std::vector<Entity> out;
  for (const auto& s : resolve_crossings(std::move(emitted))) {
    out.push_back({tokens[s.first].start, tokens[s.last].end, s.cls, Provenance::gold});
  }
  sort_canonical(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m;
  m.rows = j.at("rows").get<size_t>();
  m.cols = j.at("cols").get<size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw Error("model file: matrix size mismatch");
  return m;
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const TaggerModel& m) {
  nlohmann::json j;
  j["format"] = "nestterm-tagger";
  j["version"] = kModelFormatVersion;
  j["config"] = to_json(m.config);
  j["seed"] = m.seed;
  j["max_width"] = m.max_width;
  j["temperature"] = m.params.temperature;
  std::vector<std::string> classes;
  for (TermClass c : m.classes) classes.emplace_back(to_string(c));
  j["classes"] = classes;
  for (const auto& [c, text] : m.descriptions) j["descriptions"][std::string(to_string(c))] = text;
  j["anchors"] = m.anchors;
  auto& params = j["params"];
  params["buckets"] = m.params.buckets;
  params["dim"] = m.params.dim;
  params["window"] = m.params.window;
  params["proj_dim"] = m.params.proj_dim;
  params["min_ngram"] = m.params.min_ngram;
  params["max_ngram"] = m.params.max_ngram;
  params["embeddings"] = detail::matrix_json(m.params.embeddings);
  params["mixing"] = detail::matrix_json(m.params.mixing);
  params["span_proj"] = detail::matrix_json(m.params.span_proj);
  params["desc_proj"] = detail::matrix_json(m.params.desc_proj);
  params["sent_proj"] = detail::matrix_json(m.params.sent_proj);
  return j;
}

inline TaggerModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "nestterm-tagger") throw Error("not a nestterm tagger model");
  if (j.at("version").get<int>() != kModelFormatVersion) {
    throw Error("unsupported model version " + std::to_string(j.at("version").get<int>()));
  }
  TaggerModel m;
  m.config = tagger_config_from_json(j.at("config"));
  m.seed = j.at("seed").get<uint64_t>();
  m.max_width = j.at("max_width").get<size_t>();
  for (const auto& c : j.at("classes")) m.classes.push_back(parse_term_class(c.get<std::string>()));
  m.descriptions = descriptions_from_json(j.at("descriptions"));
  m.anchors = j.at("anchors").get<std::vector<std::vector<double>>>();
  const auto& params = j.at("params");
  m.params.buckets = params.at("buckets").get<size_t>();
  m.params.dim = params.at("dim").get<size_t>();
  m.params.window = params.at("window").get<size_t>();
  m.params.proj_dim = params.at("proj_dim").get<size_t>();
  m.params.min_ngram = params.at("min_ngram").get<size_t>();
  m.params.max_ngram = params.at("max_ngram").get<size_t>();
  m.params.temperature = j.at("temperature").get<double>();
  m.params.embeddings = detail::matrix_from_json(params.at("embeddings"));
  m.params.mixing = detail::matrix_from_json(params.at("mixing"));
  m.params.span_proj = detail::matrix_from_json(params.at("span_proj"));
  m.params.desc_proj = detail::matrix_from_json(params.at("desc_proj"));
  m.params.sent_proj = detail::matrix_from_json(params.at("sent_proj"));
  if (m.anchors.size() != m.classes.size()) throw Error("model file: anchor count mismatch");
  return m;
}

/// `.json` paths get text JSON; anything else gets the same document as CBOR.
inline void save_model(const TaggerModel& m, const std::filesystem::path& path) {
  const auto j = to_json(m);
  if (path.extension() == ".json") {
    write_file_atomic(path, j.dump());
  } else {
    const auto bytes = nlohmann::json::to_cbor(j);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
}

inline TaggerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    if (!bytes.empty() && bytes[0] == '{') return model_from_json(nlohmann::json::parse(bytes));
    return model_from_json(nlohmann::json::from_cbor(bytes));
  } catch (const nlohmann::json::exception& ex) {
    throw Error("model file '" + path.string() + "': " + ex.what());
  }
}

}  // namespace nestterm
