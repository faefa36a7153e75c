#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/dispersion/lexer.hpp"
#include "hdlscale/orchestrator/store.hpp"

namespace hdlscale {

// (term id, weight), sorted by term id.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

struct CodeVectorSet {
  std::string problem_id;
  int n = 2;
  std::vector<std::string> vocabulary;  // n-grams, tokens joined by ' '
  std::vector<SparseVector> vectors;
};

inline constexpr int kDefaultNgram = 2;

inline std::vector<std::string> ngrams(const std::vector<std::string>& tokens, int n) {
  std::vector<std::string> out;
  if (n < 1 || tokens.size() < static_cast<std::size_t>(n)) return out;
  out.reserve(tokens.size() - n + 1);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string g = tokens[i];
    for (int j = 1; j < n; ++j) g += " " + tokens[i + j];
    out.push_back(std::move(g));
  }
  return out;
}

// TF-IDF: raw counts times ln((1 + D) / (1 + df)) + 1, then L2-normalized.
// Documents without n-grams get the zero vector.
inline CodeVectorSet vectorize(const std::vector<std::string>& codes, int n = kDefaultNgram,
                               std::string problem_id = {}) {
  if (n < 1) throw Error(Errc::InvalidConfig, "n-gram order must be >= 1");
  CodeVectorSet set;
  set.problem_id = std::move(problem_id);
  set.n = n;

  std::vector<std::map<std::string, int>> counts(codes.size());
  std::map<std::string, int> df;
  for (std::size_t d = 0; d < codes.size(); ++d) {
    for (auto& g : ngrams(tokenize(codes[d]).tokens, n)) ++counts[d][std::move(g)];
    for (const auto& [g, c] : counts[d]) ++df[g];
  }

  std::map<std::string, std::uint32_t> ids;
  std::vector<double> idf;
  const double D = static_cast<double>(codes.size());
  for (const auto& [g, f] : df) {
    ids.emplace(g, static_cast<std::uint32_t>(set.vocabulary.size()));
    set.vocabulary.push_back(g);
    idf.push_back(std::log((1.0 + D) / (1.0 + f)) + 1.0);
  }

  for (const auto& doc : counts) {
    SparseVector v;
    v.reserve(doc.size());
    double norm2 = 0.0;
    for (const auto& [g, c] : doc) {  // map order = vocabulary order
      const std::uint32_t id = ids.at(g);
      const double w = c * idf[id];
      v.emplace_back(id, w);
      norm2 += w * w;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& [id, w] : v) w *= inv;
    }
    set.vectors.push_back(std::move(v));
  }
  return set;
}

inline double dot(const SparseVector& v, const SparseVector& w) {
  double s = 0.0;
  auto a = v.begin(), b = w.begin();
  while (a != v.end() && b != w.end()) {
    if (a->first < b->first) ++a;
    else if (b->first < a->first) ++b;
    else s += (a++)->second * (b++)->second;
  }
  return s;
}

inline double norm(const SparseVector& v) {
  double s = 0.0;
  for (const auto& [id, w] : v) s += w * w;
  return std::sqrt(s);
}

// 0 when either vector is zero.
inline double cosine(const SparseVector& v, const SparseVector& w) {
  const double nv = norm(v), nw = norm(w);
  if (nv == 0.0 || nw == 0.0) return 0.0;
  return dot(v, w) / (nv * nw);
}

inline double mcd(const std::vector<SparseVector>& vectors) {
  const std::size_t N = vectors.size();
  if (N < 2) throw Error(Errc::TooFewSamples, "MCD needs >= 2 vectors, got " + std::to_string(N));
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) sum += 1.0 - cosine(vectors[i], vectors[j]);
  return 2.0 * sum / (static_cast<double>(N) * static_cast<double>(N - 1));
}

inline double mcd(const CodeVectorSet& set) { return mcd(set.vectors); }

struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }

  // Rows and columns reordered so that new position p holds old perm[p].
  SimilarityMatrix permuted(const std::vector<std::size_t>& perm) const {
    SimilarityMatrix m{n, std::vector<double>(n * n)};
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) m.at(a, b) = at(perm[a], perm[b]);
    return m;
  }
};

// Diagonal is 1 for non-zero vectors and 0 for zero vectors.
inline SimilarityMatrix similarity_matrix(const std::vector<SparseVector>& vectors) {
  const std::size_t N = vectors.size();
  SimilarityMatrix m{N, std::vector<double>(N * N, 0.0)};
  for (std::size_t i = 0; i < N; ++i) {
    m.at(i, i) = norm(vectors[i]) > 0.0 ? 1.0 : 0.0;
    for (std::size_t j = i + 1; j < N; ++j) m.at(i, j) = m.at(j, i) = cosine(vectors[i], vectors[j]);
  }
  return m;
}

inline SimilarityMatrix similarity_matrix(const CodeVectorSet& set) { return similarity_matrix(set.vectors); }

// ---- k-means ordering ----

struct ClusterResult {
  std::vector<std::size_t> permutation;  // sorted by (label, original index)
  std::vector<int> labels;               // per original index, numbered by first appearance
  int k = 0;                             // after clamping
  int iterations = 0;
  std::vector<std::string> warnings;
};

inline int default_cluster_count(std::size_t n) {
  if (n == 0) return 1;
  int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n) / 2.0)));
  return std::clamp(k, 1, 8);
}

namespace detail {

// Portable uniform in [0, 1) from a 64-bit engine.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double sq_dist(const SparseVector& x, double x_norm2, const std::vector<double>& c, double c_norm2) {
  double d = x_norm2 + c_norm2;
  for (const auto& [id, w] : x) d -= 2.0 * w * c[id];
  return std::max(0.0, d);
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding from `seed`; at most 100
// iterations, stopping early once no centroid moves by 1e-6 or more.
inline ClusterResult cluster_order(const std::vector<SparseVector>& vectors, std::size_t dims, int k_clusters,
                                   std::uint64_t seed) {
  ClusterResult res;
  const std::size_t N = vectors.size();
  if (N == 0) return res;
  int k = k_clusters;
  if (k < 1 || static_cast<std::size_t>(k) > N) {
    k = std::clamp<int>(k, 1, static_cast<int>(N));
    res.warnings.push_back("k_clusters " + std::to_string(k_clusters) + " clamped to " + std::to_string(k));
  }
  res.k = k;

  std::vector<double> x_norm2(N);
  for (std::size_t i = 0; i < N; ++i) x_norm2[i] = dot(vectors[i], vectors[i]);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centers;
  std::vector<double> c_norm2;
  auto add_center = [&](std::size_t i) {
    std::vector<double> c(dims, 0.0);
    for (const auto& [id, w] : vectors[i]) c[id] = w;
    centers.push_back(std::move(c));
    c_norm2.push_back(x_norm2[i]);
  };

  std::vector<char> chosen(N, 0);
  std::size_t first = static_cast<std::size_t>(detail::unit(rng) * static_cast<double>(N));
  add_center(first);
  chosen[first] = 1;
  std::vector<double> d2(N);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double best = INFINITY;
      for (std::size_t c = 0; c < centers.size(); ++c)
        best = std::min(best, detail::sq_dist(vectors[i], x_norm2[i], centers[c], c_norm2[c]));
      d2[i] = chosen[i] ? 0.0 : best;
      total += d2[i];
    }
    std::size_t pick = N;
    if (total > 0.0) {
      double r = detail::unit(rng) * total;
      for (std::size_t i = 0; i < N; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        if (r < d2[i]) break;
        r -= d2[i];
      }
    } else {
      // every remaining point coincides with a center
      std::size_t remaining = 0;
      for (std::size_t i = 0; i < N; ++i) remaining += !chosen[i];
      std::size_t nth = static_cast<std::size_t>(detail::unit(rng) * static_cast<double>(remaining));
      for (std::size_t i = 0; i < N; ++i)
        if (!chosen[i] && nth-- == 0) {
          pick = i;
          break;
        }
    }
    add_center(pick);
    chosen[pick] = 1;
  }

  std::vector<int> assign(N, 0);
  for (res.iterations = 1; res.iterations <= 100; ++res.iterations) {
    for (std::size_t i = 0; i < N; ++i) {
      double best = INFINITY;
      for (int c = 0; c < k; ++c) {
        double d = detail::sq_dist(vectors[i], x_norm2[i], centers[c], c_norm2[c]);
        if (d < best) {  // ties go to the lower center index
          best = d;
          assign[i] = c;
        }
      }
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
    std::vector<int> sizes(k, 0);
    for (std::size_t i = 0; i < N; ++i) {
      ++sizes[assign[i]];
      for (const auto& [id, w] : vectors[i]) sums[assign[i]][id] += w;
    }
    double moved = 0.0;
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;  // empty cluster keeps its centroid
      double shift = 0.0, n2 = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        double v = sums[c][d] / sizes[c];
        shift += (v - centers[c][d]) * (v - centers[c][d]);
        centers[c][d] = v;
        n2 += v * v;
      }
      c_norm2[c] = n2;
      moved = std::max(moved, std::sqrt(shift));
    }
    if (moved < 1e-6) break;
  }
  res.iterations = std::min(res.iterations, 100);

  std::vector<int> relabel(k, -1);
  int next = 0;
  res.labels.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    if (relabel[assign[i]] < 0) relabel[assign[i]] = next++;
    res.labels[i] = relabel[assign[i]];
  }
  res.permutation.resize(N);
  for (std::size_t i = 0; i < N; ++i) res.permutation[i] = i;
  std::stable_sort(res.permutation.begin(), res.permutation.end(),
                   [&](std::size_t a, std::size_t b) { return res.labels[a] < res.labels[b]; });
  return res;
}

inline ClusterResult cluster_order(const CodeVectorSet& set, int k_clusters, std::uint64_t seed) {
  return cluster_order(set.vectors, set.vocabulary.size(), k_clusters, seed);
}

// ---- difficulty views ----

struct LengthBin {
  int min_tokens = 0;
  int max_tokens = 0;
  std::vector<std::string> problem_ids;
  std::map<int, int> successes;  // checkpoint k -> problems hit within k samples
};

inline int token_count(const std::string& code) { return static_cast<int>(tokenize(code).tokens.size()); }

// Problems sorted by reference-code token count (ties by id), grouped into
// consecutive bins of `bin_size`; the last bin may be smaller.
inline std::vector<LengthBin> bin_by_length(const StoreSnapshot& snap, int bin_size = 15,
                                            const std::vector<int>& checkpoints = {1, 10, 512}) {
  if (bin_size < 1) throw Error(Errc::InvalidConfig, "bin_size must be >= 1");
  std::string missing;
  std::vector<std::pair<int, const Problem*>> sized;
  for (const auto& p : snap.problems) {
    if (!p.ref_code) {
      missing += (missing.empty() ? "" : ", ") + p.id;
      continue;
    }
    sized.emplace_back(token_count(*p.ref_code), &p);
  }
  if (!missing.empty()) throw Error(Errc::MissingRefCode, "no reference code for: " + missing);
  std::sort(sized.begin(), sized.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
  });

  std::vector<LengthBin> bins;
  for (std::size_t start = 0; start < sized.size(); start += bin_size) {
    LengthBin bin;
    const std::size_t end = std::min(sized.size(), start + bin_size);
    bin.min_tokens = sized[start].first;
    bin.max_tokens = sized[end - 1].first;
    for (int k : checkpoints) bin.successes[k] = 0;
    for (std::size_t i = start; i < end; ++i) {
      const Problem& p = *sized[i].second;
      bin.problem_ids.push_back(p.id);
      const auto& samples = snap.samples_of(p.id);
      for (int k : checkpoints) {
        const std::size_t upto = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(std::max(k, 0)));
        for (std::size_t j = 0; j < upto; ++j)
          if (samples[j].verdict.passed()) {
            ++bin.successes[k];
            break;
          }
      }
    }
    bins.push_back(std::move(bin));
  }
  return bins;
}

enum class ScatterPopulation { All, FailedOnly };

inline std::string_view to_string(ScatterPopulation p) { return p == ScatterPopulation::All ? "all" : "failed"; }

struct ScatterRow {
  std::string problem_id;
  std::optional<int> ref_token_count;
  double mcd = 0.0;
  int codes = 0;
  bool tagged = false;
};

// Extracted codes of a problem's samples, optionally failed ones only.
inline std::vector<std::string> sample_codes(const std::vector<Sample>& samples, ScatterPopulation pop) {
  std::vector<std::string> codes;
  for (const auto& s : samples) {
    if (!s.extracted_code) continue;
    if (pop == ScatterPopulation::FailedOnly && s.verdict.passed()) continue;
    codes.push_back(*s.extracted_code);
  }
  return codes;
}

// One row per problem with >= 2 codes in the population; the rest are listed
// in `warnings`.
inline std::vector<ScatterRow> scatter_mcd(const StoreSnapshot& snap, ScatterPopulation pop = ScatterPopulation::All,
                                           int n = kDefaultNgram, const std::string& highlight_tag = "math",
                                           std::vector<std::string>* warnings = nullptr) {
  std::vector<ScatterRow> rows;
  for (const auto& p : snap.problems) {
    auto codes = sample_codes(snap.samples_of(p.id), pop);
    if (codes.size() < 2) {
      if (warnings)
        warnings->push_back(p.id + ": " + std::to_string(codes.size()) + " code(s), MCD skipped");
      continue;
    }
    ScatterRow row;
    row.problem_id = p.id;
    if (p.ref_code) row.ref_token_count = token_count(*p.ref_code);
    row.mcd = mcd(vectorize(codes, n, p.id));
    row.codes = static_cast<int>(codes.size());
    row.tagged = p.has_tag(highlight_tag);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hdlscale
