#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/orchestrator/store.hpp"

namespace hdlscale {

struct CurvePoint {
  int k = 1;
  double success_rate = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Per-problem facts every success metric is computed from.
struct ProblemOutcome {
  std::string problem_id;
  int samples_done = 0;
  int passes = 0;
  std::optional<int> first_pass_index;
};

inline ProblemOutcome outcome_of(const std::string& id, const std::vector<Sample>& samples) {
  ProblemOutcome o;
  o.problem_id = id;
  o.samples_done = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    if (!s.verdict.passed()) continue;
    ++o.passes;
    if (!o.first_pass_index || s.index < *o.first_pass_index) o.first_pass_index = s.index;
  }
  return o;
}

inline std::vector<ProblemOutcome> outcomes(const StoreSnapshot& snap) {
  std::vector<ProblemOutcome> out;
  out.reserve(snap.problems.size());
  for (const auto& p : snap.problems) out.push_back(outcome_of(p.id, snap.samples_of(p.id)));
  return out;
}

namespace detail {

inline void require_nonempty(const StoreSnapshot& snap) {
  if (snap.problems.empty()) throw Error(Errc::EmptyStore, "store has no problems");
  for (const auto& [id, samples] : snap.samples)
    if (!samples.empty()) return;
  throw Error(Errc::EmptyStore, "store has no samples");
}

}  // namespace detail

// Fraction of problems with a pass among their first min(k, samples_done)
// samples. An empty problem list yields 0.
inline double hit_at_k(const std::vector<ProblemOutcome>& problems, int k) {
  if (k < 1) throw Error(Errc::InvalidCounts, "k must be >= 1");
  if (problems.empty()) return 0.0;
  int hits = 0;
  for (const auto& p : problems)
    if (p.first_pass_index && *p.first_pass_index <= std::min(k, p.samples_done)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(problems.size());
}

inline double hit_at_k(const StoreSnapshot& snap, int k) {
  detail::require_nonempty(snap);
  return hit_at_k(outcomes(snap), k);
}

// 1 - C(N-c, k) / C(N, k) in product form.
inline double pass_at_k(int N, int c, int k) {
  if (N < 1 || c < 0 || c > N || k < 1 || k > N)
    throw Error(Errc::InvalidCounts, "pass@k needs 1 <= k <= N and 0 <= c <= N (N=" +
                                         std::to_string(N) + ", c=" + std::to_string(c) +
                                         ", k=" + std::to_string(k) + ")");
  if (N - c < k) return 1.0;
  if (c == 0) return 0.0;
  // Exact integer products while the denominator stays below 2^53: one
  // rounding of (den - num) / den, the same rational subset counting gives.
  std::uint64_t num = 1, den = 1;
  bool exact = true;
  for (int i = 0; i < k && exact; ++i) {
    exact = !__builtin_mul_overflow(num, static_cast<std::uint64_t>(N - c - i), &num) &&
            !__builtin_mul_overflow(den, static_cast<std::uint64_t>(N - i), &den) &&
            den <= (std::uint64_t{1} << 53);
  }
  if (exact) return static_cast<double>(den - num) / static_cast<double>(den);
  // Same product in log space; expm1/log1p keep small results accurate.
  double log_all_wrong = 0.0;
  for (int i = 0; i < k; ++i) log_all_wrong += std::log1p(-static_cast<double>(c) / static_cast<double>(N - i));
  return -std::expm1(log_all_wrong);
}

inline double pass_at_k_suite(const StoreSnapshot& snap, int k) {
  if (snap.config.mode() == StopMode::EarlyStop)
    throw Error(Errc::EarlyStopStore, "pass@k needs a fixed-N campaign; use hit@k for early-stop stores");
  detail::require_nonempty(snap);
  double sum = 0.0;
  for (const auto& o : outcomes(snap)) {
    if (o.samples_done < 1)
      throw Error(Errc::InvalidCounts, "problem " + o.problem_id + " has no samples");
    sum += pass_at_k(o.samples_done, o.passes, k);
  }
  return sum / static_cast<double>(snap.problems.size());
}

// One point per distinct first-pass index.
inline std::vector<CurvePoint> first_pass_curve(const std::vector<ProblemOutcome>& problems) {
  std::set<int> ks;
  for (const auto& p : problems)
    if (p.first_pass_index) ks.insert(*p.first_pass_index);
  std::vector<CurvePoint> curve;
  for (int k : ks) curve.push_back({k, hit_at_k(problems, k)});
  return curve;
}

inline std::vector<CurvePoint> first_pass_curve(const StoreSnapshot& snap) {
  detail::require_nonempty(snap);
  return first_pass_curve(outcomes(snap));
}

struct LogLogFit {
  double a = 0.0;
  double b = 0.0;
  double rmse = 0.0;
  int points = 0;  // points used (k >= 3)
};

// Least squares of success_rate = a + b * ln(ln k) over points with k >= 3.
inline LogLogFit fit_loglog(const std::vector<CurvePoint>& curve) {
  std::vector<double> xs, ys;
  for (const auto& p : curve) {
    if (p.k < 3) continue;
    xs.push_back(std::log(std::log(static_cast<double>(p.k))));
    ys.push_back(p.success_rate);
  }
  const std::size_t n = xs.size();
  if (n < 3) throw Error(Errc::InsufficientPoints, "log-log fit needs >= 3 points with k >= 3");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw Error(Errc::InsufficientPoints, "log-log fit needs >= 2 distinct k");

  LogLogFit fit;
  fit.b = sxy / sxx;
  fit.a = my - fit.b * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = ys[i] - (fit.a + fit.b * xs[i]);
    sse += r * r;
  }
  fit.rmse = std::sqrt(sse / static_cast<double>(n));
  fit.points = static_cast<int>(n);
  return fit;
}

struct CostReport {
  std::map<std::string, double> per_problem_usd;
  double mean_usd = 0.0;
  double discount_factor = 1.0;
  // When > 0, each problem's cost is scaled to this many samples.
  int normalized_samples = 0;
};

inline double usage_cost(const UsageRecord& u, const Price& price) {
  return (static_cast<double>(u.input_tokens) * price.usd_per_1m_input +
          static_cast<double>(u.output_tokens) * price.usd_per_1m_output) /
         1e6;
}

// Every recorded sample counts, failed and errored ones included, plus the
// speculative samples discarded after an early stop. With
// `normalize_samples` > 0 a problem's cost is rescaled to that sample count
// (cost per sample x normalize_samples).
inline CostReport cost_report(const StoreSnapshot& snap, const PricingTable& pricing,
                              double discount_factor = 1.0, int normalize_samples = 0) {
  if (!(discount_factor > 0.0 && discount_factor <= 1.0))
    throw Error(Errc::InvalidConfig, "discount_factor must be in (0, 1]");
  const std::string& model = snap.config.params.model_id;
  auto price = pricing.find(model);
  if (price == pricing.end())
    throw Error(Errc::UnknownModelForPricing, "no pricing for model '" + model + "'");

  CostReport report;
  report.discount_factor = discount_factor;
  report.normalized_samples = normalize_samples;
  double total = 0.0;
  for (const auto& p : snap.problems) {
    const auto& samples = snap.samples_of(p.id);
    double usd = 0.0;
    for (const auto& s : samples) usd += usage_cost(s.usage, price->second);
    int billed = static_cast<int>(samples.size());
    if (auto it = snap.overshoot_usage.find(p.id); it != snap.overshoot_usage.end())
      usd += usage_cost(it->second, price->second);
    usd *= discount_factor;
    if (normalize_samples > 0)
      usd = billed > 0 ? usd / billed * normalize_samples : 0.0;
    report.per_problem_usd[p.id] = usd;
    total += usd;
  }
  if (!snap.problems.empty()) report.mean_usd = total / static_cast<double>(snap.problems.size());
  return report;
}

struct TagSplit {
  std::string tag;
  int tagged_problems = 0;
  int untagged_problems = 0;
  // Rates are 0 for an empty subset; the counts above tell the cases apart.
  std::map<int, double> tagged;
  std::map<int, double> untagged;
};

inline TagSplit success_by_tag(const StoreSnapshot& snap, const std::string& tag,
                               const std::vector<int>& checkpoints) {
  detail::require_nonempty(snap);
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw Error(Errc::InvalidCounts, "checkpoints must be sorted ascending");
  std::vector<ProblemOutcome> with, without;
  for (const auto& p : snap.problems)
    (p.has_tag(tag) ? with : without).push_back(outcome_of(p.id, snap.samples_of(p.id)));
  TagSplit split;
  split.tag = tag;
  split.tagged_problems = static_cast<int>(with.size());
  split.untagged_problems = static_cast<int>(without.size());
  for (int k : checkpoints) {
    split.tagged[k] = hit_at_k(with, k);
    split.untagged[k] = hit_at_k(without, k);
  }
  return split;
}

}  // namespace hdlscale
