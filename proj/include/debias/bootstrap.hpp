#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "debias/common.hpp"
#include "debias/dataset.hpp"
#include "debias/estimators.hpp"
#include "debias/rng.hpp"

namespace debias {

struct BootstrapSpec {
  int replicates = 1000;   ///< >= 100
  double level = 0.90;
  std::uint64_t seed = 1;
};

namespace detail {

/// Type-7 (linear-interpolation) quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  // No interpolation when the bracket is trivial; keeps infinite order
  // statistics (possible for ratio-type statistics) from producing NaN.
  if (frac == 0.0 || v[lo] == v[hi] || std::isinf(v[lo])) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

/// Percentile-bootstrap engine.  `replicate(rng)` returns one resampled
/// point estimate, or NaN to mark the resample degenerate (it is skipped and
/// counted).  Replicate r draws from derive_seed(seed, r), so results do not
/// depend on evaluation order.  The full-sample point joins the pool before
/// quantiles are taken, and the interval is widened to contain it, so
/// ci.low <= point <= ci.high always holds.
inline CiResult percentile_ci(double point, const BootstrapSpec& spec,
                              const std::function<double(Rng&)>& replicate) {
  if (spec.replicates < 100)
    throw ValidationError("bootstrap: at least 100 replicates required, got " +
                          std::to_string(spec.replicates));
  if (!(spec.level > 0.0 && spec.level < 1.0))
    throw ValidationError("bootstrap: level must lie strictly in (0,1)");

  CiResult ci;
  ci.level = spec.level;
  ci.seed = spec.seed;
  ci.replicates = spec.replicates;

  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(spec.replicates) + 1);
  for (int r = 0; r < spec.replicates; ++r) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(r)));
    const double est = replicate(rng);
    if (std::isnan(est))
      ++ci.skipped;
    else
      points.push_back(est);
  }
  if (points.empty())
    throw StatError("bootstrap: every replicate was degenerate");
  points.push_back(point);
  std::sort(points.begin(), points.end());

  const double alpha = 1.0 - spec.level;
  ci.low = std::min(quantile_sorted(points, alpha / 2.0), point);
  ci.high = std::max(quantile_sorted(points, 1.0 - alpha / 2.0), point);
  ci.degenerate = !std::isfinite(ci.low) || !std::isfinite(ci.high) ||
                  !std::isfinite(point);
  return ci;
}

inline void resample_into(Rng& rng, const std::vector<double>& src,
                          std::vector<double>& dst) {
  dst.resize(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[rng.index(src.size())];
}

}  // namespace detail

/// Percentile CI for an accuracy estimator: labeled pairs and the proxy pool
/// are resampled independently, with replacement, and the full estimator
/// (including its interpolation weight, where applicable) is recomputed per
/// replicate.
inline CiResult bootstrap_ci(const ModelSample& s, EstimatorKind kind,
                             const BootstrapSpec& spec) {
  const double point = estimate(s, kind).point;
  ModelSample scratch;
  auto replicate = [&](Rng& rng) -> double {
    scratch.labeled_truth.resize(s.labeled_count());
    scratch.labeled_proxy.resize(s.labeled_count());
    for (std::size_t i = 0; i < s.labeled_count(); ++i) {
      const std::size_t j = rng.index(s.labeled_count());
      scratch.labeled_truth[i] = s.labeled_truth[j];
      scratch.labeled_proxy[i] = s.labeled_proxy[j];
    }
    if (kind != EstimatorKind::kGroundTruth)
      detail::resample_into(rng, s.unlabeled_proxy, scratch.unlabeled_proxy);
    try {
      return estimate(scratch, kind).point;
    } catch (const StatError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  return detail::percentile_ci(point, spec, replicate);
}

/// Percentile CI for the stratified estimator: each stratum's labeled pairs
/// and proxy pool are resampled independently per replicate; weights are held
/// fixed.
inline CiResult bootstrap_ci_stratified(
    const std::map<std::string, ModelSample>& strata,
    const std::map<std::string, double>& weights, const BootstrapSpec& spec) {
  const double point = stratified_estimate(strata, weights).point;
  auto replicate = [&](Rng& rng) -> double {
    std::map<std::string, ModelSample> scratch;
    for (const auto& [name, s] : strata) {
      ModelSample& t = scratch[name];
      t.labeled_truth.resize(s.labeled_count());
      t.labeled_proxy.resize(s.labeled_count());
      for (std::size_t i = 0; i < s.labeled_count(); ++i) {
        const std::size_t j = rng.index(s.labeled_count());
        t.labeled_truth[i] = s.labeled_truth[j];
        t.labeled_proxy[i] = s.labeled_proxy[j];
      }
      detail::resample_into(rng, s.unlabeled_proxy, t.unlabeled_proxy);
    }
    try {
      return stratified_estimate(scratch, weights).point;
    } catch (const StatError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  return detail::percentile_ci(point, spec, replicate);
}

/// Percentile CI for the score gap: aligned labeled rows and aligned pool
/// rows are resampled jointly (one index draw selects the same prompt for
/// both models), preserving the cross-model correlation the estimator
/// exploits.
inline CiResult bootstrap_ci_gap(const PairAlignment& al,
                                 const BootstrapSpec& spec) {
  const double point = gap_estimate(al).gap;
  const PairedModelSample& s = al.sample;
  PairAlignment scratch;
  auto replicate = [&](Rng& rng) -> double {
    PairedModelSample& t = scratch.sample;
    t.truth_a.resize(s.labeled_count());
    t.proxy_a.resize(s.labeled_count());
    t.truth_b.resize(s.labeled_count());
    t.proxy_b.resize(s.labeled_count());
    t.pool_a.resize(s.proxy_count());
    t.pool_b.resize(s.proxy_count());
    for (std::size_t i = 0; i < s.labeled_count(); ++i) {
      const std::size_t j = rng.index(s.labeled_count());
      t.truth_a[i] = s.truth_a[j];
      t.proxy_a[i] = s.proxy_a[j];
      t.truth_b[i] = s.truth_b[j];
      t.proxy_b[i] = s.proxy_b[j];
    }
    for (std::size_t i = 0; i < s.proxy_count(); ++i) {
      const std::size_t j = rng.index(s.proxy_count());
      t.pool_a[i] = s.pool_a[j];
      t.pool_b[i] = s.pool_b[j];
    }
    try {
      return gap_estimate(scratch).gap;
    } catch (const StatError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  return detail::percentile_ci(point, spec, replicate);
}

}  // namespace debias
