#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "debias/common.hpp"
#include "debias/dataset.hpp"

namespace debias {

// ---------------------------------------------------------------------------
// Sample moments (two-pass, n-1 denominators, deterministic evaluation order).
// ---------------------------------------------------------------------------

inline double mean_of(std::span<const double> xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_var(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double sample_cov(std::span<const double> xs,
                         std::span<const double> ys) {
  const double mx = mean_of(xs), my = mean_of(ys);
  double s = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += (xs[i] - mx) * (ys[i] - my);
  return s / static_cast<double>(xs.size() - 1);
}

/// Variance of the pooled proxy sample (labeled proxies followed by the
/// proxy-only pool), the scale used by the tuned interpolation weight.
inline double pooled_proxy_var(const ModelSample& s) {
  const std::size_t total = s.labeled_proxy.size() + s.unlabeled_proxy.size();
  double sum = 0;
  for (double x : s.labeled_proxy) sum += x;
  for (double x : s.unlabeled_proxy) sum += x;
  const double m = sum / static_cast<double>(total);
  double acc = 0;
  for (double x : s.labeled_proxy) acc += (x - m) * (x - m);
  for (double x : s.unlabeled_proxy) acc += (x - m) * (x - m);
  return total >= 2 ? acc / static_cast<double>(total - 1) : 0.0;
}

// ---------------------------------------------------------------------------
// Point estimators
// ---------------------------------------------------------------------------

enum class EstimatorKind { kGroundTruth, kProxyCorrected, kProxyCorrectedTuned };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kGroundTruth: return "gt";
    case EstimatorKind::kProxyCorrected: return "ppi";
    case EstimatorKind::kProxyCorrectedTuned: return "ppi-tuned";
  }
  return "?";
}

inline EstimatorKind estimator_kind_from(const std::string& name) {
  if (name == "gt") return EstimatorKind::kGroundTruth;
  if (name == "ppi") return EstimatorKind::kProxyCorrected;
  if (name == "ppi-tuned") return EstimatorKind::kProxyCorrectedTuned;
  throw ValidationError("unknown estimator '" + name +
                        "' (expected gt, ppi, or ppi-tuned)");
}

/// Percentile confidence interval attached to a report by the bootstrap.
struct CiResult {
  double low = 0;
  double high = 0;
  double level = 0.90;
  int replicates = 0;       ///< replicates drawn
  int skipped = 0;          ///< degenerate replicates dropped
  std::uint64_t seed = 0;
  bool degenerate = false;  ///< an endpoint or the point itself is not finite
};

struct EstimateReport {
  EstimatorKind kind = EstimatorKind::kGroundTruth;
  double point = 0;
  double variance_hat = 0;
  double lambda_used = 0;    ///< weight on the proxy-corrected component
  double tau_hat = 1;        ///< plug-in var(gt) / var(this estimator)
  double rho2_hat = 0;       ///< squared sample correlation on labeled pairs
  std::size_t labeled_count = 0;
  std::size_t proxy_count = 0;
  bool lambda_clamped = false;
  bool degenerate_proxy = false;  ///< proxy sample carried no variance
  std::optional<CiResult> ci;
};

/// Optimal plug-in interpolation weight Cov(s,t) / ((1 + n/N) Var t), with
/// Var t taken over the pooled proxy sample.  Clamped to [0,1].
struct LambdaHat {
  double value = 0;
  bool clamped = false;
  bool degenerate = false;  ///< pooled proxy variance was zero
};

namespace detail {

inline void require_labeled(const ModelSample& s, std::size_t need,
                            const char* who) {
  if (s.labeled_count() < need)
    throw StatError(std::string(who) + ": at least " + std::to_string(need) +
                    " labeled records required, got " +
                    std::to_string(s.labeled_count()));
}

inline void require_pool(const ModelSample& s, const char* who) {
  if (s.proxy_count() < 1)
    throw StatError(std::string(who) +
                    ": at least one proxy-only record required");
}

inline double rho2_pairs(const ModelSample& s, bool* degenerate = nullptr) {
  const double vs = sample_var(s.labeled_truth);
  const double vt = sample_var(s.labeled_proxy);
  if (vs <= 0.0 || vt <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double c = sample_cov(s.labeled_truth, s.labeled_proxy);
  return (c * c) / (vs * vt);
}

}  // namespace detail

/// Labeled-only mean.  variance_hat is the usual sample-variance/n.
inline EstimateReport estimate_gt(const ModelSample& s) {
  detail::require_labeled(s, 2, "estimate_gt");
  EstimateReport r;
  r.kind = EstimatorKind::kGroundTruth;
  r.labeled_count = s.labeled_count();
  r.proxy_count = s.proxy_count();
  r.point = mean_of(s.labeled_truth);
  r.variance_hat =
      sample_var(s.labeled_truth) / static_cast<double>(s.labeled_count());
  r.lambda_used = 0;
  r.tau_hat = 1;
  if (!s.labeled_proxy.empty()) r.rho2_hat = detail::rho2_pairs(s);
  return r;
}

inline LambdaHat lambda_star_hat(const ModelSample& s) {
  detail::require_labeled(s, 2, "lambda_star_hat");
  detail::require_pool(s, "lambda_star_hat");
  LambdaHat l;
  const double vt = pooled_proxy_var(s);
  if (vt <= 0.0) {
    l.degenerate = true;
    return l;
  }
  const double n = static_cast<double>(s.labeled_count());
  const double N = static_cast<double>(s.proxy_count());
  const double raw = sample_cov(s.labeled_truth, s.labeled_proxy) /
                     ((1.0 + n / N) * vt);
  l.value = std::clamp(raw, 0.0, 1.0);
  l.clamped = raw != l.value;
  return l;
}

/// Proxy-corrected estimate at a fixed interpolation weight `lambda`:
///   point = lambda * [mean(pool t) + mean(s - t over labeled)]
///           + (1 - lambda) * mean(s over labeled).
/// variance_hat evaluates the exact quadratic in lambda with plug-in moments:
///   l^2 [Var_pool t / N + Var(t - s)/n] + (1-l)^2 Var s / n
///   + 2 l (1-l) [Var s - Cov(s,t)] / n.
inline EstimateReport estimate_ppi_at(const ModelSample& s, double lambda) {
  detail::require_labeled(s, 2, "estimate_ppi_at");
  detail::require_pool(s, "estimate_ppi_at");
  const double n = static_cast<double>(s.labeled_count());
  const double N = static_cast<double>(s.proxy_count());

  const double pool_mean = mean_of(s.unlabeled_proxy);
  const double truth_mean = mean_of(s.labeled_truth);
  const double proxy_mean_l = mean_of(s.labeled_proxy);

  std::vector<double> diff(s.labeled_count());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = s.labeled_proxy[i] - s.labeled_truth[i];
  const double var_diff = sample_var(diff);
  const double var_pool = sample_var(s.unlabeled_proxy);
  const double var_s = sample_var(s.labeled_truth);
  const double cov = sample_cov(s.labeled_truth, s.labeled_proxy);

  EstimateReport r;
  r.labeled_count = s.labeled_count();
  r.proxy_count = s.proxy_count();
  r.lambda_used = lambda;
  r.point = lambda * (pool_mean - proxy_mean_l) + truth_mean;
  const double corrected_var = var_pool / N + var_diff / n;
  r.variance_hat = lambda * lambda * corrected_var +
                   (1.0 - lambda) * (1.0 - lambda) * var_s / n +
                   2.0 * lambda * (1.0 - lambda) * (var_s - cov) / n;
  r.tau_hat = r.variance_hat > 0 ? (var_s / n) / r.variance_hat
                                 : std::numeric_limits<double>::infinity();
  bool degenerate = false;
  r.rho2_hat = detail::rho2_pairs(s, &degenerate);
  r.degenerate_proxy = degenerate;
  return r;
}

/// Bias-corrected proxy mean (full weight on the correction term).
inline EstimateReport estimate_ppi(const ModelSample& s) {
  EstimateReport r = estimate_ppi_at(s, 1.0);
  r.kind = EstimatorKind::kProxyCorrected;
  return r;
}

/// Proxy-corrected mean at the estimated optimal weight.  When the weight is
/// interior the variance is reported through the closed form
///   Var s / n - Cov^2 / ((n + n^2/N) Var_pool t),
/// which the quadratic reduces to at the optimum; when clamping fires the
/// quadratic is evaluated at the clamped weight instead (the closed form
/// would overstate the achieved variance there).
inline EstimateReport estimate_ppi_tuned(const ModelSample& s) {
  const LambdaHat l = lambda_star_hat(s);
  EstimateReport r = estimate_ppi_at(s, l.value);
  r.kind = EstimatorKind::kProxyCorrectedTuned;
  r.lambda_clamped = l.clamped;
  r.degenerate_proxy = r.degenerate_proxy || l.degenerate;
  if (!l.clamped && !l.degenerate) {
    const double n = static_cast<double>(s.labeled_count());
    const double N = static_cast<double>(s.proxy_count());
    const double vt = pooled_proxy_var(s);
    const double var_s = sample_var(s.labeled_truth);
    const double cov = sample_cov(s.labeled_truth, s.labeled_proxy);
    r.variance_hat = var_s / n - (cov * cov) / ((n + n * n / N) * vt);
    r.tau_hat = r.variance_hat > 0
                    ? (var_s / n) / r.variance_hat
                    : std::numeric_limits<double>::infinity();
  }
  return r;
}

inline EstimateReport estimate(const ModelSample& s, EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kGroundTruth: return estimate_gt(s);
    case EstimatorKind::kProxyCorrected: return estimate_ppi(s);
    case EstimatorKind::kProxyCorrectedTuned: return estimate_ppi_tuned(s);
  }
  throw ValidationError("estimate: unknown estimator kind");
}

// Dataset-level conveniences.
inline EstimateReport estimate(const PairedDataset& data,
                               const std::string& model, EstimatorKind kind) {
  return estimate(data.extract(model), kind);
}

// ---------------------------------------------------------------------------
// Stratified estimation
// ---------------------------------------------------------------------------

struct StratifiedReport {
  double point = 0;
  double variance_hat = 0;  ///< sum over strata of w_k^2 var_k
  std::size_t labeled_count = 0;
  std::size_t proxy_count = 0;
  std::map<std::string, EstimateReport> strata;
  std::map<std::string, double> weights;
  bool weights_derived = false;  ///< weights came from proxy-pool counts
};

/// Population weights proportional to each stratum's proxy-pool size.
inline std::map<std::string, double> weights_from_proxy_counts(
    const std::map<std::string, ModelSample>& strata) {
  double total = 0;
  for (const auto& [name, s] : strata) total += static_cast<double>(s.proxy_count());
  if (total <= 0)
    throw ValidationError(
        "weights_from_proxy_counts: no proxy-only records in any stratum");
  std::map<std::string, double> w;
  for (const auto& [name, s] : strata)
    w[name] = static_cast<double>(s.proxy_count()) / total;
  return w;
}

/// Weighted combination of per-stratum tuned estimates.  Weights must cover
/// exactly the strata present and sum to 1 (tolerance 1e-9).  A stratum with
/// an empty proxy pool falls back to its labeled-only mean.
inline StratifiedReport stratified_estimate(
    const std::map<std::string, ModelSample>& strata,
    const std::map<std::string, double>& weights) {
  if (strata.empty())
    throw ValidationError("stratified_estimate: no strata in data");
  for (const auto& [name, w] : weights)
    if (!strata.count(name))
      throw ValidationError("stratified_estimate: weight given for stratum '" +
                            name + "' which has no records");
  double sum = 0;
  for (const auto& [name, s] : strata) {
    auto it = weights.find(name);
    if (it == weights.end())
      throw ValidationError("stratified_estimate: no weight for stratum '" +
                            name + "'");
    if (it->second < 0)
      throw ValidationError("stratified_estimate: negative weight for stratum '" +
                            name + "'");
    sum += it->second;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("stratified_estimate: weights sum to " +
                          std::to_string(sum) + ", expected 1");

  StratifiedReport out;
  out.weights = weights;
  for (const auto& [name, s] : strata) {
    if (s.labeled_count() < 2)
      throw StatError("stratified_estimate: stratum '" + name +
                      "' has fewer than 2 labeled records");
    EstimateReport r = s.proxy_count() >= 1 ? estimate_ppi_tuned(s)
                                            : estimate_gt(s);
    const double w = weights.at(name);
    out.point += w * r.point;
    out.variance_hat += w * w * r.variance_hat;
    out.labeled_count += r.labeled_count;
    out.proxy_count += r.proxy_count;
    out.strata.emplace(name, std::move(r));
  }
  return out;
}

inline StratifiedReport stratified_estimate(
    const PairedDataset& data, const std::string& model,
    const std::map<std::string, double>& weights) {
  return stratified_estimate(data.extract_strata(model), weights);
}

// ---------------------------------------------------------------------------
// Score-gap estimation for a model pair on shared prompts
// ---------------------------------------------------------------------------

struct GapReport {
  double gap = 0;            ///< estimate of E s(a) - E s(b)
  double variance_hat = 0;
  double lambda_a = 0;       ///< solved joint interpolation weights
  double lambda_b = 0;
  /// Single-expression closed forms sometimes quoted for these weights.
  /// Their shared denominator is dimensionally inconsistent (the cross
  /// covariance enters unsquared), so they are exposed purely as diagnostics;
  /// the solved normal equations above are authoritative.
  double lambda_a_diagnostic = 0;
  double lambda_b_diagnostic = 0;
  std::size_t labeled_count = 0;
  std::size_t proxy_count = 0;
  std::size_t only_a = 0;  ///< prompts that failed to align, per side
  std::size_t only_b = 0;
  bool decoupled = false;  ///< joint system was singular; per-model weights used
  std::optional<CiResult> ci;
};

/// Estimates the accuracy gap between two models from prompt-aligned data,
/// solving the 2x2 normal equations for the jointly optimal interpolation
/// weights.  With independent models the solution reduces to each model's own
/// optimal weight; with identical records the gap is exactly 0.
inline GapReport gap_estimate(const PairAlignment& al) {
  const PairedModelSample& s = al.sample;
  if (s.labeled_count() < 2)
    throw StatError(
        "gap_estimate: at least 2 jointly-labeled shared prompts required, "
        "got " + std::to_string(s.labeled_count()) +
        " (unaligned prompts: " + std::to_string(al.only_a) + " only in A, " +
        std::to_string(al.only_b) + " only in B)");

  const double n = static_cast<double>(s.labeled_count());
  const double N = static_cast<double>(s.proxy_count());

  GapReport r;
  r.labeled_count = s.labeled_count();
  r.proxy_count = s.proxy_count();
  r.only_a = al.only_a;
  r.only_b = al.only_b;

  // Labeled-only moments.
  const double c_aa = sample_cov(s.truth_a, s.proxy_a);
  const double c_ba = sample_cov(s.truth_b, s.proxy_a);
  const double c_ab = sample_cov(s.truth_a, s.proxy_b);
  const double c_bb = sample_cov(s.truth_b, s.proxy_b);
  std::vector<double> sdiff(s.labeled_count());
  for (std::size_t i = 0; i < sdiff.size(); ++i)
    sdiff[i] = s.truth_a[i] - s.truth_b[i];
  const double var_sdiff = sample_var(sdiff);

  auto pooled = [&](const std::vector<double>& lab,
                    const std::vector<double>& pool) {
    ModelSample tmp;
    tmp.labeled_proxy = lab;
    tmp.unlabeled_proxy = pool;
    return pooled_proxy_var(tmp);
  };
  const double v_a = pooled(s.proxy_a, s.pool_a);
  const double v_b = pooled(s.proxy_b, s.pool_b);
  // Pooled cross-covariance over all aligned rows (labeled then pool).
  double cross;
  {
    std::vector<double> xa(s.proxy_a), xb(s.proxy_b);
    xa.insert(xa.end(), s.pool_a.begin(), s.pool_a.end());
    xb.insert(xb.end(), s.pool_b.begin(), s.pool_b.end());
    cross = xa.size() >= 2 ? sample_cov(xa, xb) : 0.0;
  }

  const double ratio = N > 0 ? n / N : std::numeric_limits<double>::infinity();
  if (N == 0) {
    r.lambda_a = r.lambda_b = 0;
    r.decoupled = true;
  } else {
    const double rhs_a = (c_aa - c_ba) / (1.0 + ratio);
    const double rhs_b = (c_bb - c_ab) / (1.0 + ratio);
    const double det = v_a * v_b - cross * cross;
    if (det <= 1e-12 * std::max(v_a * v_b, cross * cross) || v_a <= 0 ||
        v_b <= 0) {
      r.decoupled = true;
      r.lambda_a = v_a > 0 ? c_aa / ((1.0 + ratio) * v_a) : 0.0;
      r.lambda_b = v_b > 0 ? c_bb / ((1.0 + ratio) * v_b) : 0.0;
    } else {
      r.lambda_a = (v_b * rhs_a + cross * rhs_b) / det;
      r.lambda_b = (cross * rhs_a + v_a * rhs_b) / det;
    }
    const double diag_den = (1.0 + ratio) * (v_a * v_b - cross);
    if (diag_den != 0) {
      r.lambda_a_diagnostic =
          (c_bb * cross - c_ab * cross + c_aa * v_b - c_ba * v_b) / diag_den;
      r.lambda_b_diagnostic =
          (c_aa * cross - c_ba * cross + c_bb * v_a - c_ab * v_a) / diag_den;
    }
  }

  const double pool_mean_a = N > 0 ? mean_of(s.pool_a) : 0.0;
  const double pool_mean_b = N > 0 ? mean_of(s.pool_b) : 0.0;
  double labeled_part = 0;
  for (std::size_t i = 0; i < s.labeled_count(); ++i)
    labeled_part += (s.truth_a[i] - r.lambda_a * s.proxy_a[i]) -
                    (s.truth_b[i] - r.lambda_b * s.proxy_b[i]);
  labeled_part /= n;
  r.gap = r.lambda_a * pool_mean_a - r.lambda_b * pool_mean_b + labeled_part;

  const double kappa = 1.0 / n + (N > 0 ? 1.0 / N : 0.0);
  const double la = r.lambda_a, lb = r.lambda_b;
  r.variance_hat = kappa * (la * la * v_a + lb * lb * v_b -
                            2.0 * la * lb * cross) -
                   2.0 * la * (c_aa - c_ba) / n - 2.0 * lb * (c_bb - c_ab) / n +
                   var_sdiff / n;
  return r;
}

inline GapReport gap_estimate(const PairedDataset& data,
                              const std::string& model_a,
                              const std::string& model_b) {
  return gap_estimate(data.extract_pair(model_a, model_b));
}

}  // namespace debias
