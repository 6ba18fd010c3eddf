#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "debias/common.hpp"
#include "debias/world.hpp"

namespace debias {

/// Expected information about theta = (b, q, p) carried by `labeled` joint
/// observations (s, t) plus `proxy_only` marginal observations of t.
/// Built from analytic per-outcome score vectors; exactly symmetric.
struct FisherInfo {
  std::array<std::array<double, 3>, 3> m{};  ///< row/col order: b, q, p

  double operator()(int r, int c) const { return m[r][c]; }
};

namespace detail {

/// Accumulates w * g g^T into a in extended precision.
inline void add_outer(std::array<std::array<long double, 3>, 3>& a,
                      long double w, const std::array<long double, 3>& g) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] += w * g[r] * g[c];
}

}  // namespace detail

inline FisherInfo fisher_information(const JudgeWorld& w, std::uint64_t labeled,
                                     std::uint64_t proxy_only) {
  if (labeled + proxy_only == 0)
    throw ValidationError("fisher_information: labeled + proxy_only >= 1 required");

  const long double b = w.b, p = w.p, q = w.q;
  const long double cell[4] = {b * p, b * (1 - p), (1 - b) * (1 - q),
                               (1 - b) * q};
  if (labeled > 0)
    for (double c : cell)
      if (c <= 0.0)
        throw ValidationError(
            "fisher_information: joint law has a zero-probability outcome; "
            "information matrix is singular");
  const long double mu = b * p + (1 - b) * (1 - q);
  if (proxy_only > 0 && (mu <= 0.0 || mu >= 1.0))
    throw ValidationError(
        "fisher_information: proxy marginal is degenerate; information "
        "matrix is singular");

  std::array<std::array<long double, 3>, 3> acc{};
  if (labeled > 0) {
    // Score vectors of the four joint outcomes, d log P / d(b, q, p).
    const std::array<long double, 3> g11 = {1 / b, 0, 1 / p};
    const std::array<long double, 3> g10 = {1 / b, 0, -1 / (1 - p)};
    const std::array<long double, 3> g01 = {-1 / (1 - b), -1 / (1 - q), 0};
    const std::array<long double, 3> g00 = {-1 / (1 - b), 1 / q, 0};
    const long double n = static_cast<long double>(labeled);
    detail::add_outer(acc, n * cell[0], g11);
    detail::add_outer(acc, n * cell[1], g10);
    detail::add_outer(acc, n * cell[2], g01);
    detail::add_outer(acc, n * cell[3], g00);
  }
  if (proxy_only > 0) {
    // Marginal Pr{t=1} = mu; its gradient in (b, q, p).
    const std::array<long double, 3> grad = {p - (1 - q), -(1 - b), b};
    detail::add_outer(acc,
                      static_cast<long double>(proxy_only) / (mu * (1 - mu)),
                      grad);
  }

  FisherInfo out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.m[r][c] = static_cast<double>(acc[r][c]);
  return out;
}

/// (I^{-1})_{(b,b)} via the adjugate in extended precision.
inline double inverse_bb(const FisherInfo& info) {
  // Gaussian elimination with partial pivoting on [info | e_b], in long
  // double.  A cofactor/determinant route loses ~log10(N/n) digits to
  // cancellation when the rank-one proxy block dominates (large N), while
  // elimination stays backward-stable there.
  long double a[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a[r][c] = info.m[r][c];
    a[r][3] = r == 0 ? 1.0L : 0.0L;
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0L)
      throw ValidationError("inverse_bb: information matrix is singular");
    if (piv != col)
      for (int c = 0; c < 4; ++c) std::swap(a[piv][c], a[col][c]);
    for (int r = col + 1; r < 3; ++r) {
      const long double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  long double x[3];
  for (int r = 2; r >= 0; --r) {
    long double acc = a[r][3];
    for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  const double out = static_cast<double>(x[0]);
  if (!std::isfinite(out) || !(out > 0))
    throw ValidationError(
        "inverse_bb: information matrix is not positive definite");
  return out;
}

/// Sampling-variance landscape of the accuracy estimators at a design point
/// (world, labeled count n, proxy count N):
///   var_gt        classical labeled-only mean, Var s / n
///   var_pp        bias-corrected proxy mean, Var t / N + Var(t - s) / n
///   var_pp_tuned  the same with the optimal interpolation weight
///   lambda_star   that optimal weight, Cov / ((1 + n/N) Var t)
///   cr_bound      Cramer-Rao floor (I^{-1})_{(b,b)} for any unbiased
///                 estimator seeing the same data
/// The tuned variance provably equals the Cramer-Rao floor; the constructor
/// verifies this to 1e-9 relative and throws std::logic_error on failure.
struct VarianceProfile {
  double var_gt = 0;
  double var_pp = 0;       ///< NaN when pp_defined is false (N == 0)
  double var_pp_tuned = 0;
  double lambda_star = 0;
  double cr_bound = 0;
  bool pp_defined = true;

  double tau_pp() const { return var_gt / var_pp; }
  double tau_tuned() const { return var_gt / var_pp_tuned; }
};

namespace detail {
inline constexpr double kTunedEqualsCrTol = 1e-9;
}  // namespace detail

inline VarianceProfile variance_profile(const JudgeWorld& w,
                                        std::uint64_t labeled,
                                        ProxyCount proxy) {
  if (labeled < 1)
    throw StatError("variance_profile: at least one labeled record required");
  const DerivedQuantities d = derived_quantities(w);
  const double n = static_cast<double>(labeled);
  const double var_diff = d.var_truth + d.var_proxy - 2.0 * d.cov;

  VarianceProfile v;
  v.var_gt = d.var_truth / n;
  if (!proxy.is_infinite() && proxy.value() == 0) {
    v.pp_defined = false;
    v.var_pp = std::numeric_limits<double>::quiet_NaN();
    v.lambda_star = 0.0;
    v.var_pp_tuned = v.var_gt;
    v.cr_bound = inverse_bb(fisher_information(w, labeled, 0));
  } else {
    const double inv_N = proxy.reciprocal();       // 0 when unlimited
    const double ratio = proxy.ratio_from(n);      // n/N, 0 when unlimited
    v.var_pp = d.var_proxy * inv_N + var_diff / n;
    v.lambda_star =
        d.var_proxy > 0 ? d.cov / ((1.0 + ratio) * d.var_proxy) : 0.0;
    v.var_pp_tuned =
        d.var_truth / n -
        (d.var_proxy > 0
             ? (d.cov * d.cov) / ((n + n * ratio) * d.var_proxy)
             : 0.0);
    if (proxy.is_infinite())
      // Limit of the information bound as the proxy supply grows without
      // bound; coincides with the tuned closed form, which is exact here.
      v.cr_bound = v.var_pp_tuned;
    else
      v.cr_bound = inverse_bb(fisher_information(w, labeled, proxy.value()));
  }

  if (!close_rel(v.var_pp_tuned, v.cr_bound, detail::kTunedEqualsCrTol))
    throw std::logic_error(
        "variance_profile: tuned variance does not meet the information bound "
        "(b=" + std::to_string(w.b) + " p=" + std::to_string(w.p) +
        " q=" + std::to_string(w.q) + ")");
  if (v.var_pp_tuned > v.var_gt * (1.0 + detail::kTunedEqualsCrTol))
    throw std::logic_error(
        "variance_profile: tuned variance exceeds the labeled-only variance");
  return v;
}

}  // namespace debias
