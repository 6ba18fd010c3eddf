#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "debias/common.hpp"

namespace debias {

/// Expected-agreement summary of (truth, proxy) pairs with a possibly
/// continuous proxy in [0,1].  `soft` generalizes the plain agreement rate:
/// for a binary proxy it equals the fraction of exact matches.
struct SoftAgreementReport {
  double soft = 0;          ///< mean of s*t + (1-s)(1-t)
  double mse = 0;           ///< mean of (s-t)^2
  double truth_mean = 0;    ///< labeled accuracy estimate b
  double epsilon_star = 1;  ///< largest e with e*(1-b) <= 1-soft, capped at 1
  double rho2_bound = 0.5;  ///< implied ceiling 1 - epsilon_star/2
  std::size_t pairs = 0;
};

inline SoftAgreementReport soft_agreement(std::span<const double> truth,
                                          std::span<const double> proxy) {
  if (truth.size() != proxy.size())
    throw ValidationError("soft_agreement: truth/proxy length mismatch");
  if (truth.empty())
    throw StatError("soft_agreement: at least one labeled pair required");
  SoftAgreementReport r;
  r.pairs = truth.size();
  double soft = 0, mse = 0, tm = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double s = truth[i], t = proxy[i];
    if (!(t >= 0.0 && t <= 1.0))
      throw ValidationError("soft_agreement: proxy outside [0,1]");
    if (s != 0.0 && s != 1.0)
      throw ValidationError("soft_agreement: truth must be 0 or 1");
    soft += s * t + (1.0 - s) * (1.0 - t);
    mse += (s - t) * (s - t);
    tm += s;
  }
  const double n = static_cast<double>(truth.size());
  r.soft = soft / n;
  r.mse = mse / n;
  r.truth_mean = tm / n;
  r.epsilon_star = r.truth_mean < 1.0
                       ? std::min(1.0, (1.0 - r.soft) / (1.0 - r.truth_mean))
                       : 1.0;
  r.rho2_bound = 1.0 - r.epsilon_star / 2.0;
  return r;
}

/// Histogram recalibration map: equal-width bins over [0,1], each mapped to
/// the labeled truth frequency observed in it.  Empty bins fall back to the
/// global labeled mean and are flagged.
struct CalibrationMap {
  std::vector<double> edges;   ///< bins+1 ascending edges, edges[0]=0, back=1
  std::vector<double> means;   ///< per-bin mapped value
  std::vector<std::size_t> counts;
  std::vector<bool> fallback;  ///< true where the global mean was substituted
  double fallback_mean = 0;

  std::size_t bin_of(double x) const {
    // Equal-width binning; x == 1 lands in the last bin.
    const std::size_t bins = means.size();
    const double scaled = x * static_cast<double>(bins);
    std::size_t idx = static_cast<std::size_t>(scaled);
    return std::min(idx, bins - 1);
  }

  double apply(double x) const {
    if (!(x >= 0.0 && x <= 1.0))
      throw ValidationError("CalibrationMap::apply: proxy outside [0,1]");
    return means[bin_of(x)];
  }

  bool any_fallback() const {
    return std::any_of(fallback.begin(), fallback.end(),
                       [](bool f) { return f; });
  }
};

inline CalibrationMap recalibrate(std::span<const double> truth,
                                  std::span<const double> proxy, int bins) {
  if (bins < 1) throw ValidationError("recalibrate: bins >= 1 required");
  if (truth.size() != proxy.size())
    throw ValidationError("recalibrate: truth/proxy length mismatch");
  if (truth.empty())
    throw StatError("recalibrate: at least one labeled pair required");

  CalibrationMap m;
  const std::size_t nb = static_cast<std::size_t>(bins);
  m.edges.resize(nb + 1);
  for (std::size_t i = 0; i <= nb; ++i)
    m.edges[i] = static_cast<double>(i) / static_cast<double>(nb);
  m.means.assign(nb, 0.0);
  m.counts.assign(nb, 0);
  m.fallback.assign(nb, false);

  std::vector<double> sums(nb, 0.0);
  double total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(proxy[i] >= 0.0 && proxy[i] <= 1.0))
      throw ValidationError("recalibrate: proxy outside [0,1]");
    const std::size_t b = m.bin_of(proxy[i]);
    sums[b] += truth[i];
    ++m.counts[b];
    total += truth[i];
  }
  m.fallback_mean = total / static_cast<double>(truth.size());
  for (std::size_t b = 0; b < nb; ++b) {
    if (m.counts[b] == 0) {
      m.means[b] = m.fallback_mean;
      m.fallback[b] = true;
    } else {
      m.means[b] = sums[b] / static_cast<double>(m.counts[b]);
    }
  }
  return m;
}

/// Squared sample Pearson correlation between truth and a (possibly
/// continuous) proxy.  A zero-variance side makes the correlation undefined;
/// it is reported as 0 with the degenerate flag set.
struct Rho2Result {
  double value = 0;
  bool degenerate = false;
};

inline Rho2Result rho2_continuous(std::span<const double> truth,
                                  std::span<const double> proxy) {
  if (truth.size() != proxy.size())
    throw ValidationError("rho2_continuous: truth/proxy length mismatch");
  if (truth.size() < 2)
    throw StatError("rho2_continuous: at least two labeled pairs required");
  const double n = static_cast<double>(truth.size());
  double ms = 0, mt = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ms += truth[i];
    mt += proxy[i];
  }
  ms /= n;
  mt /= n;
  double vs = 0, vt = 0, c = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    vs += (truth[i] - ms) * (truth[i] - ms);
    vt += (proxy[i] - mt) * (proxy[i] - mt);
    c += (truth[i] - ms) * (proxy[i] - mt);
  }
  Rho2Result r;
  if (vs <= 0.0 || vt <= 0.0) {
    r.degenerate = true;
    return r;
  }
  r.value = (c * c) / (vs * vt);
  return r;
}

/// Recalibrates, then audits the correlation ceilings implied by the
/// recalibrated proxy's soft agreement:
///   rho2 <= 1 - epsilon_star/2          (error-rate ceiling)
///   rho2 <= 1/2 when soft <= truth mean (the proxy errs at least as often)
/// and the exact identity for calibrated proxies
///   rho2 = 1 - (1 - soft) / (2 b (1-b)).
/// All checks are evaluated with caller-supplied `slack` absorbing sampling
/// and binning noise; the raw gaps are reported so callers can assert their
/// own tolerances.
struct CalibratedBoundReport {
  SoftAgreementReport agreement;  ///< of the recalibrated proxy
  double rho2 = 0;                ///< rho2(truth, recalibrated proxy)
  bool rho2_degenerate = false;
  double tau_bound = 2;           ///< 2 / epsilon_star
  double identity_gap = 0;        ///< rho2 - [1 - (1-soft)/(2 b (1-b))]
  bool ceiling_ok = true;         ///< rho2 <= 1 - eps*/2 + slack
  bool half_applicable = false;   ///< soft <= truth mean
  bool half_ok = true;            ///< rho2 <= 1/2 + slack when applicable
  double slack = 0;
  bool used_fallback_bins = false;
};

inline CalibratedBoundReport check_calibrated_bound(
    std::span<const double> truth, std::span<const double> proxy, int bins,
    double slack) {
  const CalibrationMap map = recalibrate(truth, proxy, bins);
  std::vector<double> recal(proxy.size());
  for (std::size_t i = 0; i < proxy.size(); ++i) recal[i] = map.apply(proxy[i]);

  CalibratedBoundReport r;
  r.slack = slack;
  r.used_fallback_bins = map.any_fallback();
  r.agreement = soft_agreement(truth, recal);
  const Rho2Result rho = rho2_continuous(truth, recal);
  r.rho2 = rho.value;
  r.rho2_degenerate = rho.degenerate;
  r.tau_bound = 2.0 / r.agreement.epsilon_star;
  const double b = r.agreement.truth_mean;
  if (b > 0.0 && b < 1.0)
    r.identity_gap =
        r.rho2 - (1.0 - (1.0 - r.agreement.soft) / (2.0 * b * (1.0 - b)));
  r.ceiling_ok = r.rho2 <= r.agreement.rho2_bound + slack;
  r.half_applicable = r.agreement.soft <= b + slack;
  r.half_ok = !r.half_applicable || r.rho2 <= 0.5 + slack;
  return r;
}

}  // namespace debias
