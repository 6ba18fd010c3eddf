#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "debias/bootstrap.hpp"
#include "debias/calibration.hpp"
#include "debias/common.hpp"
#include "debias/estimators.hpp"

namespace debias {

/// Estimated variance-reduction ceiling for a (possibly continuous) proxy.
struct TauReport {
  std::size_t pairs = 0;
  double rho2_hat = 0;          ///< squared sample correlation, clamped to [0,1]
  bool rho2_degenerate = false; ///< a zero-variance column forced rho2 = 0
  double tau_hat = 1;           ///< 1 / (1 - rho2_hat); +inf at rho2 = 1
  std::optional<CiResult> rho2_ci;
  std::optional<CiResult> tau_ci;
  /// Agreement-based ceiling under the calibration assumption, from the raw
  /// proxy values.
  std::optional<SoftAgreementReport> soft;
  double tau_bound_soft = std::numeric_limits<double>::infinity();
  /// Binned-recalibration audit; present when a bin count was requested.
  std::optional<CalibratedBoundReport> calibration;
};

namespace detail {

inline double tau_of_rho2(double rho2) {
  return rho2 >= 1.0 ? std::numeric_limits<double>::infinity()
                     : 1.0 / (1.0 - rho2);
}

}  // namespace detail

/// Estimates the speedup ceiling from labeled (truth, proxy) pairs.  Truth
/// values must be 0/1; proxies may be any values in [0,1].  With a bootstrap
/// spec, percentile intervals are attached for both the squared correlation
/// and the ceiling itself (infinite replicates are legal for the latter and
/// flag the interval degenerate).  With a bin count, a binned-recalibration
/// audit of the calibration-based ceiling is attached as well.
inline TauReport tau_report(const std::vector<double>& truth,
                            const std::vector<double>& proxy,
                            const std::optional<BootstrapSpec>& boot = {},
                            std::optional<std::size_t> bins = {},
                            double slack = 1e-9) {
  TauReport rep;
  rep.soft = soft_agreement(truth, proxy);  // validates ranges and lengths
  rep.pairs = truth.size();
  if (rep.pairs < 2)
    throw StatError("tau: at least 2 labeled pairs required");

  const Rho2Result r2 = rho2_continuous(truth, proxy);
  rep.rho2_hat = std::clamp(r2.value, 0.0, 1.0);
  rep.rho2_degenerate = r2.degenerate;
  rep.tau_hat = detail::tau_of_rho2(rep.rho2_hat);
  rep.tau_bound_soft = rep.soft->epsilon_star > 0
                           ? 2.0 / rep.soft->epsilon_star
                           : std::numeric_limits<double>::infinity();

  if (boot) {
    std::vector<double> ts(rep.pairs), ps(rep.pairs);
    auto resampled_rho2 = [&](Rng& rng) {
      for (std::size_t i = 0; i < rep.pairs; ++i) {
        const std::size_t j = rng.index(rep.pairs);
        ts[i] = truth[j];
        ps[i] = proxy[j];
      }
      return std::clamp(rho2_continuous(ts, ps).value, 0.0, 1.0);
    };
    rep.rho2_ci = detail::percentile_ci(rep.rho2_hat, *boot, resampled_rho2);
    rep.tau_ci = detail::percentile_ci(
        rep.tau_hat, *boot,
        [&](Rng& rng) { return detail::tau_of_rho2(resampled_rho2(rng)); });
  }

  if (bins) rep.calibration = check_calibrated_bound(truth, proxy, *bins, slack);
  return rep;
}

}  // namespace debias
