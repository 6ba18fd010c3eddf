#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "debias/common.hpp"

namespace debias {

/// Joint law of a binary ground-truth score s and a binary judge score t
/// ("the proxy") over a random prompt, in three parameters:
///   b = Pr{s = 1}          model accuracy under ground truth
///   p = Pr{t = s | s = 1}  judge agreement rate on correct answers
///   q = Pr{t = s | s = 0}  judge agreement rate on incorrect answers
/// Strict worlds keep all three strictly inside (0,1); relaxed worlds allow
/// the closed interval so boundary constructions can be represented.
struct JudgeWorld {
  double b = 0.5;
  double p = 0.5;
  double q = 0.5;
  bool strict = true;

  /// All parameters strictly inside (0,1); throws ValidationError otherwise.
  static JudgeWorld strict_world(double b, double p, double q) {
    require_in_open(b, 0.0, 1.0, "b");
    require_in_open(p, 0.0, 1.0, "p");
    require_in_open(q, 0.0, 1.0, "q");
    return JudgeWorld{b, p, q, true};
  }

  /// Parameters in the closed interval [0,1]; boundary values allowed.
  static JudgeWorld relaxed(double b, double p, double q) {
    require_in(b, 0.0, 1.0, "b");
    require_in(p, 0.0, 1.0, "p");
    require_in(q, 0.0, 1.0, "q");
    return JudgeWorld{b, p, q, false};
  }

  /// Joint probabilities of (s, t): {11, 10, 01, 00}.  Sums to 1 up to
  /// rounding in the last ulp.
  std::array<double, 4> joint() const {
    return {b * p, b * (1.0 - p), (1.0 - b) * (1.0 - q), (1.0 - b) * q};
  }

  /// Pr{t = 1} = b p + (1-b)(1-q).
  double proxy_mean() const { return b * p + (1.0 - b) * (1.0 - q); }
};

/// Closed-form population quantities of a JudgeWorld.
struct DerivedQuantities {
  double bias = 0;                 ///< E t - E s = (1-q)(1-b) - (1-p)b
  double agreement = 0;            ///< Pr{t = s} = b p + (1-b) q
  double balanced_agreement = 0;   ///< (p + q) / 2
  double proxy_mean = 0;           ///< E t
  double var_truth = 0;            ///< Var s = b(1-b)
  double var_proxy = 0;            ///< Var t
  double cov = 0;                  ///< Cov(s, t) = b (p - E t)
  double rho2 = 0;                 ///< squared correlation, clamped to [0,1]
  double tau_max = 1;              ///< 1/(1-rho2); +inf iff rho2 == 1
};

namespace detail {
/// Internal cross-check tolerance between the two closed-form routes to rho2.
inline constexpr double kRho2CrossCheckTol = 1e-12;
}  // namespace detail

/// Computes every derived quantity of `w`.  rho2 is evaluated through the
/// covariance definition cov^2/(var_truth*var_proxy) and, where defined,
/// through the independent factored form [b/(1-b)] (p - E t)^2 / Var t; the
/// two must agree to 1e-12 or the function throws std::logic_error (a
/// disagreement would falsify the implementation, not the input).
inline DerivedQuantities derived_quantities(const JudgeWorld& w) {
  DerivedQuantities d;
  const double mu = w.proxy_mean();
  d.proxy_mean = mu;
  d.bias = (1.0 - w.q) * (1.0 - w.b) - (1.0 - w.p) * w.b;
  d.agreement = w.b * w.p + (1.0 - w.b) * w.q;
  d.balanced_agreement = 0.5 * (w.p + w.q);
  d.var_truth = w.b * (1.0 - w.b);
  d.var_proxy = mu * (1.0 - mu);
  d.cov = w.b * (w.p - mu);

  double rho2 = 0.0;
  if (d.var_truth > 0.0 && d.var_proxy > 0.0) {
    rho2 = (d.cov * d.cov) / (d.var_truth * d.var_proxy);
    if (w.b < 1.0) {
      const double gap = w.p - mu;
      const double factored = (w.b / (1.0 - w.b)) * gap * gap / d.var_proxy;
      if (!close(rho2, factored, detail::kRho2CrossCheckTol))
        throw std::logic_error(
            "derived_quantities: rho2 routes disagree beyond 1e-12 (b=" +
            std::to_string(w.b) + " p=" + std::to_string(w.p) +
            " q=" + std::to_string(w.q) + ")");
    }
  }
  d.rho2 = std::min(1.0, std::max(0.0, rho2));
  d.tau_max = d.rho2 == 1.0 ? std::numeric_limits<double>::infinity()
                            : 1.0 / (1.0 - d.rho2);
  return d;
}

/// World of a model that is strictly better than the judge that scores it:
/// the model's correct set contains the judge's.  `x` is the judge accuracy,
/// `delta` the model's edge.  Yields (b, p, q) = (x+delta, x/(x+delta), 0);
/// the proxy rewards agreement, so here it is anti-correlated with quality.
inline JudgeWorld strict_better_world(double x, double delta) {
  if (!(x >= 0.5))
    throw ValidationError("strict_better_world: x >= 0.5 required, got " +
                          std::to_string(x));
  if (!(delta > 0.0))
    throw ValidationError("strict_better_world: delta > 0 required, got " +
                          std::to_string(delta));
  if (!(x + delta <= 1.0))
    throw ValidationError("strict_better_world: x + delta <= 1 required, got " +
                          std::to_string(x + delta));
  return JudgeWorld::relaxed(x + delta, x / (x + delta), 0.0);
}

/// World with a prescribed agreement rate r and the largest-magnitude score
/// bias that rate permits, namely |bias| = 1 - r.  `sign` (+1/-1) selects the
/// direction of the bias.  Demonstrates that high agreement caps the bias at
/// 1 - r but constrains nothing else.
inline JudgeWorld adversarial_agreement_world(double b, double r, int sign) {
  require_in_open(b, 0.0, 1.0, "b");
  require_in(r, 0.0, 1.0, "r");
  if (sign != 1 && sign != -1)
    throw ValidationError("adversarial_agreement_world: sign must be +1 or -1");
  if (sign == 1) {
    if (!(r >= b))
      throw ValidationError(
          "adversarial_agreement_world: r >= b required for sign=+1, got r=" +
          std::to_string(r) + " b=" + std::to_string(b));
    // p = 1, q = (r-b)/(1-b): agreement r, bias +(1-r).
    return JudgeWorld::relaxed(b, 1.0, (r - b) / (1.0 - b));
  }
  if (!(r >= 1.0 - b))
    throw ValidationError(
        "adversarial_agreement_world: r >= 1-b required for sign=-1, got r=" +
        std::to_string(r) + " b=" + std::to_string(b));
  // q = 1, p = (r-1+b)/b: agreement r, bias -(1-r).
  return JudgeWorld::relaxed(b, (r - 1.0 + b) / b, 1.0);
}

/// World whose judge is exactly uninformative about s: (b, p, q) =
/// (b, b, 1-b) has zero bias, zero covariance, rho2 = 0, and therefore no
/// attainable sample-efficiency gain (tau_max = 1).
inline JudgeWorld zero_gain_world(double b) {
  require_in_open(b, 0.0, 1.0, "b");
  return JudgeWorld::strict_world(b, b, 1.0 - b);
}

}  // namespace debias
