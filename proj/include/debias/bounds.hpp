#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "debias/world.hpp"

namespace debias {

/// Which structural hypotheses a world satisfies and the correlation bounds
/// they imply.  check_bounds() verifies every applicable bound against the
/// world's exact rho2 before returning; a violation throws std::logic_error
/// because the bounds are provable identities — a violation falsifies the
/// implementation, never the input.
struct BoundReport {
  double rho2 = 0;
  double agreement = 0;
  double balanced_agreement = 0;

  /// 0.5 <= agreement <= b.  When it holds, rho2 <= 0.5 (so tau_max <= 2).
  bool frontier_applicable = false;

  /// Always-applicable envelope from the balanced agreement rate g = (p+q)/2:
  ///   4 b (1-b) (2g-1)^2  <=  rho2  <=  |2g-1|.
  double envelope_lower = 0;
  double envelope_upper = 0;

  /// balanced_agreement >= 0.5.  When it holds, rho2 <= min(p, q).
  bool balanced_applicable = false;
  double min_pq = 0;
};

namespace detail {
/// Slack absorbing last-ulp rounding in the bound checks.
inline constexpr double kBoundSlack = 1e-9;
}  // namespace detail

inline BoundReport check_bounds(const JudgeWorld& w) {
  const DerivedQuantities d = derived_quantities(w);
  BoundReport r;
  r.rho2 = d.rho2;
  r.agreement = d.agreement;
  r.balanced_agreement = d.balanced_agreement;

  r.frontier_applicable = d.agreement >= 0.5 && d.agreement <= w.b;
  if (r.frontier_applicable && d.rho2 > 0.5 + detail::kBoundSlack)
    throw std::logic_error(
        "check_bounds: rho2 > 1/2 on a frontier world (b=" +
        std::to_string(w.b) + " p=" + std::to_string(w.p) +
        " q=" + std::to_string(w.q) + ")");

  const double g = 2.0 * d.balanced_agreement - 1.0;
  r.envelope_lower = 4.0 * w.b * (1.0 - w.b) * g * g;
  r.envelope_upper = std::abs(g);
  if (d.rho2 + detail::kBoundSlack < r.envelope_lower ||
      d.rho2 > r.envelope_upper + detail::kBoundSlack)
    throw std::logic_error(
        "check_bounds: balanced-agreement envelope violated (b=" +
        std::to_string(w.b) + " p=" + std::to_string(w.p) +
        " q=" + std::to_string(w.q) + ")");

  r.balanced_applicable = d.balanced_agreement >= 0.5;
  r.min_pq = std::min(w.p, w.q);
  if (r.balanced_applicable && d.rho2 > r.min_pq + detail::kBoundSlack)
    throw std::logic_error(
        "check_bounds: rho2 > min(p,q) with balanced agreement >= 1/2 (b=" +
        std::to_string(w.b) + " p=" + std::to_string(w.p) +
        " q=" + std::to_string(w.q) + ")");

  return r;
}

}  // namespace debias
