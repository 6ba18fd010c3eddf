#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "debias/common.hpp"

namespace debias {

/// Rank correlation between two score vectors over the same items.
/// Pairs tied in either vector are excluded from the count and reported
/// separately; tau is (concordant - discordant) / strictly-ordered pairs.
/// With no strictly ordered pair at all, tau is reported as 0 with the
/// degenerate flag set.
struct KendallResult {
  double tau = 0;
  long long concordant = 0;
  long long discordant = 0;
  long long tied = 0;          ///< pairs tied in x, in y, or both
  long long strict_pairs = 0;  ///< pairs strictly ordered in both vectors
  bool degenerate = false;
};

inline KendallResult kendall_tau(std::span<const double> x,
                                 std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("kendall_tau: score vectors differ in length");
  KendallResult r;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 || dy == 0.0) {
        ++r.tied;
        continue;
      }
      if ((dx > 0) == (dy > 0))
        ++r.concordant;
      else
        ++r.discordant;
    }
  }
  r.strict_pairs = r.concordant + r.discordant;
  if (r.strict_pairs == 0) {
    r.degenerate = true;
    r.tau = 0;
  } else {
    r.tau = static_cast<double>(r.concordant - r.discordant) /
            static_cast<double>(r.strict_pairs);
  }
  return r;
}

/// Indices ordered best-first by score; equal scores keep input order, so the
/// result is deterministic.
inline std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return idx;
}

/// How a simulated leaderboard came out: the model order implied by ground
/// truth, by the raw proxy, and (when computed) by the debiased estimates,
/// with the rank correlations of the latter two against the first.
struct RankingOutcome {
  std::vector<std::string> true_ranking;      ///< best first
  std::vector<std::string> proxy_ranking;
  std::vector<std::string> debiased_ranking;  ///< empty when not computed
  KendallResult proxy_vs_true;
  KendallResult debiased_vs_true;             ///< degenerate when not computed
  double kendall_tau_proxy = 0;
  double kendall_tau_debiased = std::numeric_limits<double>::quiet_NaN();
  bool exact_reversal = false;  ///< proxy order is exactly the true order flipped
};

/// Assembles a RankingOutcome from aligned per-model score vectors.
inline RankingOutcome make_ranking_outcome(
    const std::vector<std::string>& models, std::span<const double> true_scores,
    std::span<const double> proxy_scores,
    std::span<const double> debiased_scores /* may be empty */) {
  RankingOutcome out;
  for (std::size_t i : order_desc(true_scores))
    out.true_ranking.push_back(models[i]);
  for (std::size_t i : order_desc(proxy_scores))
    out.proxy_ranking.push_back(models[i]);
  out.proxy_vs_true = kendall_tau(true_scores, proxy_scores);
  out.kendall_tau_proxy = out.proxy_vs_true.tau;
  out.exact_reversal = out.proxy_vs_true.tied == 0 &&
                       out.proxy_vs_true.strict_pairs > 0 &&
                       out.proxy_vs_true.concordant == 0;
  if (!debiased_scores.empty()) {
    for (std::size_t i : order_desc(debiased_scores))
      out.debiased_ranking.push_back(models[i]);
    out.debiased_vs_true = kendall_tau(true_scores, debiased_scores);
    out.kendall_tau_debiased = out.debiased_vs_true.tau;
  } else {
    out.debiased_vs_true.degenerate = true;
  }
  return out;
}

}  // namespace debias
