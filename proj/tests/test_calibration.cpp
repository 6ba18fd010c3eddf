// Calibration-based ceilings for continuous proxies, histogram recalibration
// mechanics, the tau report, and rank-correlation utilities.  The central
// oracle is a 10^4-row dataset built so every bin is calibrated *exactly* in
// sample, which turns the agreement/correlation identities into rational
// arithmetic.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "debias/calibration.hpp"
#include "debias/ranking.hpp"
#include "debias/rng.hpp"
#include "debias/simulation.hpp"
#include "debias/tau.hpp"

using namespace debias;

namespace {

/// 7200 x (1, 12/13), 600 x (0, 12/13), 800 x (1, 4/11), 1400 x (0, 4/11).
/// Each proxy level's truth frequency equals the level itself (7200/7800 =
/// 12/13, 800/2200 = 4/11), so the proxy is calibrated exactly in sample.
struct ExactDataset {
  std::vector<double> truth, proxy;
  ExactDataset() {
    auto block = [&](std::size_t k, double s, double t) {
      for (std::size_t i = 0; i < k; ++i) {
        truth.push_back(s);
        proxy.push_back(t);
      }
    };
    block(7200, 1, 12.0 / 13.0);
    block(600, 0, 12.0 / 13.0);
    block(800, 1, 4.0 / 11.0);
    block(1400, 0, 4.0 / 11.0);
  }
};

}  // namespace

TEST_CASE("exactly calibrated dataset: agreement identities are rational") {
  const ExactDataset d;
  const SoftAgreementReport r = soft_agreement(d.truth, d.proxy);
  CHECK(r.pairs == 10000);
  CHECK_THAT(r.truth_mean, Catch::Matchers::WithinAbs(0.8, 1e-15));
  // soft = (87000/13 + 13000/11) / 10^4, mse = (93600/169 + 61600/121) / 10^4.
  CHECK_THAT(r.soft,
             Catch::Matchers::WithinAbs(0.7874125874125874, 1e-12));
  CHECK_THAT(r.mse, Catch::Matchers::WithinAbs(0.1062937062937063, 1e-12));
  // In-sample calibration makes soft = 1 - 2 mse an identity, not an estimate.
  CHECK_THAT(r.soft - (1.0 - 2.0 * r.mse),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  // (1 - soft)/(1 - b) = 1.0629... > 1, so the error-rate parameter caps.
  CHECK(r.epsilon_star == 1.0);
  CHECK(r.rho2_bound == 0.5);
}

TEST_CASE("exactly calibrated dataset: correlation equals the variance ratio") {
  const ExactDataset d;
  const Rho2Result r = rho2_continuous(d.truth, d.proxy);
  REQUIRE_FALSE(r.degenerate);
  // For a calibrated proxy Cov(s,t) = Var(t), so rho2 = Var t / (b(1-b));
  // here Var t = 7.68/143 and b(1-b) = 0.16, giving exactly 48/143.
  CHECK_THAT(r.value,
             Catch::Matchers::WithinAbs(48.0 / 143.0, 1e-12));
}

TEST_CASE("exactly calibrated dataset: binned audit reproduces the identity") {
  const ExactDataset d;
  const CalibratedBoundReport rep =
      check_calibrated_bound(d.truth, d.proxy, 10, 1e-9);
  // 12/13 and 4/11 land in different bins that contain nothing else, so the
  // recalibrated proxy equals the raw one and the audit sees the exact world.
  CHECK_THAT(rep.rho2, Catch::Matchers::WithinAbs(48.0 / 143.0, 1e-12));
  CHECK_THAT(rep.identity_gap, Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK(rep.ceiling_ok);
  CHECK(rep.half_applicable);  // soft 0.7874 <= b 0.8
  CHECK(rep.half_ok);          // 0.3357 <= 0.5
  CHECK(rep.tau_bound == 2.0);
  CHECK(rep.used_fallback_bins);  // 8 of the 10 bins saw no data
  CHECK_FALSE(rep.rho2_degenerate);
}

TEST_CASE("recalibration recovers the conditional-mean curve") {
  // Raw proxy u ~ U(0,1) with P(s=1|u) = u^2: the raw squared correlation is
  // 3/8 while the recalibrated (conditional-mean) proxy reaches 2/5.
  const std::size_t M = 200000;
  std::vector<double> truth(M), raw(M);
  Rng rng(20240816);
  for (std::size_t i = 0; i < M; ++i) {
    const double u = rng.uniform01();
    raw[i] = u;
    truth[i] = rng.bernoulli(u * u) ? 1.0 : 0.0;
  }
  const Rho2Result r_raw = rho2_continuous(truth, raw);
  CHECK_THAT(r_raw.value, Catch::Matchers::WithinAbs(0.375, 0.01));

  const CalibrationMap map = recalibrate(truth, raw, 20);
  std::vector<double> recal(M);
  for (std::size_t i = 0; i < M; ++i) recal[i] = map.apply(raw[i]);
  const Rho2Result r_cal = rho2_continuous(truth, recal);
  CHECK(r_cal.value > r_raw.value);
  CHECK_THAT(r_cal.value, Catch::Matchers::WithinAbs(0.4, 0.012));
  CHECK_FALSE(map.any_fallback());
}

TEST_CASE("population mixtures: agreement route equals variance route") {
  // For any discrete calibrated mixture, 1 - (1-soft)/(2 b (1-b)) and
  // Var t / (b (1-b)) are the same number, and soft <= b forces rho2 <= 1/2.
  Rng rng(7);
  int qualified = 0;
  double max_rho2_qualified = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    const int k = 2 + static_cast<int>(rng.index(4));  // 2..5 support points
    std::vector<double> v(k), p(k);
    double psum = 0;
    for (int i = 0; i < k; ++i) {
      v[i] = 0.2 + 0.6 * rng.uniform01();
      p[i] = 0.05 + rng.uniform01();
      psum += p[i];
    }
    double b = 0, et2 = 0, ett = 0;  // E t, E t^2, E t(1-t)
    for (int i = 0; i < k; ++i) {
      p[i] /= psum;
      b += p[i] * v[i];
      et2 += p[i] * v[i] * v[i];
      ett += p[i] * v[i] * (1.0 - v[i]);
    }
    const double vt = et2 - b * b;
    const double vs = b * (1.0 - b);
    if (vs < 1e-6 || vt < 1e-10) continue;
    const double soft = 1.0 - 2.0 * ett;
    const double rho2_var = vt / vs;
    const double rho2_agr = 1.0 - (1.0 - soft) / (2.0 * vs);
    REQUIRE_THAT(rho2_var - rho2_agr, Catch::Matchers::WithinAbs(0.0, 1e-12));
    if (soft <= b) {
      ++qualified;
      max_rho2_qualified = std::max(max_rho2_qualified, rho2_var);
      REQUIRE(rho2_var <= 0.5 + 1e-9);
    }
  }
  CHECK(qualified > 1000);  // the half-bound was actually exercised
  CHECK(max_rho2_qualified > 0.05);
}

TEST_CASE("sampled calibrated pairs approach the population identities") {
  const std::vector<double> values{12.0 / 13.0, 4.0 / 11.0};
  const std::vector<double> probs{0.78, 0.22};
  const LabeledPairs d = sample_calibrated_pairs(values, probs, 50000, 99);
  const SoftAgreementReport r = soft_agreement(d.truth, d.proxy);
  CHECK_THAT(r.soft - (1.0 - 2.0 * r.mse),
             Catch::Matchers::WithinAbs(0.0, 6e-3));
  const Rho2Result rho = rho2_continuous(d.truth, d.proxy);
  CHECK_THAT(rho.value, Catch::Matchers::WithinAbs(48.0 / 143.0, 0.02));

  // Sampler input validation.
  CHECK_THROWS_AS(sample_calibrated_pairs({0.5}, {0.5, 0.5}, 10, 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_calibrated_pairs({0.5, 1.2}, {0.5, 0.5}, 10, 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_calibrated_pairs({0.5, 0.6}, {0.5, 0.4}, 10, 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_calibrated_pairs({0.5, 0.6}, {0.5, 0.5}, 0, 1),
                  ValidationError);
}

TEST_CASE("recalibration map mechanics") {
  // bins = 4 over proxies {0.1, 0.1, 0.9, 1.0}: bins 1 and 2 are empty.
  const std::vector<double> truth{1, 0, 1, 1};
  const std::vector<double> proxy{0.1, 0.1, 0.9, 1.0};
  const CalibrationMap m = recalibrate(truth, proxy, 4);
  CHECK(m.bin_of(1.0) == 3);  // right edge folds into the last bin
  CHECK(m.bin_of(0.0) == 0);
  CHECK(m.counts[0] == 2);
  CHECK(m.counts[3] == 2);
  CHECK_THAT(m.means[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(m.means[3], Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK(m.fallback[1]);
  CHECK(m.fallback[2]);
  CHECK(m.any_fallback());
  CHECK_THAT(m.apply(0.3), Catch::Matchers::WithinAbs(0.75, 1e-15));  // global
  CHECK_THROWS_AS(m.apply(1.5), ValidationError);
  CHECK_THROWS_AS(m.apply(-0.1), ValidationError);

  using V = std::vector<double>;
  CHECK_THROWS_AS(recalibrate(truth, proxy, 0), ValidationError);
  CHECK_THROWS_AS(recalibrate(truth, V{0.1, 0.2}, 4), ValidationError);
  CHECK_THROWS_AS(recalibrate(V{}, V{}, 4), StatError);
  CHECK_THROWS_AS(recalibrate(V{1.0}, V{1.5}, 4), ValidationError);
}

TEST_CASE("soft agreement input validation and the binary special case") {
  using V = std::vector<double>;
  CHECK_THROWS_AS(soft_agreement(V{1, 0}, V{0.5}), ValidationError);
  CHECK_THROWS_AS(soft_agreement(V{}, V{}), StatError);
  CHECK_THROWS_AS(soft_agreement(V{1}, V{1.5}), ValidationError);
  CHECK_THROWS_AS(soft_agreement(V{0.5}, V{0.5}), ValidationError);
  // With a 0/1 proxy, soft is the plain match rate.
  const SoftAgreementReport r = soft_agreement(V{1, 0, 1}, V{1, 1, 1});
  CHECK_THAT(r.soft, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(r.mse, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("squared correlation edge cases") {
  using V = std::vector<double>;
  CHECK_THROWS_AS(rho2_continuous(V{1}, V{0.5}), StatError);
  CHECK_THROWS_AS(rho2_continuous(V{1, 0}, V{0.5}), ValidationError);
  const Rho2Result flat = rho2_continuous(V{1, 1, 1}, V{0.2, 0.5, 0.9});
  CHECK(flat.degenerate);
  CHECK(flat.value == 0.0);
  // Proxy affine in truth: perfect squared correlation.
  const Rho2Result line =
      rho2_continuous(V{0, 1, 0, 1}, V{0.1, 0.7, 0.1, 0.7});
  CHECK_THAT(line.value, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("tau report on a perfect binary proxy") {
  std::vector<double> truth;
  for (int i = 0; i < 40; ++i) truth.push_back(i % 4 == 0 ? 0.0 : 1.0);
  BootstrapSpec spec;
  spec.replicates = 200;
  spec.seed = 11;
  const TauReport r1 = tau_report(truth, truth, spec);
  CHECK(r1.rho2_hat == 1.0);
  CHECK(std::isinf(r1.tau_hat));
  REQUIRE(r1.soft.has_value());
  CHECK(r1.soft->soft == 1.0);
  CHECK(r1.soft->epsilon_star == 0.0);
  CHECK(std::isinf(r1.tau_bound_soft));
  REQUIRE(r1.rho2_ci.has_value());
  CHECK(r1.rho2_ci->low == 1.0);
  CHECK(r1.rho2_ci->high == 1.0);
  REQUIRE(r1.tau_ci.has_value());
  CHECK(std::isinf(r1.tau_ci->high));
  CHECK(r1.tau_ci->degenerate);

  const TauReport r2 = tau_report(truth, truth, spec);
  CHECK(r1.rho2_ci->low == r2.rho2_ci->low);  // same seed, same interval
}

TEST_CASE("tau report on a noisy binary proxy with calibration audit") {
  // Deterministic 90%-agreement pattern over 200 pairs.
  std::vector<double> truth, proxy;
  for (int i = 0; i < 200; ++i) {
    const double s = i % 5 == 0 ? 0.0 : 1.0;
    truth.push_back(s);
    proxy.push_back(i % 10 == 3 || i % 10 == 6 ? 1.0 - s : s);
  }
  BootstrapSpec spec;
  spec.replicates = 300;
  spec.seed = 4;
  const TauReport r = tau_report(truth, proxy, spec, 10);
  CHECK(r.pairs == 200);
  CHECK(r.rho2_hat > 0.0);
  CHECK(r.rho2_hat < 1.0);
  CHECK_THAT(r.tau_hat, Catch::Matchers::WithinAbs(1.0 / (1.0 - r.rho2_hat),
                                                   1e-12));
  REQUIRE(r.rho2_ci.has_value());
  CHECK(r.rho2_ci->low <= r.rho2_hat);
  CHECK(r.rho2_hat <= r.rho2_ci->high);
  REQUIRE(r.tau_ci.has_value());
  CHECK(r.tau_ci->low <= r.tau_hat);
  CHECK(r.tau_hat <= r.tau_ci->high);
  CHECK(r.tau_bound_soft >= 2.0);  // epsilon_star caps at 1
  REQUIRE(r.calibration.has_value());
  CHECK(r.calibration->ceiling_ok);

  CHECK_THROWS_AS(tau_report({1}, {1.0}), StatError);
}

TEST_CASE("rank correlation with ties excluded") {
  const std::vector<double> x{3, 2, 2, 1};
  const std::vector<double> y{1, 2, 2, 3};
  const KendallResult r = kendall_tau(x, y);
  CHECK(r.concordant == 0);
  CHECK(r.discordant == 5);
  CHECK(r.tied == 1);
  CHECK(r.strict_pairs == 5);
  CHECK(r.tau == -1.0);
  CHECK_FALSE(r.degenerate);

  using V = std::vector<double>;
  const KendallResult flat = kendall_tau(V{1, 1}, V{2, 3});
  CHECK(flat.degenerate);
  CHECK(flat.tau == 0.0);
  CHECK(flat.tied == 1);

  CHECK_THROWS_AS(kendall_tau(V{1, 2}, V{1}), ValidationError);
}

TEST_CASE("ranking outcome assembly") {
  const std::vector<std::string> models{"m1", "m2", "m3"};
  const std::vector<double> truth{0.9, 0.8, 0.7};
  const std::vector<double> proxy{0.1, 0.2, 0.3};
  const std::vector<double> debiased{0.85, 0.80, 0.75};
  const RankingOutcome out = make_ranking_outcome(models, truth, proxy, debiased);
  CHECK(out.true_ranking == std::vector<std::string>{"m1", "m2", "m3"});
  CHECK(out.proxy_ranking == std::vector<std::string>{"m3", "m2", "m1"});
  CHECK(out.debiased_ranking == std::vector<std::string>{"m1", "m2", "m3"});
  CHECK(out.kendall_tau_proxy == -1.0);
  CHECK(out.kendall_tau_debiased == 1.0);
  CHECK(out.exact_reversal);

  const RankingOutcome noDebias =
      make_ranking_outcome(models, truth, proxy, {});
  CHECK(std::isnan(noDebias.kendall_tau_debiased));
  CHECK(noDebias.debiased_vs_true.degenerate);
  CHECK(noDebias.debiased_ranking.empty());

  // A single model has no pairs: nothing is degenerate about the listing,
  // but the rank correlation is undefined and flagged.
  const std::vector<double> one_t{0.5}, one_p{0.9};
  const RankingOutcome solo = make_ranking_outcome({"only"}, one_t, one_p, {});
  CHECK(solo.proxy_vs_true.degenerate);
  CHECK_FALSE(solo.exact_reversal);
}
