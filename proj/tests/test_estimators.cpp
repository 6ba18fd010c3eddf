// Sample-level estimators: point values on hand-checkable vectors, weight
// estimation edge cases, stratified combination, the joint gap solver, and
// the bootstrap engine's determinism and containment guarantees.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "debias/bootstrap.hpp"
#include "debias/estimators.hpp"
#include "debias/simulation.hpp"
#include "debias/world.hpp"

using namespace debias;

namespace {

ModelSample make_sample(std::vector<double> truth, std::vector<double> proxy,
                        std::vector<double> pool) {
  ModelSample s;
  s.labeled_truth = std::move(truth);
  s.labeled_proxy = std::move(proxy);
  s.unlabeled_proxy = std::move(pool);
  return s;
}

}  // namespace

TEST_CASE("labeled-only estimate on a four-record file") {
  const ModelSample s = make_sample({1, 1, 0, 1}, {1, 0, 1, 1}, {});
  const EstimateReport r = estimate_gt(s);
  CHECK(r.point == 0.75);
  // sample variance of {1,1,0,1} is 1/4; variance of the mean is 1/16.
  CHECK_THAT(r.variance_hat, Catch::Matchers::WithinAbs(0.0625, 1e-15));
  CHECK(r.tau_hat == 1.0);
  CHECK(r.lambda_used == 0.0);
  CHECK(r.labeled_count == 4);
}

TEST_CASE("labeled-only estimate needs two records") {
  CHECK_THROWS_AS(estimate_gt(make_sample({1}, {1}, {})), StatError);
  CHECK_THROWS_AS(estimate_gt(make_sample({}, {}, {})), StatError);
}

TEST_CASE("bias-corrected point arithmetic") {
  // pool mean 0.5, labeled proxy mean 0.75, labeled truth mean 0.5:
  // full correction gives 0.5 + (0.5 - 0.75) = 0.25.
  const ModelSample s =
      make_sample({1, 0, 1, 0}, {1, 1, 1, 0}, {1, 0, 1, 0, 1, 0});
  const EstimateReport r = estimate_ppi(s);
  CHECK_THAT(r.point, Catch::Matchers::WithinAbs(0.25, 1e-15));
  CHECK(r.lambda_used == 1.0);
  CHECK(r.proxy_count == 6);
}

TEST_CASE("corrected estimators require a proxy pool") {
  const ModelSample s = make_sample({1, 0}, {1, 0}, {});
  CHECK_THROWS_AS(estimate_ppi(s), StatError);
  CHECK_THROWS_AS(estimate_ppi_tuned(s), StatError);
}

TEST_CASE("weight estimate: clamping and degeneracy") {
  // Anti-correlated labeled pairs give a negative raw weight -> clamp to 0.
  const ModelSample anti =
      make_sample({1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0});
  const LambdaHat l = lambda_star_hat(anti);
  CHECK(l.value == 0.0);
  CHECK(l.clamped);
  CHECK_FALSE(l.degenerate);

  // Constant proxies carry no signal: degenerate, weight 0.
  const ModelSample flat = make_sample({1, 0, 1, 0}, {1, 1, 1, 1}, {1, 1, 1});
  const LambdaHat lf = lambda_star_hat(flat);
  CHECK(lf.value == 0.0);
  CHECK(lf.degenerate);

  // Proxy == truth with a large pool: the labeled covariance equals the
  // labeled variance (n-1 divisor), which slightly exceeds the pooled
  // variance times (1 + n/N), so the raw ratio tops 1 and is clamped.
  ModelSample hot;
  for (int i = 0; i < 50; ++i) {
    const double v = i % 2 ? 1.0 : 0.0;
    hot.labeled_truth.push_back(v);
    hot.labeled_proxy.push_back(v);
  }
  for (int i = 0; i < 5000; ++i)
    hot.unlabeled_proxy.push_back(i % 2 ? 1.0 : 0.0);
  const LambdaHat lh = lambda_star_hat(hot);
  CHECK(lh.value == 1.0);
  CHECK(lh.clamped);
}

TEST_CASE("zero weight reduces the tuned estimator to the labeled mean") {
  const ModelSample anti =
      make_sample({1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0});
  const EstimateReport tuned = estimate_ppi_tuned(anti);
  const EstimateReport gt = estimate_gt(anti);
  CHECK(tuned.point == gt.point);
  CHECK(tuned.lambda_used == 0.0);
  CHECK(tuned.lambda_clamped);
  CHECK_THAT(tuned.variance_hat,
             Catch::Matchers::WithinAbs(gt.variance_hat, 1e-15));
}

TEST_CASE("tuned variance: closed form, quadratic route, and dominance") {
  const JudgeWorld w = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  const ModelSample s = sample_model(w, 200, 5000, 99);
  const LambdaHat l = lambda_star_hat(s);
  REQUIRE_FALSE(l.clamped);
  REQUIRE_FALSE(l.degenerate);
  const EstimateReport tuned = estimate_ppi_tuned(s);
  const EstimateReport at = estimate_ppi_at(s, l.value);
  CHECK(tuned.point == at.point);

  // The reported variance is exactly var_s/n - cov^2 / ((n + n^2/N) vt).
  const double n = 200, N = 5000;
  const double vs = sample_var(s.labeled_truth);
  const double cov = sample_cov(s.labeled_truth, s.labeled_proxy);
  const double vt = pooled_proxy_var(s);
  const double closed = vs / n - cov * cov / ((n + n * n / N) * vt);
  CHECK(close_rel(tuned.variance_hat, closed, 1e-12));

  // The generic quadratic at the same weight plugs in pool-only and
  // labeled-pair variances instead of the pooled one, so the two routes are
  // distinct estimators of the same quantity: statistically close, not equal.
  CHECK(close_rel(tuned.variance_hat, at.variance_hat, 0.2));

  // Dominance over the labeled-only mean is algebraic (cov^2 >= 0).
  const EstimateReport gt = estimate_gt(s);
  CHECK(tuned.variance_hat <= gt.variance_hat * (1 + 1e-12));
}

TEST_CASE("tuned point tracks the population value on a large draw") {
  const JudgeWorld w = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  const ModelSample s = sample_model(w, 2000, 100000, 1234);
  const EstimateReport r = estimate_ppi_tuned(s);
  CHECK_THAT(r.point, Catch::Matchers::WithinAbs(0.8, 0.03));
  CHECK_THAT(r.lambda_used,
             Catch::Matchers::WithinAbs(0.096 / (1.02 * 0.1716), 0.1));
}

TEST_CASE("stratified estimate: exact two-stratum combination") {
  std::map<std::string, ModelSample> strata;
  strata["easy"] = make_sample({1, 1, 1, 0}, {1, 1, 1, 1}, {1, 1, 1, 1});
  strata["hard"] = make_sample({0, 0, 1, 0}, {0, 1, 0, 0}, {0, 0, 1, 0});
  const std::map<std::string, double> weights{{"easy", 0.25}, {"hard", 0.75}};
  const StratifiedReport r = stratified_estimate(strata, weights);
  const EstimateReport easy = estimate_ppi_tuned(strata["easy"]);
  const EstimateReport hard = estimate_ppi_tuned(strata["hard"]);
  CHECK_THAT(r.point, Catch::Matchers::WithinAbs(
                          0.25 * easy.point + 0.75 * hard.point, 1e-15));
  CHECK_THAT(r.variance_hat,
             Catch::Matchers::WithinAbs(0.0625 * easy.variance_hat +
                                            0.5625 * hard.variance_hat,
                                        1e-15));
  CHECK(r.labeled_count == 8);
  CHECK(r.strata.size() == 2);
}

TEST_CASE("stratified estimate: weight validation") {
  std::map<std::string, ModelSample> strata;
  strata["a"] = make_sample({1, 0}, {1, 0}, {1});
  strata["b"] = make_sample({1, 1}, {1, 1}, {0});
  CHECK_THROWS_AS(stratified_estimate(strata, {{"a", 1.0}}), ValidationError);
  CHECK_THROWS_AS(
      stratified_estimate(strata, {{"a", 0.5}, {"b", 0.3}, {"c", 0.2}}),
      ValidationError);
  CHECK_THROWS_AS(stratified_estimate(strata, {{"a", 0.7}, {"b", 0.7}}),
                  ValidationError);
  CHECK_THROWS_AS(stratified_estimate(strata, {{"a", 1.5}, {"b", -0.5}}),
                  ValidationError);
  CHECK_NOTHROW(stratified_estimate(strata, {{"a", 0.5}, {"b", 0.5}}));
}

TEST_CASE("stratified estimate: tiny stratum fails by name") {
  std::map<std::string, ModelSample> strata;
  strata["ok"] = make_sample({1, 0}, {1, 0}, {1});
  strata["tiny"] = make_sample({1}, {1}, {1});
  try {
    stratified_estimate(strata, {{"ok", 0.5}, {"tiny", 0.5}});
    FAIL("expected StatError");
  } catch (const StatError& e) {
    CHECK(std::string(e.what()).find("tiny") != std::string::npos);
  }
}

TEST_CASE("stratified estimate: empty pool falls back to labeled-only") {
  std::map<std::string, ModelSample> strata;
  strata["full"] = make_sample({1, 0, 1}, {1, 0, 1}, {1, 0});
  strata["dry"] = make_sample({1, 1, 0}, {1, 0, 0}, {});
  const StratifiedReport r =
      stratified_estimate(strata, {{"full", 0.5}, {"dry", 0.5}});
  CHECK(r.strata.at("dry").kind == EstimatorKind::kGroundTruth);
  CHECK(r.strata.at("dry").point ==
        estimate_gt(strata["dry"]).point);
}

TEST_CASE("derived weights follow proxy-pool counts") {
  std::map<std::string, ModelSample> strata;
  strata["a"] = make_sample({1, 0}, {1, 0}, {1, 1, 1});
  strata["b"] = make_sample({1, 1}, {1, 1}, {0});
  const auto w = weights_from_proxy_counts(strata);
  CHECK_THAT(w.at("a"), Catch::Matchers::WithinAbs(0.75, 1e-15));
  CHECK_THAT(w.at("b"), Catch::Matchers::WithinAbs(0.25, 1e-15));

  strata["a"].unlabeled_proxy.clear();
  strata["b"].unlabeled_proxy.clear();
  CHECK_THROWS_AS(weights_from_proxy_counts(strata), ValidationError);
}

TEST_CASE("gap solver: identical models give exactly zero") {
  PairAlignment al;
  al.sample.truth_a = {1, 0, 1, 1, 0};
  al.sample.proxy_a = {1, 0, 0, 1, 1};
  al.sample.truth_b = al.sample.truth_a;
  al.sample.proxy_b = al.sample.proxy_a;
  al.sample.pool_a = {1, 0, 1};
  al.sample.pool_b = {1, 0, 1};
  const GapReport r = gap_estimate(al);
  CHECK(r.gap == 0.0);
  CHECK(r.variance_hat <= 1e-18);
}

TEST_CASE("gap solver: orthogonal patterns reduce to per-model weights") {
  // Period-4 patterns make every cross moment vanish exactly: cov(sa, sb),
  // cov(sa, tb), cov(ta, tb) are all zero, so the joint normal equations
  // decouple into the two single-model weight formulas.
  const int reps = 8;  // 32 labeled rows
  PairAlignment al;
  for (int i = 0; i < 4 * reps; ++i) {
    const int phase = i % 4;
    const double sa = (phase == 0 || phase == 2) ? 1.0 : 0.0;
    const double sb = (phase == 0 || phase == 1) ? 1.0 : 0.0;
    al.sample.truth_a.push_back(sa);
    al.sample.proxy_a.push_back(sa);  // perfect proxy for a
    al.sample.truth_b.push_back(sb);
    al.sample.proxy_b.push_back(1.0 - sb);  // anti-proxy for b
  }
  for (int i = 0; i < 64; ++i) {
    const int phase = i % 4;
    al.sample.pool_a.push_back((phase == 0 || phase == 2) ? 1.0 : 0.0);
    al.sample.pool_b.push_back((phase == 0 || phase == 1) ? 1.0 : 0.0);
  }
  const GapReport r = gap_estimate(al);

  ModelSample a = {al.sample.truth_a, al.sample.proxy_a, al.sample.pool_a};
  ModelSample b = {al.sample.truth_b, al.sample.proxy_b, al.sample.pool_b};
  CHECK_THAT(r.lambda_a,
             Catch::Matchers::WithinAbs(lambda_star_hat(a).value, 1e-12));
  // The per-model weight for b is negative (anti-correlated proxy); the
  // joint solver is not clamped, so compare against the raw ratio.
  const double raw_b = sample_cov(b.labeled_truth, b.labeled_proxy) /
                       ((1.0 + 32.0 / 64.0) * pooled_proxy_var(b));
  CHECK_THAT(r.lambda_b, Catch::Matchers::WithinAbs(raw_b, 1e-12));
  CHECK_FALSE(r.decoupled);
}

TEST_CASE("gap solver beats decoupled weights on correlated pairs") {
  const JudgeWorld wa = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  const JudgeWorld wb = JudgeWorld::strict_world(0.7, 0.85, 0.75);
  const PairedDataset data = sample_world_pair(wa, wb, 400, 20000, 31, true);
  const GapReport joint = gap_estimate(data, "model_a", "model_b");
  CHECK_THAT(joint.gap, Catch::Matchers::WithinAbs(0.1, 0.08));
  CHECK(joint.labeled_count == 400);
  CHECK(joint.proxy_count == 20000);
  CHECK(joint.only_a == 0);
  CHECK(joint.only_b == 0);
  CHECK(joint.variance_hat > 0.0);
}

TEST_CASE("gap alignment: partial overlap and failure by count") {
  PairedDataset data;
  auto rec = [&](const std::string& pid, const std::string& m, double t,
                 std::optional<int> s) {
    ScoreRecord r;
    r.prompt_id = pid;
    r.model_id = m;
    r.proxy = t;
    r.truth = s;
    data.add(std::move(r));
  };
  rec("p1", "A", 1, 1);
  rec("p1", "B", 0, 1);
  rec("p2", "A", 1, 0);
  rec("p2", "B", 1, 0);
  rec("p3", "A", 0, 1);   // B missing p3
  rec("p4", "B", 1, 1);   // A missing p4
  rec("p5", "A", 1, {});  // shared but unlabeled on both sides
  rec("p5", "B", 0, {});
  const PairAlignment al = data.extract_pair("A", "B");
  CHECK(al.sample.labeled_count() == 2);
  CHECK(al.sample.pool_a.size() == 1);
  CHECK(al.only_a == 1);
  CHECK(al.only_b == 1);
  CHECK(al.half_labeled == 0);
  // No shared prompts at all: fails with the unaligned counts in the message.
  PairedDataset tiny;
  {
    ScoreRecord r;
    r.prompt_id = "x";
    r.model_id = "A";
    r.proxy = 1;
    r.truth = 1;
    tiny.add(std::move(r));
    ScoreRecord r2;
    r2.prompt_id = "y";
    r2.model_id = "B";
    r2.proxy = 0;
    r2.truth = 1;
    tiny.add(std::move(r2));
  }
  try {
    gap_estimate(tiny, "A", "B");
    FAIL("expected StatError");
  } catch (const StatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("only in A") != std::string::npos);
    CHECK(msg.find("only in B") != std::string::npos);
  }
}

TEST_CASE("bootstrap: determinism, containment, and validation") {
  const JudgeWorld w = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  const ModelSample s = sample_model(w, 60, 600, 5);
  BootstrapSpec spec;
  spec.replicates = 300;
  spec.seed = 17;
  const CiResult c1 = bootstrap_ci(s, EstimatorKind::kProxyCorrectedTuned, spec);
  const CiResult c2 = bootstrap_ci(s, EstimatorKind::kProxyCorrectedTuned, spec);
  CHECK(c1.low == c2.low);
  CHECK(c1.high == c2.high);
  const double point = estimate_ppi_tuned(s).point;
  CHECK(c1.low <= point);
  CHECK(point <= c1.high);
  CHECK(c1.skipped == 0);
  CHECK_FALSE(c1.degenerate);

  spec.seed = 18;
  const CiResult c3 = bootstrap_ci(s, EstimatorKind::kProxyCorrectedTuned, spec);
  CHECK(c3.low != c1.low);  // seed actually feeds the resampling

  spec.replicates = 99;
  CHECK_THROWS_AS(bootstrap_ci(s, EstimatorKind::kGroundTruth, spec),
                  ValidationError);
  spec.replicates = 300;
  spec.level = 1.0;
  CHECK_THROWS_AS(bootstrap_ci(s, EstimatorKind::kGroundTruth, spec),
                  ValidationError);
}

TEST_CASE("bootstrap: degenerate replicates are skipped and counted") {
  BootstrapSpec spec;
  spec.replicates = 150;
  int calls = 0;
  const CiResult ci = detail::percentile_ci(0.5, spec, [&](Rng&) {
    ++calls;
    return calls % 3 == 0 ? std::numeric_limits<double>::quiet_NaN() : 0.5;
  });
  CHECK(ci.skipped == 50);
  CHECK(ci.low == 0.5);
  CHECK(ci.high == 0.5);

  CHECK_THROWS_AS(
      detail::percentile_ci(
          0.5, spec,
          [](Rng&) { return std::numeric_limits<double>::quiet_NaN(); }),
      StatError);
}

TEST_CASE("bootstrap: infinite replicates mark the interval degenerate") {
  BootstrapSpec spec;
  spec.replicates = 120;
  int calls = 0;
  const CiResult ci = detail::percentile_ci(1.0, spec, [&](Rng&) {
    ++calls;
    return calls % 2 == 0 ? std::numeric_limits<double>::infinity() : 1.0;
  });
  CHECK(std::isinf(ci.high));
  CHECK(ci.degenerate);
  CHECK(ci.low == 1.0);
}

TEST_CASE("gap bootstrap: deterministic and centered") {
  const JudgeWorld wa = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  const JudgeWorld wb = JudgeWorld::strict_world(0.7, 0.85, 0.75);
  const PairedDataset data = sample_world_pair(wa, wb, 200, 2000, 77, true);
  const PairAlignment al = data.extract_pair("model_a", "model_b");
  BootstrapSpec spec;
  spec.replicates = 200;
  spec.seed = 3;
  const CiResult c1 = bootstrap_ci_gap(al, spec);
  const CiResult c2 = bootstrap_ci_gap(al, spec);
  CHECK(c1.low == c2.low);
  CHECK(c1.high == c2.high);
  const double point = gap_estimate(al).gap;
  CHECK(c1.low <= point);
  CHECK(point <= c1.high);
}

TEST_CASE("stratified bootstrap: deterministic and contains the point") {
  const JudgeWorld w = JudgeWorld::strict_world(0.8, 0.9, 0.7);
  std::map<std::string, ModelSample> strata;
  strata["s1"] = sample_model(w, 40, 400, 101);
  strata["s2"] = sample_model(JudgeWorld::strict_world(0.6, 0.8, 0.8), 40, 400,
                              102);
  const std::map<std::string, double> weights{{"s1", 0.5}, {"s2", 0.5}};
  BootstrapSpec spec;
  spec.replicates = 200;
  spec.seed = 9;
  const CiResult c1 = bootstrap_ci_stratified(strata, weights, spec);
  const CiResult c2 = bootstrap_ci_stratified(strata, weights, spec);
  CHECK(c1.low == c2.low);
  CHECK(c1.high == c2.high);
  const double point = stratified_estimate(strata, weights).point;
  CHECK(c1.low <= point);
  CHECK(point <= c1.high);
}
