#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "debias/bounds.hpp"
#include "debias/calibration.hpp"
#include "debias/estimators.hpp"
#include "debias/fisher.hpp"
#include "debias/io.hpp"
#include "debias/ranking.hpp"
#include "debias/simulation.hpp"
#include "debias/tau.hpp"
#include "debias/version.hpp"
#include "debias/world.hpp"

namespace debias {

/// Formats a double for human-readable tables: shortest %.10g, with the
/// words inf/-inf/nan for non-finite values.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// JSON image of a double.  Infinities become the strings "inf"/"-inf" and
/// NaN becomes null, so machine output is always valid JSON and infinite
/// ceilings survive serialization unambiguously.
inline nlohmann::json num_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline nlohmann::json json_of(const JudgeWorld& w) {
  nlohmann::json j;
  j["b"] = num_json(w.b);
  j["p"] = num_json(w.p);
  j["q"] = num_json(w.q);
  return j;
}

inline nlohmann::json json_of(const DerivedQuantities& d) {
  nlohmann::json j;
  j["bias"] = num_json(d.bias);
  j["agreement"] = num_json(d.agreement);
  j["balanced_agreement"] = num_json(d.balanced_agreement);
  j["proxy_mean"] = num_json(d.proxy_mean);
  j["var_truth"] = num_json(d.var_truth);
  j["var_proxy"] = num_json(d.var_proxy);
  j["cov"] = num_json(d.cov);
  j["rho2"] = num_json(d.rho2);
  j["tau_max"] = num_json(d.tau_max);
  return j;
}

inline nlohmann::json json_of(const BoundReport& b) {
  nlohmann::json j;
  j["rho2"] = num_json(b.rho2);
  j["agreement"] = num_json(b.agreement);
  j["balanced_agreement"] = num_json(b.balanced_agreement);
  j["frontier_applicable"] = b.frontier_applicable;
  j["envelope_lower"] = num_json(b.envelope_lower);
  j["envelope_upper"] = num_json(b.envelope_upper);
  j["balanced_applicable"] = b.balanced_applicable;
  j["min_pq"] = num_json(b.min_pq);
  return j;
}

inline nlohmann::json json_of(const VarianceProfile& v) {
  nlohmann::json j;
  j["var_gt"] = num_json(v.var_gt);
  j["var_pp"] = num_json(v.var_pp);
  j["var_pp_tuned"] = num_json(v.var_pp_tuned);
  j["lambda_star"] = num_json(v.lambda_star);
  j["cr_bound"] = num_json(v.cr_bound);
  j["pp_defined"] = v.pp_defined;
  j["tau_pp"] = v.pp_defined ? num_json(v.tau_pp()) : nlohmann::json(nullptr);
  j["tau_tuned"] = num_json(v.tau_tuned());
  return j;
}

inline nlohmann::json json_of(const CiResult& c) {
  nlohmann::json j;
  j["low"] = num_json(c.low);
  j["high"] = num_json(c.high);
  j["level"] = num_json(c.level);
  j["replicates"] = c.replicates;
  j["skipped"] = c.skipped;
  j["seed"] = c.seed;
  j["degenerate"] = c.degenerate;
  return j;
}

inline nlohmann::json json_of(const EstimateReport& e) {
  nlohmann::json j;
  j["estimator"] = to_string(e.kind);
  j["point"] = num_json(e.point);
  j["variance_hat"] = num_json(e.variance_hat);
  j["stderr_hat"] = num_json(std::sqrt(e.variance_hat));
  j["lambda_used"] = num_json(e.lambda_used);
  j["tau_hat"] = num_json(e.tau_hat);
  j["rho2_hat"] = num_json(e.rho2_hat);
  j["labeled_count"] = e.labeled_count;
  j["proxy_count"] = e.proxy_count;
  j["lambda_clamped"] = e.lambda_clamped;
  j["degenerate_proxy"] = e.degenerate_proxy;
  if (e.ci) j["ci"] = json_of(*e.ci);
  return j;
}

inline nlohmann::json json_of(const StratifiedReport& s) {
  nlohmann::json j;
  j["estimator"] = "stratified";
  j["point"] = num_json(s.point);
  j["variance_hat"] = num_json(s.variance_hat);
  j["stderr_hat"] = num_json(std::sqrt(s.variance_hat));
  j["labeled_count"] = s.labeled_count;
  j["proxy_count"] = s.proxy_count;
  j["weights_derived"] = s.weights_derived;
  nlohmann::json strata = nlohmann::json::object();
  for (const auto& [name, est] : s.strata) {
    nlohmann::json e = json_of(est);
    e["weight"] = num_json(s.weights.at(name));
    strata[name] = std::move(e);
  }
  j["strata"] = std::move(strata);
  return j;
}

inline nlohmann::json json_of(const GapReport& g) {
  nlohmann::json j;
  j["gap"] = num_json(g.gap);
  j["variance_hat"] = num_json(g.variance_hat);
  j["stderr_hat"] = num_json(std::sqrt(g.variance_hat));
  j["lambda_a"] = num_json(g.lambda_a);
  j["lambda_b"] = num_json(g.lambda_b);
  j["lambda_a_diagnostic"] = num_json(g.lambda_a_diagnostic);
  j["lambda_b_diagnostic"] = num_json(g.lambda_b_diagnostic);
  j["labeled_count"] = g.labeled_count;
  j["proxy_count"] = g.proxy_count;
  j["only_a"] = g.only_a;
  j["only_b"] = g.only_b;
  j["decoupled"] = g.decoupled;
  if (g.ci) j["ci"] = json_of(*g.ci);
  return j;
}

inline nlohmann::json json_of(const KendallResult& k) {
  nlohmann::json j;
  j["tau"] = num_json(k.tau);
  j["concordant"] = k.concordant;
  j["discordant"] = k.discordant;
  j["tied"] = k.tied;
  j["strict_pairs"] = k.strict_pairs;
  j["degenerate"] = k.degenerate;
  return j;
}

inline nlohmann::json json_of(const RankingOutcome& r) {
  nlohmann::json j;
  j["true_ranking"] = r.true_ranking;
  j["proxy_ranking"] = r.proxy_ranking;
  j["debiased_ranking"] = r.debiased_ranking;
  j["proxy_vs_true"] = json_of(r.proxy_vs_true);
  j["debiased_vs_true"] = json_of(r.debiased_vs_true);
  j["kendall_tau_proxy"] = num_json(r.kendall_tau_proxy);
  j["kendall_tau_debiased"] = num_json(r.kendall_tau_debiased);
  j["exact_reversal"] = r.exact_reversal;
  return j;
}

inline nlohmann::json json_of(const ReversalRun& r) {
  nlohmann::json j;
  j["model_ids"] = r.model_ids;
  j["judge_accuracy"] = num_json(r.judge_accuracy);
  nlohmann::json acc = nlohmann::json::array(), pm = nlohmann::json::array(),
                 db = nlohmann::json::array();
  for (double v : r.model_accuracy) acc.push_back(num_json(v));
  for (double v : r.proxy_mean) pm.push_back(num_json(v));
  for (double v : r.debiased) db.push_back(num_json(v));
  j["model_accuracy"] = std::move(acc);
  j["proxy_mean"] = std::move(pm);
  j["debiased"] = std::move(db);
  j["outcome"] = json_of(r.outcome);
  return j;
}

inline nlohmann::json json_of(const NoisyJudgeRun& r) {
  nlohmann::json j;
  j["model_ids"] = r.model_ids;
  j["judge_accuracy"] = num_json(r.judge_accuracy);
  nlohmann::json acc = nlohmann::json::array(), pm = nlohmann::json::array(),
                 db = nlohmann::json::array();
  for (double v : r.model_accuracy) acc.push_back(num_json(v));
  for (double v : r.proxy_mean) pm.push_back(num_json(v));
  for (double v : r.debiased) db.push_back(num_json(v));
  j["model_accuracy"] = std::move(acc);
  j["proxy_mean"] = std::move(pm);
  j["debiased"] = std::move(db);
  j["outcome"] = json_of(r.outcome);
  return j;
}

inline nlohmann::json json_of(const McRow& r) {
  nlohmann::json j;
  j["mean"] = num_json(r.mean);
  j["variance"] = num_json(r.variance);
  j["bias"] = num_json(r.bias);
  j["analytic_variance"] = num_json(r.analytic_variance);
  j["ratio"] = num_json(r.ratio);
  return j;
}

inline nlohmann::json json_of(const McVarianceReport& r,
                              bool include_draws = false) {
  nlohmann::json j;
  j["replications"] = r.replications;
  j["seed"] = r.seed;
  j["lambda_oracle"] = num_json(r.lambda_oracle);
  j["gt"] = json_of(r.gt);
  j["pp"] = json_of(r.pp);
  j["tuned_oracle"] = json_of(r.tuned_oracle);
  j["tuned_plugin"] = json_of(r.tuned_plugin);
  if (include_draws) {
    j["draws_gt"] = r.draws_gt;
    j["draws_pp"] = r.draws_pp;
    j["draws_tuned_oracle"] = r.draws_tuned_oracle;
    j["draws_tuned_plugin"] = r.draws_tuned_plugin;
  }
  return j;
}

inline nlohmann::json json_of(const IngestStats& s) {
  nlohmann::json j;
  j["lines"] = s.lines;
  j["raw_records"] = s.raw_records;
  j["merged"] = s.merged;
  j["tie_discarded"] = s.tie_discarded;
  j["labeled"] = s.labeled;
  j["proxy_only"] = s.proxy_only;
  return j;
}

inline nlohmann::json json_of(const SoftAgreementReport& s) {
  nlohmann::json j;
  j["soft"] = num_json(s.soft);
  j["mse"] = num_json(s.mse);
  j["truth_mean"] = num_json(s.truth_mean);
  j["epsilon_star"] = num_json(s.epsilon_star);
  j["rho2_bound"] = num_json(s.rho2_bound);
  j["pairs"] = s.pairs;
  return j;
}

inline nlohmann::json json_of(const CalibratedBoundReport& c) {
  nlohmann::json j;
  j["agreement"] = json_of(c.agreement);
  j["rho2"] = num_json(c.rho2);
  j["rho2_degenerate"] = c.rho2_degenerate;
  j["tau_bound"] = num_json(c.tau_bound);
  j["identity_gap"] = num_json(c.identity_gap);
  j["ceiling_ok"] = c.ceiling_ok;
  j["half_applicable"] = c.half_applicable;
  j["half_ok"] = c.half_ok;
  j["slack"] = num_json(c.slack);
  j["used_fallback_bins"] = c.used_fallback_bins;
  return j;
}

inline nlohmann::json json_of(const TauReport& t) {
  nlohmann::json j;
  j["pairs"] = t.pairs;
  j["rho2_hat"] = num_json(t.rho2_hat);
  j["rho2_degenerate"] = t.rho2_degenerate;
  j["tau_hat"] = num_json(t.tau_hat);
  if (t.rho2_ci) j["rho2_ci"] = json_of(*t.rho2_ci);
  if (t.tau_ci) j["tau_ci"] = json_of(*t.tau_ci);
  if (t.soft) j["soft"] = json_of(*t.soft);
  j["tau_bound_soft"] = num_json(t.tau_bound_soft);
  if (t.calibration) j["calibration"] = json_of(*t.calibration);
  return j;
}

inline nlohmann::json json_of(const SweepRow& r) {
  nlohmann::json j;
  j["b"] = num_json(r.b);
  j["p"] = num_json(r.p);
  j["q"] = num_json(r.q);
  j["agreement"] = num_json(r.agreement);
  j["balanced_agreement"] = num_json(r.balanced_agreement);
  j["bias"] = num_json(r.bias);
  j["rho2"] = num_json(r.rho2);
  j["tau_max"] = num_json(r.tau_max);
  j["tau_tuned"] = num_json(r.tau_tuned);
  j["frontier"] = r.frontier;
  return j;
}

/// One CSV line per grid point; non-finite numbers are spelled inf/nan and
/// the frontier flag is 0/1.
inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            std::ostream& out) {
  out << "b,p,q,agreement,balanced_agreement,bias,rho2,tau_max,tau_tuned,"
         "frontier\n";
  for (const SweepRow& r : rows) {
    out << fmt_num(r.b) << ',' << fmt_num(r.p) << ',' << fmt_num(r.q) << ','
        << fmt_num(r.agreement) << ',' << fmt_num(r.balanced_agreement) << ','
        << fmt_num(r.bias) << ',' << fmt_num(r.rho2) << ','
        << fmt_num(r.tau_max) << ',' << fmt_num(r.tau_tuned) << ','
        << (r.frontier ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report envelope
// ---------------------------------------------------------------------------

/// Invocation stamp embedded in every report so runs are reproducible from
/// their own output.  Contains no clock or host state: producing the same
/// report twice yields byte-identical files.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> options;
};

inline nlohmann::json report_envelope(const RunConfig& cfg,
                                      nlohmann::json body) {
  nlohmann::json j;
  j["command"] = cfg.command;
  j["options"] = cfg.options;
  j["version"] = kVersion;
  j["report"] = std::move(body);
  return j;
}

/// Canonical machine rendering: two-space indented JSON, alphabetical keys,
/// shortest round-trip doubles, trailing newline.
inline std::string machine_dump(const nlohmann::json& j) {
  return j.dump(2) + "\n";
}

namespace detail {

inline bool scalar_like(const nlohmann::json& v) {
  return !v.is_object() && !v.is_array();
}

inline std::string scalar_text(const nlohmann::json& v) {
  if (v.is_number_float()) return fmt_num(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "nan";
  return v.dump();
}

inline void render_table_impl(const nlohmann::json& j, std::ostream& out,
                              int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  for (const auto& item : j.items()) {
    const nlohmann::json& v = item.value();
    if (scalar_like(v)) {
      out << pad << item.key() << " = " << scalar_text(v) << '\n';
    } else if (v.is_array()) {
      bool flat = true;
      for (const auto& e : v)
        if (!scalar_like(e)) flat = false;
      if (flat) {
        out << pad << item.key() << " = [";
        for (std::size_t i = 0; i < v.size(); ++i)
          out << (i ? ", " : "") << scalar_text(v[i]);
        out << "]\n";
      } else {
        out << pad << item.key() << ":\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
          out << pad << "  [" << i << "]\n";
          render_table_impl(v[i], out, indent + 2);
        }
      }
    } else {
      out << pad << item.key() << ":\n";
      render_table_impl(v, out, indent + 1);
    }
  }
}

}  // namespace detail

/// Human-readable rendering of a report body: aligned key = value lines with
/// nested sections, numbers in %.10g.
inline void render_table(const nlohmann::json& body, std::ostream& out) {
  detail::render_table_impl(body, out, 0);
}

}  // namespace debias
