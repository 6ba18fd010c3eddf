// Command-line surface: turns line-delimited score files into debiased
// estimates, efficiency-ceiling reports, and plot-ready sweep tables, and
// exposes the simulation harness.  Exit codes: 0 success, 2 input/validation
// error, 3 statistical precondition failure, 1 internal error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/bootstrap.hpp"
#include "debias/bounds.hpp"
#include "debias/common.hpp"
#include "debias/estimators.hpp"
#include "debias/fisher.hpp"
#include "debias/io.hpp"
#include "debias/report.hpp"
#include "debias/simulation.hpp"
#include "debias/tau.hpp"
#include "debias/version.hpp"
#include "debias/world.hpp"

namespace {

using namespace debias;

/// Shortest round-trip text for a double (re-parsing yields the same bits).
std::string num_text(double v) { return nlohmann::json(v).dump(); }

/// Accepts "a,b,c" lists and "start:end:step" inclusive ranges.
std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  auto parse_one = [&](const std::string& tok) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": cannot parse number '" +
                            tok + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(parse_one(tok));
    if (parts.size() != 3)
      throw ValidationError(std::string(what) +
                            ": range syntax is start:end:step");
    const double start = parts[0], end = parts[1], step = parts[2];
    if (!(step > 0))
      throw ValidationError(std::string(what) + ": step must be positive");
    if (end < start - 1e-12)
      throw ValidationError(std::string(what) + ": end below start");
    const long long count = std::llround((end - start) / step);
    for (long long i = 0; i <= count; ++i) {
      const double v = start + static_cast<double>(i) * step;
      if (v > end + 1e-9) break;
      out.push_back(v);
    }
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(parse_one(tok));
    }
  }
  if (out.empty())
    throw ValidationError(std::string(what) + ": empty list");
  return out;
}

ProxyCount parse_proxy_count(const std::string& text) {
  if (text == "inf" || text == "INF" || text == "Inf")
    return ProxyCount::unlimited();
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(text, &pos);
    if (pos != text.size() || v < 0) throw std::invalid_argument(text);
    return ProxyCount(static_cast<std::uint64_t>(v));
  } catch (const std::exception&) {
    throw ValidationError("--N: expected a nonnegative integer or 'inf', got '" +
                          text + "'");
  }
}

struct Common {
  std::string format = "table";
  std::string output;  ///< empty = stdout
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--format", c.format, "Report format")
      ->check(CLI::IsMember({"table", "machine"}))
      ->capture_default_str();
  sub->add_option("--output", c.output, "Write output to this file (default stdout)");
}

void write_text(const Common& c, const std::string& text) {
  if (c.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(c.output);
  if (!out) throw ValidationError("cannot open output file '" + c.output + "'");
  out << text;
  out.flush();
  if (!out)
    throw ValidationError("failed writing output file '" + c.output + "'");
}

void emit(const Common& c, const RunConfig& cfg, nlohmann::json body) {
  const nlohmann::json env = report_envelope(cfg, std::move(body));
  if (c.format == "machine") {
    write_text(c, machine_dump(env));
  } else {
    std::ostringstream os;
    render_table(env, os);
    write_text(c, os.str());
  }
}

std::string resolve_model(const PairedDataset& data, const std::string& given) {
  if (!given.empty()) return given;
  const auto models = data.models();
  if (models.size() == 1) return models.front();
  std::string list;
  for (const auto& m : models) list += (list.empty() ? "" : ", ") + m;
  throw ValidationError(
      "--model is required when the input holds several models (found: " +
      list + ")");
}

std::map<std::string, double> read_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open weights file '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ValidationError("weights file must hold one JSON object "
                          "{\"stratum\": weight, ...}");
  std::map<std::string, double> w;
  for (const auto& item : j.items()) {
    if (!item.value().is_number())
      throw ValidationError("weights file: weight for stratum '" + item.key() +
                            "' is not a number");
    w[item.key()] = item.value().get<double>();
  }
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased evaluation of judge-scored benchmarks"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "Key-value configuration file (flags override)");
  app.require_subcommand(1);

  int exit_code = 0;

  // ---- analytic ----------------------------------------------------------
  double an_b = 0, an_p = 0, an_q = 0;
  std::uint64_t an_n = 100;
  std::string an_N = "10000";
  Common an_c;
  {
    CLI::App* sub = app.add_subcommand(
        "analytic", "Closed-form quantities of a (b, p, q) world");
    sub->add_option("--b", an_b, "Pr{truth = 1}")->required();
    sub->add_option("--p", an_p, "Pr{proxy = truth | truth = 1}")->required();
    sub->add_option("--q", an_q, "Pr{proxy = truth | truth = 0}")->required();
    sub->add_option("--n", an_n, "Labeled sample size for the variance profile")
        ->capture_default_str();
    sub->add_option("--N", an_N, "Proxy-only pool size (integer or 'inf')")
        ->capture_default_str();
    add_common(sub, an_c);
    sub->callback([&] {
      const ProxyCount N = parse_proxy_count(an_N);
      const JudgeWorld w = JudgeWorld::strict_world(an_b, an_p, an_q);
      RunConfig cfg;
      cfg.command = "analytic";
      cfg.options = {{"b", num_text(an_b)},   {"p", num_text(an_p)},
                     {"q", num_text(an_q)},   {"n", std::to_string(an_n)},
                     {"N", an_N},             {"format", an_c.format}};
      nlohmann::json body;
      body["world"] = json_of(w);
      body["derived"] = json_of(derived_quantities(w));
      body["bounds"] = json_of(check_bounds(w));
      body["variance"] = json_of(variance_profile(w, an_n, N));
      emit(an_c, cfg, std::move(body));
    });
  }

  // ---- estimate -----------------------------------------------------------
  std::string es_input, es_model, es_kind = "ppi-tuned", es_weights;
  int es_boot = 0;
  double es_level = 0.90;
  std::uint64_t es_seed = 1;
  bool es_derive = false, es_binary = false;
  Common es_c;
  {
    CLI::App* sub = app.add_subcommand(
        "estimate", "Debiased accuracy estimate from a score file");
    sub->add_option("--input", es_input, "Line-delimited record file")
        ->required();
    sub->add_option("--model", es_model,
                    "Model to score (optional when the file has exactly one)");
    sub->add_option("--estimator", es_kind, "Estimator")
        ->check(CLI::IsMember({"gt", "ppi", "ppi-tuned", "stratified"}))
        ->capture_default_str();
    sub->add_option("--bootstrap", es_boot,
                    "Bootstrap replicates for a percentile CI (0 = none)")
        ->capture_default_str();
    sub->add_option("--level", es_level, "CI level")->capture_default_str();
    sub->add_option("--seed", es_seed, "Bootstrap seed")->capture_default_str();
    sub->add_option("--weights", es_weights,
                    "JSON file of stratum weights (stratified only)");
    sub->add_flag("--derive-weights", es_derive,
                  "Derive stratum weights from proxy-pool counts");
    sub->add_flag("--binary-proxy", es_binary,
                  "Require proxy values to be exactly 0 or 1");
    add_common(sub, es_c);
    sub->callback([&] {
      IngestOptions opts;
      opts.require_binary_proxy = es_binary;
      const IngestResult in = read_records_file(es_input, opts);
      const std::string model = resolve_model(in.dataset, es_model);

      RunConfig cfg;
      cfg.command = "estimate";
      cfg.options = {{"input", es_input},
                     {"model", model},
                     {"estimator", es_kind},
                     {"bootstrap", std::to_string(es_boot)},
                     {"level", num_text(es_level)},
                     {"seed", std::to_string(es_seed)},
                     {"derive_weights", es_derive ? "true" : "false"},
                     {"binary_proxy", es_binary ? "true" : "false"},
                     {"format", es_c.format}};
      if (!es_weights.empty()) cfg.options["weights"] = es_weights;

      BootstrapSpec spec;
      spec.replicates = es_boot;
      spec.level = es_level;
      spec.seed = es_seed;

      nlohmann::json body;
      if (es_kind == "stratified") {
        if (es_weights.empty() && !es_derive)
          throw ValidationError(
              "estimate --estimator stratified requires --weights FILE or "
              "--derive-weights");
        const auto strata = in.dataset.extract_strata(model);
        const auto weights = es_weights.empty()
                                 ? weights_from_proxy_counts(strata)
                                 : read_weights_file(es_weights);
        StratifiedReport rep = stratified_estimate(strata, weights);
        rep.weights_derived = es_weights.empty();
        body = json_of(rep);
        if (es_boot > 0)
          body["ci"] = json_of(bootstrap_ci_stratified(strata, weights, spec));
      } else {
        const EstimatorKind kind = estimator_kind_from(es_kind);
        const ModelSample s = in.dataset.extract(model);
        EstimateReport rep = estimate(s, kind);
        if (es_boot > 0) rep.ci = bootstrap_ci(s, kind, spec);
        body = json_of(rep);
      }
      body["ingest"] = json_of(in.stats);
      body["model"] = model;
      emit(es_c, cfg, std::move(body));
    });
  }

  // ---- tau ----------------------------------------------------------------
  std::string ta_input, ta_model;
  bool ta_continuous = false;
  std::uint64_t ta_bins = 10;
  int ta_boot = 1000;
  double ta_level = 0.90;
  std::uint64_t ta_seed = 1;
  Common ta_c;
  {
    CLI::App* sub = app.add_subcommand(
        "tau", "Estimated efficiency ceiling from labeled pairs");
    sub->add_option("--input", ta_input, "Line-delimited record file")
        ->required();
    sub->add_option("--model", ta_model,
                    "Model to score (optional when the file has exactly one)");
    sub->add_flag("--continuous", ta_continuous,
                  "Proxy is a continuous score: also audit the "
                  "calibration-based ceiling");
    sub->add_option("--bins", ta_bins, "Recalibration bins (continuous mode)")
        ->capture_default_str();
    sub->add_option("--bootstrap", ta_boot, "Bootstrap replicates")
        ->capture_default_str();
    sub->add_option("--level", ta_level, "CI level")->capture_default_str();
    sub->add_option("--seed", ta_seed, "Bootstrap seed")->capture_default_str();
    add_common(sub, ta_c);
    sub->callback([&] {
      IngestOptions opts;
      opts.require_binary_proxy = !ta_continuous;
      const IngestResult in = read_records_file(ta_input, opts);
      const std::string model = resolve_model(in.dataset, ta_model);
      const ModelSample s = in.dataset.extract(model);

      RunConfig cfg;
      cfg.command = "tau";
      cfg.options = {{"input", ta_input},
                     {"model", model},
                     {"continuous", ta_continuous ? "true" : "false"},
                     {"bins", std::to_string(ta_bins)},
                     {"bootstrap", std::to_string(ta_boot)},
                     {"level", num_text(ta_level)},
                     {"seed", std::to_string(ta_seed)},
                     {"format", ta_c.format}};

      BootstrapSpec spec;
      spec.replicates = ta_boot;
      spec.level = ta_level;
      spec.seed = ta_seed;
      std::optional<std::size_t> bins;
      if (ta_continuous) bins = static_cast<std::size_t>(ta_bins);

      TauReport rep = tau_report(s.labeled_truth, s.labeled_proxy, spec, bins);
      nlohmann::json body = json_of(rep);
      if (!ta_continuous) {
        // The agreement-based block assumes a calibrated continuous score;
        // drop it for plain binary proxies to avoid misreading.
        body.erase("soft");
        body.erase("tau_bound_soft");
      }
      body["ingest"] = json_of(in.stats);
      body["model"] = model;
      emit(ta_c, cfg, std::move(body));
    });
  }

  // ---- gap ----------------------------------------------------------------
  std::string ga_input, ga_a, ga_b;
  int ga_boot = 0;
  double ga_level = 0.90;
  std::uint64_t ga_seed = 1;
  bool ga_binary = false;
  Common ga_c;
  {
    CLI::App* sub = app.add_subcommand(
        "gap", "Jointly-tuned accuracy gap between two models");
    sub->add_option("--input", ga_input, "Line-delimited record file")
        ->required();
    sub->add_option("--model-a", ga_a, "First model")->required();
    sub->add_option("--model-b", ga_b, "Second model")->required();
    sub->add_option("--bootstrap", ga_boot,
                    "Bootstrap replicates for a percentile CI (0 = none)")
        ->capture_default_str();
    sub->add_option("--level", ga_level, "CI level")->capture_default_str();
    sub->add_option("--seed", ga_seed, "Bootstrap seed")->capture_default_str();
    sub->add_flag("--binary-proxy", ga_binary,
                  "Require proxy values to be exactly 0 or 1");
    add_common(sub, ga_c);
    sub->callback([&] {
      IngestOptions opts;
      opts.require_binary_proxy = ga_binary;
      const IngestResult in = read_records_file(ga_input, opts);
      const PairAlignment al = in.dataset.extract_pair(ga_a, ga_b);

      RunConfig cfg;
      cfg.command = "gap";
      cfg.options = {{"input", ga_input},
                     {"model_a", ga_a},
                     {"model_b", ga_b},
                     {"bootstrap", std::to_string(ga_boot)},
                     {"level", num_text(ga_level)},
                     {"seed", std::to_string(ga_seed)},
                     {"binary_proxy", ga_binary ? "true" : "false"},
                     {"format", ga_c.format}};

      GapReport rep = gap_estimate(al);
      if (ga_boot > 0) {
        BootstrapSpec spec;
        spec.replicates = ga_boot;
        spec.level = ga_level;
        spec.seed = ga_seed;
        rep.ci = bootstrap_ci_gap(al, spec);
      }
      nlohmann::json body = json_of(rep);
      body["ingest"] = json_of(in.stats);
      emit(ga_c, cfg, std::move(body));
    });
  }

  // ---- simulate -----------------------------------------------------------
  CLI::App* sim = app.add_subcommand("simulate", "Synthetic-data harness");
  sim->require_subcommand(1);

  // simulate world
  double sw_b = 0, sw_p = 0, sw_q = 0;
  std::uint64_t sw_n = 100, sw_N = 10000, sw_seed = 1;
  std::string sw_model = "model";
  Common sw_c;
  {
    CLI::App* sub = sim->add_subcommand(
        "world", "Draw a score file from a (b, p, q) world");
    sub->add_option("--b", sw_b, "Pr{truth = 1}")->required();
    sub->add_option("--p", sw_p, "Pr{proxy = truth | truth = 1}")->required();
    sub->add_option("--q", sw_q, "Pr{proxy = truth | truth = 0}")->required();
    sub->add_option("--n", sw_n, "Labeled records")->capture_default_str();
    sub->add_option("--N", sw_N, "Proxy-only records")->capture_default_str();
    sub->add_option("--seed", sw_seed, "Seed")->capture_default_str();
    sub->add_option("--model-id", sw_model, "Model id to write")
        ->capture_default_str();
    sub->add_option("--output", sw_c.output,
                    "Write records to this file (default stdout)");
    sub->callback([&] {
      const JudgeWorld w = JudgeWorld::strict_world(sw_b, sw_p, sw_q);
      const PairedDataset data =
          sample_world(w, sw_n, sw_N, sw_seed, sw_model);
      std::ostringstream os;
      write_records(data, os);
      write_text(sw_c, os.str());
    });
  }

  // simulate reversal
  double rv_judge = 0;
  std::string rv_models;
  std::uint64_t rv_prompts = 100000, rv_n = 0, rv_seed = 1;
  Common rv_c;
  {
    CLI::App* sub = sim->add_subcommand(
        "reversal",
        "Judge-agreement leaderboard for models strictly better than the judge");
    sub->add_option("--judge-acc", rv_judge, "Judge accuracy")->required();
    sub->add_option("--models", rv_models,
                    "Model accuracies: comma list or start:end:step")
        ->required();
    sub->add_option("--prompts", rv_prompts, "Prompt universe size")
        ->capture_default_str();
    sub->add_option("--n", rv_n, "Ground-truth labels (0 = none)")
        ->capture_default_str();
    sub->add_option("--seed", rv_seed, "Seed")->capture_default_str();
    add_common(sub, rv_c);
    sub->callback([&] {
      const std::vector<double> accs = parse_grid(rv_models, "--models");
      const ReversalRun run =
          simulate_strictly_better(rv_judge, accs, rv_prompts, rv_n, rv_seed);
      RunConfig cfg;
      cfg.command = "simulate reversal";
      cfg.options = {{"judge_acc", num_text(rv_judge)},
                     {"models", rv_models},
                     {"prompts", std::to_string(rv_prompts)},
                     {"n", std::to_string(rv_n)},
                     {"seed", std::to_string(rv_seed)},
                     {"format", rv_c.format}};
      emit(rv_c, cfg, json_of(run));
    });
  }

  // simulate noisy-judge
  int nj_classes = 10;
  double nj_judge = 0;
  std::string nj_models;
  std::uint64_t nj_prompts = 100000, nj_n = 0, nj_seed = 1;
  Common nj_c;
  {
    CLI::App* sub = sim->add_subcommand(
        "noisy-judge",
        "Multiclass judge with symmetric, model-independent errors");
    sub->add_option("--classes", nj_classes, "Label classes (>= 3)")
        ->capture_default_str();
    sub->add_option("--judge-acc", nj_judge, "Judge accuracy")->required();
    sub->add_option("--models", nj_models,
                    "Model accuracies: comma list or start:end:step")
        ->required();
    sub->add_option("--prompts", nj_prompts, "Prompts")->capture_default_str();
    sub->add_option("--n", nj_n, "Ground-truth labels (0 = none)")
        ->capture_default_str();
    sub->add_option("--seed", nj_seed, "Seed")->capture_default_str();
    add_common(sub, nj_c);
    sub->callback([&] {
      const std::vector<double> accs = parse_grid(nj_models, "--models");
      const NoisyJudgeRun run = simulate_noisy_judge(
          nj_classes, nj_judge, accs, nj_prompts, nj_n, nj_seed);
      RunConfig cfg;
      cfg.command = "simulate noisy-judge";
      cfg.options = {{"classes", std::to_string(nj_classes)},
                     {"judge_acc", num_text(nj_judge)},
                     {"models", nj_models},
                     {"prompts", std::to_string(nj_prompts)},
                     {"n", std::to_string(nj_n)},
                     {"seed", std::to_string(nj_seed)},
                     {"format", nj_c.format}};
      emit(nj_c, cfg, json_of(run));
    });
  }

  // simulate sweep
  std::string sv_b, sv_p, sv_q, sv_N = "10000";
  std::uint64_t sv_n = 100;
  Common sv_c;
  {
    CLI::App* sub = sim->add_subcommand(
        "sweep", "Closed-form grid sweep as a plot-ready CSV");
    sub->add_option("--b-grid", sv_b, "Grid for b (list or start:end:step)")
        ->required();
    sub->add_option("--p-grid", sv_p, "Grid for p")->required();
    sub->add_option("--q-grid", sv_q, "Grid for q")->required();
    sub->add_option("--n", sv_n, "Labeled size for the attainable speedup")
        ->capture_default_str();
    sub->add_option("--N", sv_N, "Proxy-only pool size (integer or 'inf')")
        ->capture_default_str();
    add_common(sub, sv_c);
    sub->callback([&] {
      const auto rows =
          frontier_sweep(parse_grid(sv_b, "--b-grid"),
                         parse_grid(sv_p, "--p-grid"),
                         parse_grid(sv_q, "--q-grid"), sv_n,
                         parse_proxy_count(sv_N));
      if (sv_c.format == "machine") {
        RunConfig cfg;
        cfg.command = "simulate sweep";
        cfg.options = {{"b_grid", sv_b}, {"p_grid", sv_p}, {"q_grid", sv_q},
                       {"n", std::to_string(sv_n)}, {"N", sv_N},
                       {"format", sv_c.format}};
        nlohmann::json body;
        nlohmann::json arr = nlohmann::json::array();
        for (const SweepRow& r : rows) arr.push_back(json_of(r));
        body["rows"] = std::move(arr);
        emit(sv_c, cfg, std::move(body));
      } else {
        std::ostringstream os;
        write_sweep_csv(rows, os);
        write_text(sv_c, os.str());
      }
    });
  }

  // simulate mc-variance
  double mc_b = 0, mc_p = 0, mc_q = 0;
  std::uint64_t mc_n = 100, mc_N = 10000, mc_reps = 20000, mc_seed = 1;
  bool mc_draws = false;
  Common mc_c;
  {
    CLI::App* sub = sim->add_subcommand(
        "mc-variance",
        "Monte Carlo audit of the closed-form estimator variances");
    sub->add_option("--b", mc_b, "Pr{truth = 1}")->required();
    sub->add_option("--p", mc_p, "Pr{proxy = truth | truth = 1}")->required();
    sub->add_option("--q", mc_q, "Pr{proxy = truth | truth = 0}")->required();
    sub->add_option("--n", mc_n, "Labeled size")->capture_default_str();
    sub->add_option("--N", mc_N, "Proxy-only pool size")->capture_default_str();
    sub->add_option("--replications", mc_reps, "Replications")
        ->capture_default_str();
    sub->add_option("--seed", mc_seed, "Seed")->capture_default_str();
    sub->add_flag("--emit-draws", mc_draws,
                  "Include per-replication estimates in the report");
    add_common(sub, mc_c);
    sub->callback([&] {
      const JudgeWorld w = JudgeWorld::strict_world(mc_b, mc_p, mc_q);
      const McVarianceReport rep =
          mc_variance(w, mc_n, mc_N, mc_reps, mc_seed);
      RunConfig cfg;
      cfg.command = "simulate mc-variance";
      cfg.options = {{"b", num_text(mc_b)},
                     {"p", num_text(mc_p)},
                     {"q", num_text(mc_q)},
                     {"n", std::to_string(mc_n)},
                     {"N", std::to_string(mc_N)},
                     {"replications", std::to_string(mc_reps)},
                     {"seed", std::to_string(mc_seed)},
                     {"format", mc_c.format}};
      emit(mc_c, cfg, json_of(rep, mc_draws));
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
