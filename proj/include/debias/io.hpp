#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "debias/common.hpp"
#include "debias/dataset.hpp"

namespace debias {

struct IngestOptions {
  /// Reject proxy values other than exactly 0 or 1.
  bool require_binary_proxy = false;
};

struct IngestStats {
  std::size_t lines = 0;          ///< non-blank input lines parsed
  std::size_t raw_records = 0;    ///< records before rater merging
  std::size_t merged = 0;         ///< (prompt, model) groups with >1 rater
  std::size_t tie_discarded = 0;  ///< groups dropped on a truth-vote tie
  std::size_t labeled = 0;        ///< final records carrying a truth label
  std::size_t proxy_only = 0;     ///< final records without one
};

struct IngestResult {
  PairedDataset dataset;
  IngestStats stats;
};

namespace detail {

[[noreturn]] inline void ingest_fail(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

inline std::string id_field(const nlohmann::json& v, std::size_t line,
                            const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer())
    return std::to_string(v.get<long long>());
  ingest_fail(line, std::string(key) + " must be a string or integer");
}

}  // namespace detail

/// Reads one JSON object per line.  Recognized keys:
///   prompt_id (string|int, required), model_id (string|int, required),
///   proxy (number in [0,1], required), truth (0/1 or bool, optional),
///   rater_id (string|int, optional), stratum (string, optional).
/// Any other key is an error naming the line.  Multiple raters may label the
/// same (prompt, model): their proxy values must agree exactly, their strata
/// must be consistent, and their truth labels are merged by majority vote —
/// an exact tie discards the whole record (counted, not an error).  A
/// duplicate (prompt, model, rater) triple, with a missing rater counting as
/// one distinct rater, is an error.
inline IngestResult read_records(std::istream& in,
                                 const IngestOptions& opts = {}) {
  struct Group {
    std::string prompt, model;
    std::optional<std::string> stratum;
    double proxy = 0;
    std::set<std::string> raters;
    std::size_t ones = 0, zeros = 0, raw = 0;
    std::size_t first_line = 0;
  };
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;

  IngestStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.lines;

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      detail::ingest_fail(line_no, "not a JSON object");

    for (const auto& item : j.items()) {
      const std::string& key = item.key();
      if (key != "prompt_id" && key != "model_id" && key != "proxy" &&
          key != "truth" && key != "rater_id" && key != "stratum")
        detail::ingest_fail(line_no, "unknown key '" + key + "'");
    }
    if (!j.contains("prompt_id") || !j.contains("model_id") ||
        !j.contains("proxy"))
      detail::ingest_fail(line_no,
                          "prompt_id, model_id and proxy are required");

    const std::string prompt =
        detail::id_field(j.at("prompt_id"), line_no, "prompt_id");
    const std::string model =
        detail::id_field(j.at("model_id"), line_no, "model_id");

    const nlohmann::json& pj = j.at("proxy");
    if (!pj.is_number())
      detail::ingest_fail(line_no, "proxy must be a number");
    const double proxy = pj.get<double>();
    if (!(proxy >= 0.0 && proxy <= 1.0))
      detail::ingest_fail(line_no, "proxy " + std::to_string(proxy) +
                                       " outside [0,1]");
    if (opts.require_binary_proxy && proxy != 0.0 && proxy != 1.0)
      detail::ingest_fail(line_no, "proxy must be exactly 0 or 1");

    std::optional<int> truth;
    if (j.contains("truth")) {
      const nlohmann::json& tj = j.at("truth");
      if (tj.is_boolean()) {
        truth = tj.get<bool>() ? 1 : 0;
      } else if (tj.is_number_integer()) {
        const long long t = tj.get<long long>();
        if (t != 0 && t != 1)
          detail::ingest_fail(line_no, "truth must be 0 or 1");
        truth = static_cast<int>(t);
      } else {
        detail::ingest_fail(line_no, "truth must be 0, 1 or a boolean");
      }
    }

    std::string rater = "\x01no-rater";
    if (j.contains("rater_id"))
      rater = detail::id_field(j.at("rater_id"), line_no, "rater_id");

    std::optional<std::string> stratum;
    if (j.contains("stratum")) {
      const nlohmann::json& sj = j.at("stratum");
      if (!sj.is_string())
        detail::ingest_fail(line_no, "stratum must be a string");
      stratum = sj.get<std::string>();
    }

    ++stats.raw_records;
    const std::string key = prompt + '\x1f' + model;
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      Group g;
      g.prompt = prompt;
      g.model = model;
      g.stratum = stratum;
      g.proxy = proxy;
      g.first_line = line_no;
      groups.push_back(std::move(g));
    }
    Group& g = groups[it->second];
    if (!g.raters.insert(rater).second)
      detail::ingest_fail(line_no, "duplicate record for prompt '" + prompt +
                                       "', model '" + model + "', rater '" +
                                       (rater[0] == '\x01' ? "<none>" : rater) +
                                       "'");
    if (!inserted) {
      if (g.proxy != proxy)
        detail::ingest_fail(line_no,
                            "raters disagree on proxy for prompt '" + prompt +
                                "', model '" + model + "'");
      if (g.stratum != stratum)
        detail::ingest_fail(line_no,
                            "raters disagree on stratum for prompt '" +
                                prompt + "', model '" + model + "'");
    }
    if (truth) {
      if (*truth == 1)
        ++g.ones;
      else
        ++g.zeros;
    }
    ++g.raw;
  }

  IngestResult out;
  for (const Group& g : groups) {
    if (g.raw > 1) ++stats.merged;
    ScoreRecord r;
    r.prompt_id = g.prompt;
    r.model_id = g.model;
    r.proxy = g.proxy;
    r.stratum = g.stratum;
    if (g.ones + g.zeros > 0) {
      if (g.ones == g.zeros) {
        ++stats.tie_discarded;
        continue;
      }
      r.truth = g.ones > g.zeros ? 1 : 0;
    }
    if (r.truth)
      ++stats.labeled;
    else
      ++stats.proxy_only;
    out.dataset.add(std::move(r));
  }
  out.stats = stats;
  return out;
}

inline IngestResult read_records_file(const std::string& path,
                                      const IngestOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");
  return read_records(in, opts);
}

/// Writes one JSON object per line with alphabetically ordered keys and
/// shortest round-trip number formatting; absent optional fields are omitted.
/// read_records on the output reproduces the dataset exactly.
inline void write_records(const PairedDataset& data, std::ostream& out) {
  for (const ScoreRecord& r : data.records()) {
    nlohmann::json j;
    j["prompt_id"] = r.prompt_id;
    j["model_id"] = r.model_id;
    j["proxy"] = r.proxy;
    if (r.truth) j["truth"] = *r.truth;
    if (r.stratum) j["stratum"] = *r.stratum;
    out << j.dump() << '\n';
  }
}

inline void write_records_file(const PairedDataset& data,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  write_records(data, out);
  out.flush();
  if (!out) throw ValidationError("failed writing output file '" + path + "'");
}

}  // namespace debias
