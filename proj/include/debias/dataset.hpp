#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "debias/common.hpp"

namespace debias {

/// One scored (prompt, model) pair.  `proxy` is the judge's score in [0,1]
/// (binary or continuous); `truth` is the ground-truth label when the pair
/// was human-labeled.  Labeled status is carried by the record itself, never
/// inferred from position.
struct ScoreRecord {
  std::string prompt_id;
  std::string model_id;
  double proxy = 0;
  std::optional<int> truth;           ///< 0 or 1
  std::optional<std::string> stratum;

  bool operator==(const ScoreRecord&) const = default;
};

/// Contiguous per-model view used by every estimator: labeled (truth, proxy)
/// pairs in record order followed by the proxy-only pool.
struct ModelSample {
  std::vector<double> labeled_truth;
  std::vector<double> labeled_proxy;  ///< aligned with labeled_truth
  std::vector<double> unlabeled_proxy;

  std::size_t labeled_count() const { return labeled_truth.size(); }
  std::size_t proxy_count() const { return unlabeled_proxy.size(); }
};

/// Prompt-aligned two-model view for score-gap estimation.  Labeled rows are
/// the shared prompts where both models carry truth; proxy rows are all other
/// shared prompts (both proxies observed).
struct PairedModelSample {
  std::vector<double> truth_a, proxy_a;  ///< labeled rows, aligned
  std::vector<double> truth_b, proxy_b;
  std::vector<double> pool_a, pool_b;    ///< proxy-only rows, aligned

  std::size_t labeled_count() const { return truth_a.size(); }
  std::size_t proxy_count() const { return pool_a.size(); }
};

/// Alignment outcome for a model pair: the aligned sample plus how many
/// prompts failed to align (present for one model only).
struct PairAlignment {
  PairedModelSample sample;
  std::size_t only_a = 0;       ///< prompts with model A records only
  std::size_t only_b = 0;
  std::size_t half_labeled = 0; ///< shared prompts labeled for one model only
};

/// A collection of ScoreRecords covering one or more models over a shared
/// prompt set.  Invariant: every (prompt_id, model_id) appears at most once.
/// Record order is preserved, so file -> dataset -> estimate reproduces the
/// in-memory pipeline bit for bit.
class PairedDataset {
 public:
  void add(ScoreRecord rec) {
    if (rec.truth && *rec.truth != 0 && *rec.truth != 1)
      throw ValidationError("ScoreRecord: truth must be 0 or 1");
    if (!(rec.proxy >= 0.0 && rec.proxy <= 1.0))
      throw ValidationError("ScoreRecord: proxy must lie in [0,1]");
    const std::string key = rec.prompt_id + '\x1f' + rec.model_id;
    if (!keys_.insert(key).second)
      throw ValidationError("duplicate record for prompt '" + rec.prompt_id +
                            "', model '" + rec.model_id + "'");
    auto [it, fresh] = by_model_.try_emplace(rec.model_id);
    if (fresh) model_order_.push_back(rec.model_id);
    it->second.push_back(records_.size());
    records_.push_back(std::move(rec));
  }

  const std::vector<ScoreRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Model ids in first-appearance order.
  const std::vector<std::string>& models() const { return model_order_; }

  bool has_model(const std::string& model) const {
    return by_model_.count(model) > 0;
  }

  /// Per-model view in record order.  Unknown model -> ValidationError.
  ModelSample extract(const std::string& model) const {
    ModelSample s;
    for (std::size_t i : indices_of(model)) {
      const ScoreRecord& r = records_[i];
      if (r.truth) {
        s.labeled_truth.push_back(static_cast<double>(*r.truth));
        s.labeled_proxy.push_back(r.proxy);
      } else {
        s.unlabeled_proxy.push_back(r.proxy);
      }
    }
    return s;
  }

  /// Per-stratum views for one model, keyed by stratum label (ordered, so
  /// iteration is deterministic).  Any record without a stratum label is an
  /// error naming the offending prompt.
  std::map<std::string, ModelSample> extract_strata(
      const std::string& model) const {
    std::map<std::string, ModelSample> out;
    for (std::size_t i : indices_of(model)) {
      const ScoreRecord& r = records_[i];
      if (!r.stratum)
        throw ValidationError("stratified estimate: record for prompt '" +
                              r.prompt_id + "' has no stratum label");
      ModelSample& s = out[*r.stratum];
      if (r.truth) {
        s.labeled_truth.push_back(static_cast<double>(*r.truth));
        s.labeled_proxy.push_back(r.proxy);
      } else {
        s.unlabeled_proxy.push_back(r.proxy);
      }
    }
    return out;
  }

  /// Aligns two models on shared prompts (in model-A record order).
  PairAlignment extract_pair(const std::string& model_a,
                             const std::string& model_b) const {
    const auto& ia = indices_of(model_a);
    const auto& ib = indices_of(model_b);
    std::unordered_map<std::string, std::size_t> b_by_prompt;
    b_by_prompt.reserve(ib.size());
    for (std::size_t i : ib) b_by_prompt.emplace(records_[i].prompt_id, i);

    PairAlignment out;
    std::size_t shared = 0;
    for (std::size_t i : ia) {
      const ScoreRecord& ra = records_[i];
      auto hit = b_by_prompt.find(ra.prompt_id);
      if (hit == b_by_prompt.end()) {
        ++out.only_a;
        continue;
      }
      ++shared;
      const ScoreRecord& rb = records_[hit->second];
      if (ra.truth && rb.truth) {
        out.sample.truth_a.push_back(static_cast<double>(*ra.truth));
        out.sample.proxy_a.push_back(ra.proxy);
        out.sample.truth_b.push_back(static_cast<double>(*rb.truth));
        out.sample.proxy_b.push_back(rb.proxy);
      } else {
        if (ra.truth.has_value() != rb.truth.has_value()) ++out.half_labeled;
        out.sample.pool_a.push_back(ra.proxy);
        out.sample.pool_b.push_back(rb.proxy);
      }
    }
    out.only_b = ib.size() - shared;
    return out;
  }

 private:
  const std::vector<std::size_t>& indices_of(const std::string& model) const {
    auto it = by_model_.find(model);
    if (it == by_model_.end()) {
      std::string msg = "unknown model '" + model + "'; dataset has:";
      for (const auto& m : model_order_) msg += " '" + m + "'";
      throw ValidationError(msg);
    }
    return it->second;
  }

  std::vector<ScoreRecord> records_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_model_;
  std::vector<std::string> model_order_;
  std::unordered_set<std::string> keys_;
};

}  // namespace debias
