#pragma once

// Target-variable definition: trait weights -> composite score -> labels.
//
// Labels follow a two-stage rule. Candidates outside the top
// (1 - percentile_cut) share of composite scores are labeled 0. From that top
// subset, `positive_count` candidates are drawn without replacement, each
// draw choosing among the remaining candidates with probability proportional
// to a weight that falls linearly from weight_high (best-ranked) to
// weight_low (worst-ranked). Drawn candidates are labeled 1, the rest 0.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fts/cohort.hpp"
#include "fts/error.hpp"
#include "fts/rng.hpp"
#include "fts/schema.hpp"

namespace fts {

inline constexpr double kSliderMax = 10.0;

struct WeightVector {
  std::array<double, kTraitCount> weights{};  // indexed by Trait

  double operator[](Trait t) const { return weights[index_of(t)]; }

  // Finite, non-negative, at least one strictly positive.
  void validate() const {
    bool any_positive = false;
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      const double w = weights[k];
      if (!std::isfinite(w) || w < 0.0)
        throw Error(ErrorCode::invalid_weights,
                    "weight for " + std::string(kTraitNames[k]) + " must be finite and >= 0",
                    std::string(kTraitNames[k]));
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw Error(ErrorCode::invalid_weights, "all trait weights are zero");
  }

  // Slider bounds apply to user input; the core only needs validate().
  void validate_slider_range() const {
    validate();
    for (std::size_t k = 0; k < kTraitCount; ++k)
      if (weights[k] > kSliderMax)
        throw Error(ErrorCode::invalid_weights,
                    "weight for " + std::string(kTraitNames[k]) + " exceeds slider maximum 10",
                    std::string(kTraitNames[k]));
  }

  // Five comma-separated reals in canonical trait order.
  static WeightVector parse(std::string_view text) {
    WeightVector w;
    std::size_t k = 0;
    std::size_t pos = 0;
    while (true) {
      const auto comma = text.find(',', pos);
      auto field = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      if (k >= kTraitCount)
        throw Error(ErrorCode::invalid_weights, "expected five weights, got more");
      double v = 0.0;
      auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw Error(ErrorCode::invalid_weights, "cannot parse weight '" + std::string(field) + "'");
      w.weights[k++] = v;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (k != kTraitCount)
      throw Error(ErrorCode::invalid_weights, "expected five weights, got " + std::to_string(k));
    w.validate_slider_range();
    return w;
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

struct ScoredCandidate {
  std::string candidate_id;
  double composite_score = 0.0;  // in [0,1]
  std::size_t rank = 0;          // 1-based, descending score, ties by ascending id
};

struct LabelingPolicy {
  double percentile_cut = 0.85;
  std::size_t positive_count = 100;
  double weight_high = 0.99;
  double weight_low = 0.01;

  double weight_span() const { return weight_high - weight_low; }

  void validate() const {
    if (!(percentile_cut > 0.0 && percentile_cut < 1.0))
      throw Error(ErrorCode::invalid_config, "percentile_cut must lie strictly between 0 and 1");
    if (positive_count < 1) throw Error(ErrorCode::invalid_config, "positive_count must be >= 1");
    if (!(weight_low < weight_high) || !(weight_low > 0.0) || !std::isfinite(weight_high))
      throw Error(ErrorCode::invalid_config, "need 0 < weight_low < weight_high");
  }

  friend bool operator==(const LabelingPolicy&, const LabelingPolicy&) = default;
};

struct LabeledDataset {
  std::vector<ScoredCandidate> scored;   // cohort order (ascending id)
  std::vector<std::uint8_t> labels;      // aligned with scored
  std::vector<std::string> top_subset_ids;  // rank order
  std::uint64_t sampling_seed = 0;

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }
};

// Fills ranks for scores given in ascending-id order.
inline void assign_ranks(std::vector<ScoredCandidate>& scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].composite_score != scored[b].composite_score)
      return scored[a].composite_score > scored[b].composite_score;
    return scored[a].candidate_id < scored[b].candidate_id;
  });
  for (std::size_t r = 0; r < order.size(); ++r) scored[order[r]].rank = r + 1;
}

inline std::vector<ScoredCandidate> composite_scores(const Cohort& cohort, const WeightVector& w) {
  w.validate();
  double total = 0.0;
  for (double v : w.weights) total += v;
  std::array<double, kTraitCount> normalized{};
  for (std::size_t k = 0; k < kTraitCount; ++k) normalized[k] = w.weights[k] / total;

  std::vector<ScoredCandidate> scored(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& p = cohort.profiles[i];
    double s = 0.0;
    for (std::size_t k = 0; k < kTraitCount; ++k) s += normalized[k] * p.traits[k];
    scored[i].candidate_id = p.candidate_id;
    scored[i].composite_score = std::clamp(s, 0.0, 1.0);
  }
  assign_ranks(scored);
  return scored;
}

// Linear sampling weight of the candidate at 1-based rank x in a pool of n:
// f(x) = span/(1-n) * x + (low - high*n)/(1-n), so f(1) = high, f(n) = low.
inline double sampling_weight(std::size_t x, std::size_t n,
                              const LabelingPolicy& policy = LabelingPolicy{}) {
  if (n < 2)
    throw Error(ErrorCode::domain_error, "sampling weight needs a pool of at least 2");
  if (x < 1 || x > n)
    throw Error(ErrorCode::domain_error,
                "rank " + std::to_string(x) + " outside 1.." + std::to_string(n));
  const double nd = static_cast<double>(n);
  const double xd = static_cast<double>(x);
  return policy.weight_span() / (1.0 - nd) * xd +
         (policy.weight_low - policy.weight_high * nd) / (1.0 - nd);
}

// ceil((1 - cut) * N), with a small slack so that products such as
// 0.15000000000000002 * 2000 do not round up past the intended count.
inline std::size_t top_subset_size(std::size_t n, double percentile_cut) {
  const double exact = (1.0 - percentile_cut) * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

inline LabeledDataset assign_labels(std::vector<ScoredCandidate> scored,
                                    const LabelingPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (scored.size() < 2)
    throw Error(ErrorCode::domain_error, "labeling needs at least two candidates");

  const std::size_t n = scored.size();
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = scored[i].rank;
    if (r < 1 || r > n) throw Error(ErrorCode::domain_error, "ranks are not a permutation");
    by_rank[r - 1] = i;
  }

  LabeledDataset ds;
  ds.sampling_seed = seed;
  ds.labels.assign(n, 0);
  const std::size_t pool = top_subset_size(n, policy.percentile_cut);
  for (std::size_t r = 0; r < pool; ++r) ds.top_subset_ids.push_back(scored[by_rank[r]].candidate_id);

  if (pool <= policy.positive_count) {
    for (std::size_t r = 0; r < pool; ++r) ds.labels[by_rank[r]] = 1;
  } else {
    std::vector<double> weight(pool);
    for (std::size_t x = 1; x <= pool; ++x) weight[x - 1] = sampling_weight(x, pool, policy);
    std::vector<std::size_t> remaining(pool);
    std::iota(remaining.begin(), remaining.end(), 0);
    Xoshiro256 rng(seed);
    for (std::size_t draw = 0; draw < policy.positive_count; ++draw) {
      double total = 0.0;
      for (std::size_t r : remaining) total += weight[r];
      const double u = rng.uniform() * total;
      double acc = 0.0;
      std::size_t pick = remaining.size() - 1;
      for (std::size_t j = 0; j < remaining.size(); ++j) {
        acc += weight[remaining[j]];
        if (u < acc) {
          pick = j;
          break;
        }
      }
      ds.labels[by_rank[remaining[pick]]] = 1;
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  ds.scored = std::move(scored);
  return ds;
}

}  // namespace fts
