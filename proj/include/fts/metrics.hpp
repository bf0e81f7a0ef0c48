#pragma once

// Confusion matrices, per-group selection and error rates, label and score
// distributions, and the A/B comparison built from them.
//
// A rate whose denominator is zero is undefined and is carried as an empty
// optional; it is never coerced to 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fts/cohort.hpp"
#include "fts/error.hpp"
#include "fts/schema.hpp"
#include "fts/svm.hpp"
#include "fts/target.hpp"

namespace fts {

using Rate = std::optional<double>;

inline Rate ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  std::size_t selected() const { return tp + fp; }

  void add(bool predicted, bool actual) {
    if (predicted) {
      ++(actual ? tp : fp);
    } else {
      ++(actual ? fn : tn);
    }
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  Rate accuracy() const { return ratio(tp + tn, total()); }
  Rate tpr() const { return ratio(tp, tp + fn); }
  Rate fpr() const { return ratio(fp, fp + tn); }
  Rate ppv() const { return ratio(tp, tp + fp); }
  Rate npv() const { return ratio(tn, tn + fn); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Counts over the given indices; predictions and labels share cohort order.
inline ConfusionMatrix confusion(std::span<const Prediction> predictions,
                                 std::span<const std::uint8_t> labels,
                                 std::span<const std::size_t> over) {
  ConfusionMatrix m;
  for (std::size_t i : over) {
    if (i >= predictions.size() || i >= labels.size())
      throw Error(ErrorCode::missing_id, "index " + std::to_string(i) + " has no prediction or label");
    m.add(predictions[i].predicted_label == 1, labels[i] == 1);
  }
  return m;
}

// Id-keyed form: every id in `over` must appear in both maps.
inline ConfusionMatrix confusion(const std::unordered_map<std::string, std::uint8_t>& predicted,
                                 const std::unordered_map<std::string, std::uint8_t>& labels,
                                 std::span<const std::string> over) {
  ConfusionMatrix m;
  for (const auto& id : over) {
    auto p = predicted.find(id);
    auto l = labels.find(id);
    if (p == predicted.end()) throw Error(ErrorCode::missing_id, "no prediction for " + id, id);
    if (l == labels.end()) throw Error(ErrorCode::missing_id, "no label for " + id, id);
    m.add(p->second == 1, l->second == 1);
  }
  return m;
}

struct GroupMetrics {
  Attribute attribute = Attribute::gender;
  std::string group;
  std::size_t count = 0;
  std::size_t selected = 0;
  double selection_rate = 0.0;
  Rate tpr, fpr, ppv, npv;
  ConfusionMatrix confusion;
};

inline GroupMetrics metrics_from(Attribute attribute, std::string group, const ConfusionMatrix& m) {
  GroupMetrics g;
  g.attribute = attribute;
  g.group = std::move(group);
  g.confusion = m;
  g.count = m.total();
  g.selected = m.selected();
  g.selection_rate = g.count ? static_cast<double>(g.selected) / static_cast<double>(g.count) : 0.0;
  g.tpr = m.tpr();
  g.fpr = m.fpr();
  g.ppv = m.ppv();
  g.npv = m.npv();
  return g;
}

// One entry per group present among `over`, ordered by group value.
inline std::vector<GroupMetrics> group_metrics(std::span<const Prediction> predictions,
                                               std::span<const std::uint8_t> labels,
                                               const Cohort& cohort, Attribute attribute,
                                               std::span<const std::size_t> over) {
  std::map<std::string, ConfusionMatrix> by_group;
  for (std::size_t i : over) {
    if (i >= cohort.size() || i >= predictions.size() || i >= labels.size())
      throw Error(ErrorCode::missing_id, "index " + std::to_string(i) + " outside cohort");
    by_group[cohort.records[i].attribute(attribute)].add(predictions[i].predicted_label == 1,
                                                         labels[i] == 1);
  }
  std::vector<GroupMetrics> out;
  for (const auto& [group, m] : by_group) out.push_back(metrics_from(attribute, group, m));
  return out;
}

inline std::vector<GroupMetrics> group_metrics(std::span<const Prediction> predictions,
                                               std::span<const std::uint8_t> labels,
                                               const Cohort& cohort, std::string_view attribute,
                                               std::span<const std::size_t> over) {
  return group_metrics(predictions, labels, cohort, parse_attribute(attribute), over);
}

struct LabelGroup {
  std::string group;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double positive_share = 0.0;  // positives / group size
};

inline std::vector<LabelGroup> label_distribution(std::span<const std::uint8_t> labels,
                                                  const Cohort& cohort, Attribute attribute) {
  std::map<std::string, LabelGroup> by_group;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto& g = by_group[cohort.records[i].attribute(attribute)];
    if (i >= labels.size()) throw Error(ErrorCode::cohort_mismatch, "label vector shorter than cohort");
    ++(labels[i] ? g.positives : g.negatives);
  }
  std::vector<LabelGroup> out;
  for (auto& [name, g] : by_group) {
    g.group = name;
    g.positive_share = static_cast<double>(g.positives) / static_cast<double>(g.positives + g.negatives);
    out.push_back(g);
  }
  return out;
}

struct ScoreSummary {
  std::string group;
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear interpolation between order statistics at position p * (n - 1);
// for p = 0.5 this is the midpoint rule on even counts.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline ScoreSummary summarize(std::string group, std::vector<double> values) {
  ScoreSummary s;
  s.group = std::move(group);
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  return s;
}

struct ScoreDistributionSummary {
  Attribute attribute = Attribute::gender;
  std::vector<ScoreSummary> groups;       // non-empty groups, ordered by value
  std::vector<std::string> empty_groups;  // requested groups with no members
};

inline ScoreDistributionSummary score_distribution(std::span<const ScoredCandidate> scored,
                                                   const Cohort& cohort, Attribute attribute,
                                                   std::span<const std::string> expected_groups = {}) {
  if (scored.size() != cohort.size())
    throw Error(ErrorCode::cohort_mismatch, "scores and cohort sizes differ");
  std::map<std::string, std::vector<double>> by_group;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    by_group[cohort.records[i].attribute(attribute)].push_back(scored[i].composite_score);
  ScoreDistributionSummary out;
  out.attribute = attribute;
  for (const auto& g : expected_groups)
    if (!by_group.count(g)) out.empty_groups.push_back(g);
  for (auto& [name, values] : by_group) out.groups.push_back(summarize(name, std::move(values)));
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

// Everything one target-variable pipeline produced.
struct ModelBundle {
  WeightVector weights;
  LabeledDataset dataset;
  DataSplit split;
  LinearModel model;
  std::vector<Prediction> predictions;
};

struct ModelReport {
  // Held-out basis: each model's test split against its own labels.
  ConfusionMatrix held_out_confusion;
  Rate accuracy;
  GroupMetrics held_out_overall;
  std::array<std::vector<GroupMetrics>, kAttributeCount> held_out_groups;
  // Population basis: every candidate against the training labels.
  GroupMetrics population_overall;
  std::array<std::vector<GroupMetrics>, kAttributeCount> population_groups;
  std::array<std::vector<LabelGroup>, kAttributeCount> label_distribution;
  ScoreSummary score_overall;
  std::array<ScoreDistributionSummary, kAttributeCount> score_distribution;
  std::vector<Prediction> predictions;
};

struct GroupDelta {
  std::string group;
  Rate selection_rate;  // population basis
  Rate tpr, fpr, ppv, npv;  // held-out basis
  Rate label_positive_share;
  Rate score_median;
};

struct RankDelta {
  std::string candidate_id;
  std::size_t rank_a = 0;
  std::size_t rank_b = 0;
  long long rank_delta = 0;  // rank_b - rank_a
  double score_a = 0.0;
  double score_b = 0.0;
  std::uint8_t selected_a = 0;
  std::uint8_t selected_b = 0;
};

struct ComparisonDeltas {
  Rate accuracy;
  Rate selection_rate;
  Rate tpr, fpr, ppv, npv;
  std::array<std::vector<GroupDelta>, kAttributeCount> groups;
};

struct ComparisonReport {
  ModelReport a;
  ModelReport b;
  ComparisonDeltas deltas;  // B - A
  std::vector<RankDelta> rank_table;  // cohort order
};

// B - A. Two undefined values compare as unchanged (0); exactly one
// undefined side leaves the delta undefined.
inline Rate delta(const Rate& a, const Rate& b) {
  if (a && b) return *b - *a;
  if (!a && !b) return 0.0;
  return std::nullopt;
}

inline ModelReport build_model_report(const Cohort& cohort, const ModelBundle& m) {
  if (m.predictions.size() != cohort.size() || m.dataset.labels.size() != cohort.size())
    throw Error(ErrorCode::cohort_mismatch, "model results were computed over a different cohort");
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (m.predictions[i].candidate_id != cohort.records[i].candidate_id)
      throw Error(ErrorCode::cohort_mismatch, "prediction order differs from cohort",
                  cohort.records[i].candidate_id);

  ModelReport r;
  const auto& labels = m.dataset.labels;
  std::vector<std::size_t> all(cohort.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  r.held_out_confusion = confusion(m.predictions, labels, m.split.test);
  r.accuracy = r.held_out_confusion.accuracy();
  r.held_out_overall = metrics_from(Attribute::gender, "all", r.held_out_confusion);
  r.population_overall = metrics_from(Attribute::gender, "all", confusion(m.predictions, labels, all));
  std::vector<double> scores;
  scores.reserve(cohort.size());
  for (const auto& s : m.dataset.scored) scores.push_back(s.composite_score);
  r.score_overall = summarize("all", std::move(scores));

  for (Attribute a : kAllAttributes) {
    const auto k = index_of(a);
    r.held_out_groups[k] = group_metrics(m.predictions, labels, cohort, a, m.split.test);
    r.population_groups[k] = group_metrics(m.predictions, labels, cohort, a, all);
    r.label_distribution[k] = label_distribution(labels, cohort, a);
    r.score_distribution[k] = score_distribution(m.dataset.scored, cohort, a);
  }
  r.predictions = m.predictions;
  return r;
}

inline ComparisonReport compare(const Cohort& cohort, const ModelBundle& bundle_a,
                                const ModelBundle& bundle_b) {
  ComparisonReport rep;
  rep.a = build_model_report(cohort, bundle_a);
  rep.b = build_model_report(cohort, bundle_b);

  auto& d = rep.deltas;
  d.accuracy = delta(rep.a.accuracy, rep.b.accuracy);
  d.selection_rate = rep.b.population_overall.selection_rate - rep.a.population_overall.selection_rate;
  d.tpr = delta(rep.a.held_out_overall.tpr, rep.b.held_out_overall.tpr);
  d.fpr = delta(rep.a.held_out_overall.fpr, rep.b.held_out_overall.fpr);
  d.ppv = delta(rep.a.held_out_overall.ppv, rep.b.held_out_overall.ppv);
  d.npv = delta(rep.a.held_out_overall.npv, rep.b.held_out_overall.npv);

  for (Attribute attr : kAllAttributes) {
    const auto k = index_of(attr);
    // Population groups cover every group in the cohort, in the same order
    // for both models.
    for (std::size_t g = 0; g < rep.a.population_groups[k].size(); ++g) {
      const auto& pa = rep.a.population_groups[k][g];
      const auto& pb = rep.b.population_groups[k][g];
      GroupDelta gd;
      gd.group = pa.group;
      gd.selection_rate = pb.selection_rate - pa.selection_rate;

      auto held = [&](const ModelReport& r) -> const GroupMetrics* {
        for (const auto& h : r.held_out_groups[k])
          if (h.group == pa.group) return &h;
        return nullptr;
      };
      const GroupMetrics* ha = held(rep.a);
      const GroupMetrics* hb = held(rep.b);
      auto rate = [](const GroupMetrics* h, Rate GroupMetrics::*field) -> Rate {
        return h ? h->*field : Rate{};
      };
      gd.tpr = delta(rate(ha, &GroupMetrics::tpr), rate(hb, &GroupMetrics::tpr));
      gd.fpr = delta(rate(ha, &GroupMetrics::fpr), rate(hb, &GroupMetrics::fpr));
      gd.ppv = delta(rate(ha, &GroupMetrics::ppv), rate(hb, &GroupMetrics::ppv));
      gd.npv = delta(rate(ha, &GroupMetrics::npv), rate(hb, &GroupMetrics::npv));
      gd.label_positive_share = rep.b.label_distribution[k][g].positive_share -
                                rep.a.label_distribution[k][g].positive_share;
      gd.score_median = rep.b.score_distribution[k].groups[g].median -
                        rep.a.score_distribution[k].groups[g].median;
      d.groups[k].push_back(std::move(gd));
    }
  }

  rep.rank_table.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& pa = rep.a.predictions[i];
    const auto& pb = rep.b.predictions[i];
    RankDelta row;
    row.candidate_id = pa.candidate_id;
    row.rank_a = pa.rank;
    row.rank_b = pb.rank;
    row.rank_delta = static_cast<long long>(pb.rank) - static_cast<long long>(pa.rank);
    row.score_a = pa.decision_score;
    row.score_b = pb.decision_score;
    row.selected_a = pa.predicted_label;
    row.selected_b = pb.predicted_label;
    rep.rank_table.push_back(std::move(row));
  }
  return rep;
}

}  // namespace fts
