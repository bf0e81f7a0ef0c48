#pragma once

// Soft-margin linear SVM over the five trait scores.
//
// The primal problem
//     min_{w,b} 1/2 |w|^2 + sum_i C_i * max(0, 1 - y_i (w.x_i + b))
// is solved through its dual with sequential minimal optimization using
// second-order working-set selection. The kernel is linear, so w is kept
// explicitly and every gradient is a d-dimensional dot product. Working-set
// choice scans indices in a fixed order and breaks ties toward the later
// index, which makes training bit-reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fts/cohort.hpp"
#include "fts/error.hpp"
#include "fts/rng.hpp"
#include "fts/schema.hpp"
#include "fts/target.hpp"

namespace fts {

struct TrainConfig {
  double c = 1.0;
  bool class_balance = true;  // C_i = C * n / (2 * n_class(i))
  double tolerance = 1e-6;    // maximal KKT violation at termination
  std::size_t max_iterations = 10000;
  double split_fraction = 0.8;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::invalid_config, "C must be > 0");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
      throw Error(ErrorCode::invalid_config, "split_fraction must lie strictly between 0 and 1");
    if (!(tolerance > 0.0)) throw Error(ErrorCode::invalid_config, "tolerance must be > 0");
    if (max_iterations < 1) throw Error(ErrorCode::invalid_config, "max_iterations must be >= 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Dense binary problem: row-major features, labels in {-1,+1} and a
// per-sample box bound C_i.
struct SvmProblem {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<double> box;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

  void add(std::span<const double> x, int y, double c) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(y);
    box.push_back(c);
  }
};

struct SvmSolution {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double primal_objective = 0.0;
  double dual_objective = 0.0;           // 1/2 a'Qa - sum a (minimization form)
  std::vector<double> objective_trace;   // dual objective after each update
  std::vector<double> alpha;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double primal_objective(const SvmProblem& p, std::span<const double> w, double b) {
  double obj = 0.5 * dot(w, w);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double margin = p.labels[i] * (dot(w, p.row(i)) + b);
    if (margin < 1.0) obj += p.box[i] * (1.0 - margin);
  }
  return obj;
}

inline SvmSolution solve_svm(const SvmProblem& p, double tolerance, std::size_t max_iterations) {
  constexpr double kTau = 1e-12;
  const std::size_t n = p.size();
  const std::size_t d = p.dim;
  SvmSolution sol;
  sol.weights.assign(d, 0.0);
  sol.alpha.assign(n, 0.0);
  auto& alpha = sol.alpha;
  auto& w = sol.weights;
  const auto& y = p.labels;
  const auto& box = p.box;

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = dot(p.row(i), p.row(i));
  std::vector<double> grad(n, -1.0);  // Qa - e

  auto at_upper = [&](std::size_t t) { return alpha[t] >= box[t]; };
  auto at_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  double alpha_sum = 0.0;

  while (sol.iterations < max_iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!at_upper(t) && -grad[t] >= gmax) { gmax = -grad[t]; i = static_cast<std::ptrdiff_t>(t); }
      } else {
        if (!at_lower(t) && grad[t] >= gmax) { gmax = grad[t]; i = static_cast<std::ptrdiff_t>(t); }
      }
    }
    if (i < 0) {
      sol.converged = true;
      break;
    }
    const auto xi = p.row(static_cast<std::size_t>(i));
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double kit = dot(xi, p.row(t));
      if (y[t] == 1) {
        if (!at_lower(t)) {
          const double diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (diff > 0.0) {
            const double quad = diag[static_cast<std::size_t>(i)] + diag[t] - 2.0 * kit;
            const double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= best) { best = obj; j = static_cast<std::ptrdiff_t>(t); }
          }
        }
      } else {
        if (!at_upper(t)) {
          const double diff = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
          if (diff > 0.0) {
            const double quad = diag[static_cast<std::size_t>(i)] + diag[t] - 2.0 * kit;
            const double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= best) { best = obj; j = static_cast<std::ptrdiff_t>(t); }
          }
        }
      }
    }
    if (gmax + gmax2 < tolerance || j < 0) {
      sol.converged = true;
      break;
    }

    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    const double kij = dot(xi, p.row(uj));
    const double qij = y[ui] * y[uj] * kij;
    const double ci = box[ui];
    const double cj = box[uj];
    const double old_i = alpha[ui];
    const double old_j = alpha[uj];

    if (y[ui] != y[uj]) {
      double quad = diag[ui] + diag[uj] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[ui] - grad[uj]) / quad;
      const double diff = alpha[ui] - alpha[uj];
      alpha[ui] += delta;
      alpha[uj] += delta;
      if (diff > 0.0) {
        if (alpha[uj] < 0.0) { alpha[uj] = 0.0; alpha[ui] = diff; }
      } else {
        if (alpha[ui] < 0.0) { alpha[ui] = 0.0; alpha[uj] = -diff; }
      }
      if (diff > ci - cj) {
        if (alpha[ui] > ci) { alpha[ui] = ci; alpha[uj] = ci - diff; }
      } else {
        if (alpha[uj] > cj) { alpha[uj] = cj; alpha[ui] = cj + diff; }
      }
    } else {
      double quad = diag[ui] + diag[uj] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[ui] - grad[uj]) / quad;
      const double sum = alpha[ui] + alpha[uj];
      alpha[ui] -= delta;
      alpha[uj] += delta;
      if (sum > ci) {
        if (alpha[ui] > ci) { alpha[ui] = ci; alpha[uj] = sum - ci; }
      } else {
        if (alpha[uj] < 0.0) { alpha[uj] = 0.0; alpha[ui] = sum; }
      }
      if (sum > cj) {
        if (alpha[uj] > cj) { alpha[uj] = cj; alpha[ui] = sum - cj; }
      } else {
        if (alpha[ui] < 0.0) { alpha[ui] = 0.0; alpha[uj] = sum; }
      }
    }

    const double di = (alpha[ui] - old_i) * y[ui];
    const double dj = (alpha[uj] - old_j) * y[uj];
    const auto xj = p.row(uj);
    for (std::size_t k = 0; k < d; ++k) w[k] += di * xi[k] + dj * xj[k];
    alpha_sum += (alpha[ui] - old_i) + (alpha[uj] - old_j);
    for (std::size_t t = 0; t < n; ++t) grad[t] = y[t] * dot(w, p.row(t)) - 1.0;

    ++sol.iterations;
    sol.objective_trace.push_back(0.5 * dot(w, w) - alpha_sum);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (at_upper(t)) {
      if (y[t] == -1) upper = std::min(upper, yg); else lower = std::max(lower, yg);
    } else if (at_lower(t)) {
      if (y[t] == 1) upper = std::min(upper, yg); else lower = std::max(lower, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  double rho = 0.0;
  if (free_count > 0) {
    rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(upper) && std::isfinite(lower)) {
    rho = 0.5 * (upper + lower);
  } else if (std::isfinite(upper)) {
    rho = upper;
  } else if (std::isfinite(lower)) {
    rho = lower;
  }
  sol.bias = -rho;
  sol.dual_objective = 0.5 * dot(w, w) - alpha_sum;
  sol.primal_objective = primal_objective(p, w, sol.bias);
  return sol;
}

// ---------------------------------------------------------------------------

struct DataSplit {
  std::vector<std::size_t> train;  // indices into cohort order, ascending
  std::vector<std::size_t> test;
};

struct LinearModel {
  std::array<double, kTraitCount> feature_weights{};  // canonical trait order
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;       // primal objective on the training split
  double dual_objective = 0.0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<double> objective_trace;  // not serialized

  double decision(const TraitProfile& p) const {
    double s = bias;
    for (std::size_t k = 0; k < kTraitCount; ++k) s += feature_weights[k] * p.traits[k];
    return s;
  }
};

struct Prediction {
  std::string candidate_id;
  double decision_score = 0.0;
  std::uint8_t predicted_label = 0;
  std::size_t rank = 0;
};

// Shuffles each class with the split seed (positives first, then negatives)
// and sends round(split_fraction * class size) of it to training, at least
// one per class.
inline DataSplit stratified_split(const LabeledDataset& ds, const TrainConfig& config) {
  config.validate();
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) (ds.labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw Error(ErrorCode::single_class_dataset,
                pos.empty() ? "dataset has no positive labels" : "dataset has no negative labels");
  Xoshiro256 rng(config.split_seed);
  DataSplit split;
  for (auto* cls : {&pos, &neg}) {
    rng.shuffle(cls->begin(), cls->end());
    auto take = static_cast<std::size_t>(std::floor(config.split_fraction * static_cast<double>(cls->size()) + 0.5));
    take = std::clamp<std::size_t>(take, 1, cls->size());
    split.train.insert(split.train.end(), cls->begin(), cls->begin() + static_cast<std::ptrdiff_t>(take));
    split.test.insert(split.test.end(), cls->begin() + static_cast<std::ptrdiff_t>(take), cls->end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline void check_alignment(const LabeledDataset& ds, const Cohort& cohort) {
  if (ds.scored.size() != cohort.size() || ds.labels.size() != cohort.size())
    throw Error(ErrorCode::cohort_mismatch, "dataset and cohort sizes differ");
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (ds.scored[i].candidate_id != cohort.records[i].candidate_id)
      throw Error(ErrorCode::cohort_mismatch,
                  "dataset and cohort disagree at " + cohort.records[i].candidate_id,
                  cohort.records[i].candidate_id);
}

inline LinearModel train(const LabeledDataset& ds, const Cohort& cohort, const TrainConfig& config,
                         const DataSplit& split) {
  config.validate();
  check_alignment(ds, cohort);
  std::size_t n_pos = 0;
  for (std::size_t i : split.train) n_pos += ds.labels[i];
  const std::size_t n_neg = split.train.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorCode::single_class_dataset, "training split lacks one class");

  const double n = static_cast<double>(split.train.size());
  const double c_pos = config.class_balance ? config.c * n / (2.0 * static_cast<double>(n_pos)) : config.c;
  const double c_neg = config.class_balance ? config.c * n / (2.0 * static_cast<double>(n_neg)) : config.c;

  SvmProblem problem;
  problem.dim = kTraitCount;
  for (std::size_t i : split.train) {
    const bool positive = ds.labels[i] == 1;
    problem.add(cohort.profiles[i].traits, positive ? 1 : -1, positive ? c_pos : c_neg);
  }
  SvmSolution sol = solve_svm(problem, config.tolerance, config.max_iterations);

  LinearModel m;
  std::copy(sol.weights.begin(), sol.weights.end(), m.feature_weights.begin());
  m.bias = sol.bias;
  m.iterations = sol.iterations;
  m.converged = sol.converged;
  m.objective = sol.primal_objective;
  m.dual_objective = sol.dual_objective;
  m.objective_trace = std::move(sol.objective_trace);
  for (std::size_t i : split.train) m.train_ids.push_back(cohort.records[i].candidate_id);
  for (std::size_t i : split.test) m.test_ids.push_back(cohort.records[i].candidate_id);
  return m;
}

inline LinearModel train(const LabeledDataset& ds, const Cohort& cohort, const TrainConfig& config) {
  return train(ds, cohort, config, stratified_split(ds, config));
}

// Predictions in cohort order. Label 1 requires a strictly positive score;
// ranks descend by score with ties broken by ascending id.
inline std::vector<Prediction> predict_all(const LinearModel& model, const Cohort& cohort) {
  for (double v : model.feature_weights)
    if (!std::isfinite(v)) throw Error(ErrorCode::domain_error, "model weights are not finite");
  if (!std::isfinite(model.bias)) throw Error(ErrorCode::domain_error, "model bias is not finite");

  std::vector<Prediction> out(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out[i].candidate_id = cohort.records[i].candidate_id;
    out[i].decision_score = model.decision(cohort.profiles[i]);
    out[i].predicted_label = out[i].decision_score > 0.0 ? 1 : 0;
  }
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out[a].decision_score != out[b].decision_score)
      return out[a].decision_score > out[b].decision_score;
    return out[a].candidate_id < out[b].candidate_id;
  });
  for (std::size_t r = 0; r < order.size(); ++r) out[order[r]].rank = r + 1;
  return out;
}

}  // namespace fts
