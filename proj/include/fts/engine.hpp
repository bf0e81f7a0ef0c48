#pragma once

// End-to-end session: one cohort, two weight vectors, one master seed.
//
// Sub-seeds come from derive_seed(master_seed, tag): tag "label" seeds the
// positive sampling and tag "split" the train/test split. Both pipelines use
// the same two seeds, so A and B differ only through their weight vectors.

#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <future>
#include <string>
#include <string_view>
#include <vector>

#include "fts/cohort.hpp"
#include "fts/error.hpp"
#include "fts/metrics.hpp"
#include "fts/rng.hpp"
#include "fts/svm.hpp"
#include "fts/target.hpp"

namespace fts {

struct DerivedSeeds {
  std::uint64_t label_a = 0;
  std::uint64_t label_b = 0;
  std::uint64_t split = 0;

  static DerivedSeeds from(std::uint64_t master) {
    const std::uint64_t label = derive_seed(master, "label");
    return {label, label, derive_seed(master, "split")};
  }
};

struct SessionConfig {
  CohortPtr cohort;
  WeightVector weights_a;
  WeightVector weights_b;
  LabelingPolicy policy;
  TrainConfig train;  // split_seed is replaced by the derived split seed
  std::uint64_t master_seed = 0;

  void validate() const {
    if (!cohort) throw Error(ErrorCode::invalid_config, "session has no cohort");
    try {
      weights_a.validate();
    } catch (const Error& e) {
      throw e.with_context("weights_a");
    }
    try {
      weights_b.validate();
    } catch (const Error& e) {
      throw e.with_context("weights_b");
    }
    policy.validate();
    train.validate();
  }
};

enum class Execution { sequential, concurrent };

struct SimulationResult {
  SessionConfig config;
  DerivedSeeds seeds;
  ModelBundle a;
  ModelBundle b;
  ComparisonReport report;
  std::vector<std::string> warnings;
  double elapsed_ms = 0.0;  // wall time; kept out of the serialized document
};

// Called with "model A: labeling" and similar as each stage starts. Must be
// safe to call from two threads under concurrent execution.
using ProgressFn = std::function<void(std::string_view)>;

inline ModelBundle run_pipeline(const Cohort& cohort, const WeightVector& weights,
                                const LabelingPolicy& policy, TrainConfig train_config,
                                std::uint64_t label_seed, std::uint64_t split_seed,
                                std::string_view tag, const ProgressFn& progress = {}) {
  const std::string prefix = "model " + std::string(tag) + ": ";
  std::string stage;
  auto enter = [&](const char* name) {
    stage = prefix + name;
    if (progress) progress(stage);
  };
  try {
    ModelBundle m;
    m.weights = weights;
    enter("scoring");
    auto scored = composite_scores(cohort, weights);
    enter("labeling");
    m.dataset = assign_labels(std::move(scored), policy, label_seed);
    enter("splitting");
    train_config.split_seed = split_seed;
    m.split = stratified_split(m.dataset, train_config);
    enter("training");
    m.model = train(m.dataset, cohort, train_config, m.split);
    enter("predicting");
    m.predictions = predict_all(m.model, cohort);
    return m;
  } catch (const Error& e) {
    throw e.with_context(stage);
  }
}

inline SimulationResult run_simulation(const SessionConfig& config,
                                       Execution execution = Execution::sequential,
                                       const ProgressFn& progress = {}) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const Cohort& cohort = *config.cohort;

  SimulationResult result;
  result.config = config;
  result.seeds = DerivedSeeds::from(config.master_seed);
  result.config.train.split_seed = result.seeds.split;
  const auto& s = result.seeds;

  auto run_a = [&] {
    return run_pipeline(cohort, config.weights_a, config.policy, config.train, s.label_a, s.split,
                        "A", progress);
  };
  auto run_b = [&] {
    return run_pipeline(cohort, config.weights_b, config.policy, config.train, s.label_b, s.split,
                        "B", progress);
  };

  if (execution == Execution::concurrent) {
    auto future_b = std::async(std::launch::async, run_b);
    std::exception_ptr error_a;
    try {
      result.a = run_a();
    } catch (...) {
      error_a = std::current_exception();
    }
    result.b = future_b.get();  // rethrows B's error after A has finished
    if (error_a) std::rethrow_exception(error_a);
  } else {
    result.a = run_a();
    result.b = run_b();
  }

  if (progress) progress("comparing");
  try {
    result.report = compare(cohort, result.a, result.b);
  } catch (const Error& e) {
    throw e.with_context("comparing");
  }
  for (const auto* m : {&result.a, &result.b}) {
    if (!m->model.converged)
      result.warnings.push_back(std::string("NonConvergence: model ") + (m == &result.a ? "A" : "B") +
                                " stopped after " + std::to_string(m->model.iterations) +
                                " iterations with objective " + std::to_string(m->model.objective));
  }
  for (const auto& t : cohort.degenerate_tests)
    result.warnings.push_back("DegenerateTest: " + t + " has zero range; normalized to 0.5");
  result.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace fts
