#include "fts/engine.hpp"
#include "fts/report.hpp"

#include <gtest/gtest.h>

#include <mutex>

namespace fts {
namespace {

CohortPtr shared_cohort() {
  static const CohortPtr c =
      std::make_shared<const Cohort>(generate_synthetic_cohort(default_synthetic_spec(2000), 7));
  return c;
}

SessionConfig config(WeightVector a, WeightVector b, std::uint64_t seed = 42) {
  SessionConfig s;
  s.cohort = shared_cohort();
  s.weights_a = a;
  s.weights_b = b;
  s.master_seed = seed;
  return s;
}

TEST(Seeds, DerivedFromMasterSeed) {
  const auto s = DerivedSeeds::from(42);
  EXPECT_EQ(s.label_a, derive_seed(42, "label"));
  EXPECT_EQ(s.label_a, s.label_b);
  EXPECT_EQ(s.split, derive_seed(42, "split"));
  EXPECT_NE(s.label_a, s.split);
  EXPECT_NE(DerivedSeeds::from(43).split, s.split);
}

TEST(Simulation, IdenticalWeightsGiveZeroDeltas) {
  const WeightVector w{{1, 2, 3, 4, 5}};
  const auto r = run_simulation(config(w, w));
  const auto& d = r.report.deltas;
  for (const Rate* v : {&d.accuracy, &d.selection_rate, &d.tpr, &d.fpr, &d.ppv, &d.npv}) EXPECT_EQ(**v, 0.0);
  for (const auto& groups : d.groups)
    for (const auto& g : groups) EXPECT_EQ(*g.selection_rate, 0.0);
  EXPECT_EQ(r.a.predictions.size(), 2000u);
  EXPECT_EQ(r.a.model.feature_weights, r.b.model.feature_weights);
}

TEST(Simulation, DeterministicDocument) {
  const auto cfg = config(WeightVector{{0, 0, 1, 0, 0}}, WeightVector{{0, 0, 0, 1, 0}}, 11);
  const std::string first = serialize_result(run_simulation(cfg));
  const std::string second = serialize_result(run_simulation(cfg));
  EXPECT_EQ(first, second);
  EXPECT_EQ(first, serialize_result(run_simulation(cfg, Execution::concurrent)));
  EXPECT_NE(first, serialize_result(run_simulation(config(cfg.weights_a, cfg.weights_b, 12))));
}

TEST(Simulation, ProgressReportsStages) {
  std::mutex mu;
  std::vector<std::string> stages;
  run_simulation(config(WeightVector{{1, 0, 0, 0, 0}}, WeightVector{{0, 1, 0, 0, 0}}), Execution::concurrent,
                 [&](std::string_view s) {
                   std::lock_guard lock(mu);
                   stages.emplace_back(s);
                 });
  auto has = [&](const std::string& s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };
  for (const char* tag : {"A", "B"})
    for (const char* stage : {"scoring", "labeling", "splitting", "training", "predicting"})
      EXPECT_TRUE(has(std::string("model ") + tag + ": " + stage)) << tag << " " << stage;
  EXPECT_EQ(stages.back(), "comparing");
}

TEST(Simulation, ErrorsCarryStageContext) {
  // A pool spanning the whole cohort, all of it labeled positive.
  auto cfg = config(WeightVector{{1, 0, 0, 0, 0}}, WeightVector{{0, 1, 0, 0, 0}});
  cfg.policy.percentile_cut = 0.0001;
  cfg.policy.positive_count = 2000;
  try {
    run_simulation(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::single_class_dataset);
    EXPECT_NE(std::string(e.what()).find("model A: splitting"), std::string::npos) << e.what();
  }

  auto bad = config(WeightVector{{1, 0, 0, 0, 0}}, WeightVector{{0, 0, 0, 0, 0}});
  try {
    run_simulation(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_weights);
    EXPECT_NE(std::string(e.what()).find("weights_b"), std::string::npos) << e.what();
  }
  SessionConfig none;
  EXPECT_THROW(run_simulation(none), Error);
}

TEST(Simulation, NonConvergenceIsAWarning) {
  auto cfg = config(WeightVector{{1, 0, 0, 0, 0}}, WeightVector{{0, 1, 0, 0, 0}});
  cfg.train.max_iterations = 2;
  const auto r = run_simulation(cfg);
  ASSERT_EQ(r.warnings.size(), 2u);
  EXPECT_EQ(r.warnings[0].rfind("NonConvergence: model A", 0), 0u);
  EXPECT_EQ(r.warnings[1].rfind("NonConvergence: model B", 0), 0u);
}

TEST(Simulation, DefaultRunIsFast) {
  const auto r = run_simulation(config(WeightVector{{1, 1, 1, 1, 1}}, WeightVector{{0, 0, 1, 0, 0}}));
  EXPECT_LT(r.elapsed_ms, 60000.0);
  EXPECT_TRUE(r.a.model.converged);
  EXPECT_TRUE(r.b.model.converged);
  EXPECT_TRUE(r.warnings.empty());
}

}  // namespace
}  // namespace fts
