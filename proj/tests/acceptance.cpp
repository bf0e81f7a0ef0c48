// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances and runtime bounds are fixed here.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fts/engine.hpp"
#include "fts/metrics.hpp"
#include "fts/report.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fts;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const Cohort& cohort2000() {
  static const Cohort c = generate_synthetic_cohort(default_synthetic_spec(2000), 7);
  return c;
}

// --------------------------------------------------------------------------

Check sampling_formula() {
  Check ck;
  for (std::size_t n : {2u, 100u, 150u, 10000u}) {
    ck.require(std::abs(sampling_weight(1, n) - 0.99) <= 1e-12, fmt("f(1) off for n=%.0f", n));
    ck.require(std::abs(sampling_weight(n, n) - 0.01) <= 1e-12, fmt("f(n) off for n=%.0f", n));
    for (std::size_t x = 1; x < n; ++x)
      ck.require(sampling_weight(x, n) > sampling_weight(x + 1, n), fmt("not decreasing at x=%.0f n=%.0f", x, n));
  }
  const double oracle = 0.98 / (1.0 - 100.0) * 50.0 + (0.01 - 0.99 * 100.0) / (1.0 - 100.0);
  const double got = sampling_weight(50, 100);
  ck.require(std::abs(got - 0.5049494949) <= 1e-9 && std::abs(got - oracle) <= 1e-9,
             fmt("f(50,100)=%.12f oracle %.12f", got, oracle));
  if (ck.ok) ck.detail = fmt("f(50,100)=%.10f", got);
  return ck;
}

Check labeling_counts() {
  Check ck;
  const Cohort& c = cohort2000();
  Xoshiro256 rng(2025);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    WeightVector w;
    for (double& v : w.weights) v = rng.uniform() * 10.0;
    const auto ds = assign_labels(composite_scores(c, w), LabelingPolicy{}, rng.next());
    const std::set<std::string> top(ds.top_subset_ids.begin(), ds.top_subset_ids.end());
    bool ok = ds.top_subset_ids.size() == 300 && top.size() == 300 && ds.positives() == 100;
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      if (ds.labels[i] && !top.count(ds.scored[i].candidate_id)) ok = false;
    // Independent recount of the top subset from the scores.
    std::vector<std::pair<double, std::string>> order;
    for (const auto& s : ds.scored) order.emplace_back(-s.composite_score, s.candidate_id);
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < 300; ++r)
      if (!top.count(order[r].second)) ok = false;
    violations += !ok;
  }
  ck.require(violations == 0, fmt("%.0f of 100 seeds violated", violations));
  if (ck.ok) ck.detail = "100 seeds, 300 in top subset, 100 positives, 0 violations";
  return ck;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Check determinism() {
  Check ck;
  const fs::path dir = fs::temp_directory_path() / ("fts_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = FTS_CLI_PATH;
  auto sh = [](const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string cohort = (dir / "cohort.csv").string();
  ck.require(sh("FTS_LOG_LEVEL=error '" + cli + "' generate --seed 7 --out '" + cohort + "'") == 0,
             "generate failed");
  std::string docs[3];
  for (int k = 0; k < 3; ++k) {
    const std::string out = (dir / ("r" + std::to_string(k) + ".json")).string();
    std::string cmd = "FTS_LOG_LEVEL=error '" + cli + "' run --cohort '" + cohort +
                      "' --weights-a 2,1,5,0,3 --weights-b 0,4,1,6,1 --seed 20240607 --out '" + out + "'";
    if (k == 2) cmd += " --concurrent";
    ck.require(sh(cmd + " >/dev/null") == 0, "run failed");
    docs[k] = slurp(out);
  }
  ck.require(!docs[0].empty() && docs[0] == docs[1], "two sequential CLI runs differ");
  ck.require(docs[0] == docs[2], "concurrent CLI run differs from sequential");

  SessionConfig cfg;
  cfg.cohort = std::make_shared<const Cohort>(cohort2000());
  cfg.weights_a = WeightVector{{2, 1, 5, 0, 3}};
  cfg.weights_b = WeightVector{{0, 4, 1, 6, 1}};
  cfg.master_seed = 20240607;
  const std::string seq = serialize_result(run_simulation(cfg, Execution::sequential));
  const std::string con = serialize_result(run_simulation(cfg, Execution::concurrent));
  ck.require(seq == con, "in-process sequential and concurrent documents differ");
  ck.require(seq == docs[0], "in-process document differs from CLI document");
  fs::remove_all(dir);
  if (ck.ok) ck.detail = fmt("3 CLI runs + 2 in-process runs byte-identical (%.0f bytes)", docs[0].size());
  return ck;
}

Check svm_oracle() {
  Check ck;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Xoshiro256 rng(seed);
    std::vector<oracle::Point2> pts;
    SvmProblem p;
    p.dim = 2;
    for (int i = 0; i < 20; ++i) {
      const int y = i % 2 ? 1 : -1;
      pts.push_back({0.6 * y + rng.gaussian(), 0.3 * y + rng.gaussian(), y, 1.0});
      p.add(std::array<double, 2>{pts.back().x1, pts.back().x2}, y, 1.0);
    }
    const auto sol = solve_svm(p, 1e-6, 100000);
    const double reference = oracle::brute_force_objective(pts);
    const double rel = std::abs(sol.primal_objective - reference) / std::abs(reference);
    worst = std::max(worst, rel);
    ck.require(sol.converged, fmt("seed %.0f did not converge", seed));
    ck.require(rel <= 1e-3, fmt("seed %.0f: objective %.9f vs oracle %.9f", seed, sol.primal_objective, reference));
  }

  const std::vector<double> xs = {-3.0, -2.2, -1.5, -0.9, 0.4, 1.1, 1.7, 2.6};
  const std::vector<int> ys = {-1, -1, -1, -1, 1, 1, 1, 1};
  SvmProblem toy;
  toy.dim = 1;
  for (std::size_t i = 0; i < xs.size(); ++i) toy.add(std::array<double, 1>{xs[i]}, ys[i], 10.0);
  TrainConfig defaults;
  const auto sol = solve_svm(toy, defaults.tolerance, defaults.max_iterations);
  int correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) correct += ((sol.weights[0] * xs[i] + sol.bias > 0) ? 1 : -1) == ys[i];
  const double acc = static_cast<double>(correct) / xs.size();
  ck.require(acc == 1.0 && acc == oracle::best_threshold_accuracy(xs, ys), fmt("1-D toy accuracy %.3f", acc));
  if (ck.ok) ck.detail = fmt("worst relative objective gap %.2e over 6 instances; 1-D toy accuracy %.1f", worst, acc);
  return ck;
}

Check metric_counting() {
  Check ck;
  Xoshiro256 rng(31337);
  const std::vector<std::string> names = {"g1", "g2", "g3", "g4"};
  for (int trial = 0; trial < 20; ++trial) {
    constexpr std::size_t n = 500;
    Cohort c;
    std::vector<std::string> groups(n);
    std::vector<int> pred(n), truth(n);
    std::vector<Prediction> preds(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "q%04zu", i);
      groups[i] = names[rng.below(4)];
      pred[i] = static_cast<int>(rng.below(2));
      truth[i] = static_cast<int>(rng.below(2));
      CandidateRecord r;
      r.candidate_id = id;
      r.demographics = {groups[i], "-", "-", "-"};
      c.records.push_back(r);
      c.profiles.push_back({id, {}});
      preds[i].candidate_id = id;
      preds[i].predicted_label = static_cast<std::uint8_t>(pred[i]);
      labels[i] = static_cast<std::uint8_t>(truth[i]);
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto expected = oracle::naive_group_counts(groups, pred, truth, all);
    const auto got = group_metrics(preds, labels, c, Attribute::gender, all);
    ck.require(got.size() == expected.size(), "group count differs");
    ConfusionMatrix sum;
    auto close = [](const Rate& r, long num, long den) {
      if (den == 0) return !r.has_value();
      return r.has_value() && std::abs(*r - static_cast<double>(num) / static_cast<double>(den)) <= 1e-12;
    };
    for (const auto& g : got) {
      const auto& e = expected.at(g.group);
      const auto& m = g.confusion;
      ck.require(static_cast<long>(m.tp) == e.tp && static_cast<long>(m.fp) == e.fp &&
                     static_cast<long>(m.fn) == e.fn && static_cast<long>(m.tn) == e.tn,
                 "confusion counts differ for " + g.group);
      ck.require(close(g.tpr, e.tp, e.tp + e.fn) && close(g.fpr, e.fp, e.fp + e.tn) &&
                     close(g.ppv, e.tp, e.tp + e.fp) && close(g.npv, e.tn, e.tn + e.fn),
                 "rates differ for " + g.group);
      const long total = e.tp + e.fp + e.fn + e.tn;
      ck.require(std::abs(g.selection_rate - static_cast<double>(e.tp + e.fp) / total) <= 1e-12,
                 "selection rate differs for " + g.group);
      sum += m;
    }
    const auto overall = confusion(preds, labels, all);
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += pred[i] && truth[i];
      fp += pred[i] && !truth[i];
      fn += !pred[i] && truth[i];
      tn += !pred[i] && !truth[i];
    }
    ck.require(sum == overall, "group matrices do not sum to overall");
    ck.require(static_cast<long>(overall.tp) == tp && static_cast<long>(overall.fp) == fp &&
                   static_cast<long>(overall.fn) == fn && static_cast<long>(overall.tn) == tn,
               "overall matrix differs from recount");
  }
  if (ck.ok) ck.detail = "20 instances, N=500, 4 groups: exact counts, rates within 1e-12, groups sum to overall";
  return ck;
}

Check disparity_emergence() {
  Check ck;
  SyntheticSpec spec = default_synthetic_spec(2000);
  spec.shifts.push_back({Attribute::gender, "female", Trait::reasoning, 0.5});
  const auto cohort = std::make_shared<const Cohort>(generate_synthetic_cohort(spec, 7));
  int wins = 0;
  std::string gaps;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SessionConfig cfg;
    cfg.cohort = cohort;
    cfg.weights_a = WeightVector{{0, 0, 1, 0, 0}};
    cfg.weights_b = WeightVector{{0, 0, 0, 1, 0}};
    cfg.master_seed = seed;
    const auto r = run_simulation(cfg);
    auto gap = [](const ModelReport& m) {
      double female = 0, male = 0;
      for (const auto& g : m.population_groups[index_of(Attribute::gender)]) {
        if (g.group == "female") female = g.selection_rate;
        if (g.group == "male") male = g.selection_rate;
      }
      return female - male;
    };
    const double ga = gap(r.report.a), gb = gap(r.report.b);
    wins += ga > gb;
    gaps += fmt(" %.3f/%.3f", ga, gb);
  }
  ck.require(wins >= 8, fmt("gap A > gap B in only %.0f of 10 seeds;", wins) + gaps);
  if (ck.ok) ck.detail = fmt("gap(A) > gap(B) in %.0f of 10 seeds (A/B:", wins) + gaps + ")";
  return ck;
}

Check identity_comparison() {
  Check ck;
  SessionConfig cfg;
  cfg.cohort = std::make_shared<const Cohort>(cohort2000());
  cfg.weights_a = cfg.weights_b = WeightVector{{3, 1, 4, 1, 5}};
  cfg.master_seed = 99;
  const auto r = run_simulation(cfg);
  // Walk the serialized delta block so that every field is covered.
  const Json doc = Json::parse(serialize_result(r));
  std::size_t fields = 0;
  std::function<void(const Json&, const std::string&)> walk = [&](const Json& j, const std::string& at) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items())
        if (k != "group" && k != "direction") walk(v, at + "." + k);
    } else if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) walk(j[i], at + "[" + std::to_string(i) + "]");
    } else {
      ++fields;
      ck.require(j.is_number() && j.get<double>() == 0.0, "nonzero delta at " + at + ": " + j.dump());
    }
  };
  walk(doc["report"]["deltas"], "deltas");
  for (const auto& row : r.report.rank_table) {
    ++fields;
    ck.require(row.rank_delta == 0, "rank delta nonzero for " + row.candidate_id);
  }
  if (ck.ok) ck.detail = fmt("%.0f delta fields, all exactly 0", fields);
  return ck;
}

Check score_range() {
  Check ck;
  const Cohort& c = cohort2000();
  Xoshiro256 rng(4);
  double lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    WeightVector w;
    for (double& v : w.weights) v = rng.below(3) == 0 ? 0.0 : rng.uniform() * 10.0;
    if (trial % 10 == 0) w.weights[rng.below(kTraitCount)] = 10.0;
    bool any = false;
    for (double v : w.weights) any = any || v > 0;
    if (!any) w.weights[0] = 1.0;
    const auto scored = composite_scores(c, w);
    for (const auto& s : scored) {
      ck.require(s.composite_score >= 0.0 && s.composite_score <= 1.0, "score outside [0,1]");
      lo = std::min(lo, s.composite_score);
      hi = std::max(hi, s.composite_score);
    }
    for (Attribute a : kAllAttributes)
      for (const auto& g : score_distribution(scored, c, a).groups)
        ck.require(g.median >= 0.0 && g.median <= 1.0, "median outside [0,1] for " + g.group);
  }
  if (ck.ok) ck.detail = fmt("100 weight vectors; scores within [%.4f, %.4f]", lo, hi);
  return ck;
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Check()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"sampling-formula-endpoints", 1.0, sampling_formula},
      {"labeling-counts", 5.0, labeling_counts},
      {"determinism", 30.0, determinism},
      {"svm-oracle-equivalence", 60.0, svm_oracle},
      {"metric-counting-oracle", 5.0, metric_counting},
      {"disparity-emergence", 120.0, disparity_emergence},
      {"identity-comparison", 60.0, identity_comparison},
      {"score-range", 60.0, score_range},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check ck;
    try {
      ck = c.run();
    } catch (const std::exception& e) {
      ck.ok = false;
      ck.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ck.ok && secs > c.limit_s) {
      ck.ok = false;
      ck.detail = fmt("took %.2fs, limit %.0fs", secs, c.limit_s);
    }
    failures += !ck.ok;
    std::printf("%s %-28s %7.3fs  %s\n", ck.ok ? "PASS" : "FAIL", c.name, secs, ck.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
