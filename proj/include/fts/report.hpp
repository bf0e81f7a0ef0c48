#pragma once

// Structured documents: the simulation result (report + datasets + models),
// model records, weight vectors, override blocks and synthetic specs.
//
// Field order is fixed (ordered_json) so equal results serialize to equal
// bytes. Undefined rates are written as null.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "fts/cohort.hpp"
#include "fts/engine.hpp"
#include "fts/error.hpp"
#include "fts/metrics.hpp"
#include "fts/svm.hpp"
#include "fts/target.hpp"

namespace fts {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kResultSchemaName = "fts.simulation_result";
inline constexpr std::string_view kModelSchemaName = "fts.linear_model";
inline constexpr int kSchemaVersion = 1;

inline Json rate_json(const Rate& r) { return r ? Json(*r) : Json(nullptr); }

inline Json to_json(const WeightVector& w) {
  Json j = Json::object();
  for (Trait t : kAllTraits) j[std::string(name_of(t))] = w[t];
  return j;
}

inline WeightVector weights_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_weights, "weights must be an object keyed by trait");
  WeightVector w;
  for (Trait t : kAllTraits) {
    const std::string key(name_of(t));
    if (!j.contains(key)) throw Error(ErrorCode::invalid_weights, "weights miss trait " + key, key);
    if (!j[key].is_number()) throw Error(ErrorCode::invalid_weights, "weight " + key + " is not a number", key);
    w.weights[index_of(t)] = j[key].get<double>();
  }
  if (j.size() != kTraitCount) throw Error(ErrorCode::invalid_weights, "weights name an unknown trait");
  w.validate_slider_range();
  return w;
}

inline Json to_json(const ConfusionMatrix& m) {
  return Json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

inline Json to_json(const GroupMetrics& g) {
  return Json{{"group", g.group},
              {"count", g.count},
              {"selected", g.selected},
              {"selection_rate", g.selection_rate},
              {"tpr", rate_json(g.tpr)},
              {"fpr", rate_json(g.fpr)},
              {"ppv", rate_json(g.ppv)},
              {"npv", rate_json(g.npv)},
              {"confusion", to_json(g.confusion)}};
}

inline Json to_json(const ScoreSummary& s) {
  return Json{{"group", s.group}, {"count", s.count}, {"min", s.min},       {"q1", s.q1},
              {"median", s.median}, {"q3", s.q3},     {"max", s.max}};
}

inline Json to_json(const LinearModel& m) {
  Json j;
  j["schema"] = kModelSchemaName;
  j["schema_version"] = kSchemaVersion;
  j["feature_order"] = Json::array();
  for (auto n : kTraitNames) j["feature_order"].push_back(n);
  j["feature_weights"] = m.feature_weights;
  j["bias"] = m.bias;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  j["objective"] = m.objective;
  j["dual_objective"] = m.dual_objective;
  j["train_ids"] = m.train_ids;
  j["test_ids"] = m.test_ids;
  return j;
}

inline LinearModel model_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kModelSchemaName ||
        j.at("schema_version").get<int>() != kSchemaVersion)
      throw Error(ErrorCode::invalid_config, "unsupported model schema");
    LinearModel m;
    const auto order = j.at("feature_order").get<std::vector<std::string>>();
    if (order.size() != kTraitCount || !std::equal(order.begin(), order.end(), kTraitNames.begin()))
      throw Error(ErrorCode::invalid_config, "model feature order differs from the trait order");
    m.feature_weights = j.at("feature_weights").get<std::array<double, kTraitCount>>();
    m.bias = j.at("bias").get<double>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.converged = j.at("converged").get<bool>();
    m.objective = j.at("objective").get<double>();
    m.dual_objective = j.at("dual_objective").get<double>();
    m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("malformed model record: ") + e.what());
  }
}

inline Json to_json(const LabelingPolicy& p) {
  return Json{{"percentile_cut", p.percentile_cut},
              {"positive_count", p.positive_count},
              {"weight_high", p.weight_high},
              {"weight_low", p.weight_low},
              {"weight_span", p.weight_span()}};
}

inline Json to_json(const TrainConfig& t) {
  return Json{{"c", t.c},
              {"class_balance", t.class_balance},
              {"tolerance", t.tolerance},
              {"max_iterations", t.max_iterations},
              {"split_fraction", t.split_fraction}};
}

namespace detail {

inline double number_field(const Json& v, const std::string& key) {
  if (!v.is_number()) throw Error(ErrorCode::invalid_config, key + " must be a number", key);
  return v.get<double>();
}

inline std::size_t count_field(const Json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw Error(ErrorCode::invalid_config, key + " must be a non-negative integer", key);
  return v.get<std::size_t>();
}

}  // namespace detail

// Applies a partial override object; unknown keys are rejected.
inline void apply_overrides(LabelingPolicy& p, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_config, "policy overrides must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "percentile_cut") p.percentile_cut = detail::number_field(v, key);
    else if (key == "positive_count") p.positive_count = detail::count_field(v, key);
    else if (key == "weight_high") p.weight_high = detail::number_field(v, key);
    else if (key == "weight_low") p.weight_low = detail::number_field(v, key);
    else throw Error(ErrorCode::invalid_config, "unknown policy key " + key, key);
  }
  p.validate();
}

inline void apply_overrides(TrainConfig& t, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_config, "train overrides must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "c") t.c = detail::number_field(v, key);
    else if (key == "class_balance") {
      if (!v.is_boolean()) throw Error(ErrorCode::invalid_config, "class_balance must be a boolean", key);
      t.class_balance = v.get<bool>();
    } else if (key == "tolerance") t.tolerance = detail::number_field(v, key);
    else if (key == "max_iterations") t.max_iterations = detail::count_field(v, key);
    else if (key == "split_fraction") t.split_fraction = detail::number_field(v, key);
    else throw Error(ErrorCode::invalid_config, "unknown train key " + key, key);
  }
  t.validate();
}

// Flat `key=value` text (blank lines and '#' comments ignored) turned into an
// override object; values are parsed as JSON scalars where possible.
inline Json parse_key_values(std::string_view text) {
  Json out = Json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (eq == std::string::npos) {
      if (trim(line).empty()) continue;
      throw Error(ErrorCode::invalid_config, "expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    Json parsed = Json::parse(value, nullptr, false);
    out[key] = parsed.is_discarded() ? Json(value) : parsed;
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io_error, "cannot open " + path, path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline SyntheticSpec synthetic_spec_from_json(const Json& j) {
  try {
    SyntheticSpec spec = default_synthetic_spec(j.value("size", std::size_t{2000}));
    spec.noise_scale = j.value("noise_scale", spec.noise_scale);
    if (j.contains("fractions")) {
      for (const auto& [attr, groups] : j.at("fractions").items()) {
        auto& target = spec.fractions[index_of(parse_attribute(attr))];
        target.clear();
        for (const auto& [group, f] : groups.items()) target.emplace_back(group, f.get<double>());
      }
    }
    if (j.contains("shifts")) {
      for (const auto& s : j.at("shifts")) {
        spec.shifts.push_back({parse_attribute(s.at("attribute").get<std::string>()),
                               s.at("group").get<std::string>(),
                               parse_trait(s.at("trait").get<std::string>()),
                               s.at("sigma").get<double>()});
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_spec, std::string("malformed synthetic spec: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::unknown_attribute) throw Error(ErrorCode::invalid_spec, e.detail(), e.subject());
    throw;
  }
}

// ---------------------------------------------------------------------------

inline Json model_report_json(const ModelReport& r) {
  Json j;
  j["accuracy"] = rate_json(r.accuracy);
  j["held_out"]["overall"] = to_json(r.held_out_overall);
  j["held_out"]["groups"] = Json::object();
  j["population"]["overall"] = to_json(r.population_overall);
  j["population"]["groups"] = Json::object();
  j["label_distribution"] = Json::object();
  j["score_distribution"]["overall"] = to_json(r.score_overall);
  for (Attribute a : kAllAttributes) {
    const auto k = index_of(a);
    const std::string name(name_of(a));
    Json held = Json::array(), pop = Json::array(), labels = Json::array(), scores = Json::array();
    for (const auto& g : r.held_out_groups[k]) held.push_back(to_json(g));
    for (const auto& g : r.population_groups[k]) pop.push_back(to_json(g));
    for (const auto& g : r.label_distribution[k])
      labels.push_back(Json{{"group", g.group},
                            {"positives", g.positives},
                            {"negatives", g.negatives},
                            {"positive_share", g.positive_share}});
    for (const auto& s : r.score_distribution[k].groups) scores.push_back(to_json(s));
    j["held_out"]["groups"][name] = std::move(held);
    j["population"]["groups"][name] = std::move(pop);
    j["label_distribution"][name] = std::move(labels);
    j["score_distribution"][name] =
        Json{{"groups", std::move(scores)}, {"empty_groups", r.score_distribution[k].empty_groups}};
  }
  Json preds = Json::array();
  for (const auto& p : r.predictions)
    preds.push_back(Json{{"candidate_id", p.candidate_id},
                         {"decision_score", p.decision_score},
                         {"predicted_label", p.predicted_label},
                         {"rank", p.rank}});
  j["predictions"] = std::move(preds);
  return j;
}

inline Json to_json(const ComparisonReport& rep) {
  Json j;
  j["bases"] = Json{
      {"held_out", "test split of each model, against that model's own labels"},
      {"population", "every candidate in the cohort, against the training labels"}};
  j["models"]["A"] = model_report_json(rep.a);
  j["models"]["B"] = model_report_json(rep.b);

  const auto& d = rep.deltas;
  Json deltas;
  deltas["direction"] = "B - A";
  deltas["accuracy"] = rate_json(d.accuracy);
  deltas["selection_rate"] = rate_json(d.selection_rate);
  deltas["tpr"] = rate_json(d.tpr);
  deltas["fpr"] = rate_json(d.fpr);
  deltas["ppv"] = rate_json(d.ppv);
  deltas["npv"] = rate_json(d.npv);
  deltas["groups"] = Json::object();
  for (Attribute a : kAllAttributes) {
    Json groups = Json::array();
    for (const auto& g : d.groups[index_of(a)])
      groups.push_back(Json{{"group", g.group},
                            {"selection_rate", rate_json(g.selection_rate)},
                            {"tpr", rate_json(g.tpr)},
                            {"fpr", rate_json(g.fpr)},
                            {"ppv", rate_json(g.ppv)},
                            {"npv", rate_json(g.npv)},
                            {"label_positive_share", rate_json(g.label_positive_share)},
                            {"score_median", rate_json(g.score_median)}});
    deltas["groups"][std::string(name_of(a))] = std::move(groups);
  }
  j["deltas"] = std::move(deltas);

  Json table = Json::array();
  for (const auto& r : rep.rank_table)
    table.push_back(Json{{"candidate_id", r.candidate_id},
                         {"rank_a", r.rank_a},
                         {"rank_b", r.rank_b},
                         {"rank_delta", r.rank_delta},
                         {"score_a", r.score_a},
                         {"score_b", r.score_b},
                         {"selected_a", r.selected_a},
                         {"selected_b", r.selected_b}});
  j["rank_table"] = std::move(table);
  return j;
}

inline Json dataset_json(const LabeledDataset& ds) {
  Json positives = Json::array();
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i]) positives.push_back(ds.scored[i].candidate_id);
  Json scores = Json::array();
  for (const auto& s : ds.scored)
    scores.push_back(Json{{"candidate_id", s.candidate_id},
                          {"composite_score", s.composite_score},
                          {"rank", s.rank},
                          {"label", 0}});
  for (std::size_t i = 0; i < ds.labels.size(); ++i) scores[i]["label"] = ds.labels[i];
  return Json{{"sampling_seed", std::to_string(ds.sampling_seed)},
              {"top_subset_size", ds.top_subset_ids.size()},
              {"positive_count", ds.positives()},
              {"top_subset_ids", ds.top_subset_ids},
              {"positive_ids", std::move(positives)},
              {"scored", std::move(scores)}};
}

inline Json config_json(const SimulationResult& r) {
  const auto& c = r.config;
  Json j;
  j["cohort"] = Json{{"fingerprint", cohort_fingerprint(*c.cohort)}, {"size", c.cohort->size()}};
  j["weights_a"] = to_json(c.weights_a);
  j["weights_b"] = to_json(c.weights_b);
  j["master_seed"] = c.master_seed;
  j["derived_seeds"] = Json{{"label_a", std::to_string(r.seeds.label_a)},
                            {"label_b", std::to_string(r.seeds.label_b)},
                            {"split", std::to_string(r.seeds.split)}};
  j["policy"] = to_json(c.policy);
  j["train"] = to_json(c.train);
  return j;
}

inline Json to_json(const SimulationResult& r) {
  Json j;
  j["schema"] = kResultSchemaName;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_json(r);
  j["report"] = to_json(r.report);
  j["datasets"]["A"] = dataset_json(r.a.dataset);
  j["datasets"]["B"] = dataset_json(r.b.dataset);
  j["models"]["A"] = to_json(r.a.model);
  j["models"]["B"] = to_json(r.b.model);
  j["warnings"] = r.warnings;
  return j;
}

// The canonical byte form shared by the CLI and the service.
inline std::string serialize_result(const SimulationResult& r) { return to_json(r).dump(2) + "\n"; }

}  // namespace fts
