#include "fts/service.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <unistd.h>

namespace fts {
namespace {

using namespace std::chrono_literals;

class ServiceTest : public ::testing::Test {
 protected:
  void start(ServiceOptions options = {}) {
    std::map<std::string, CohortPtr> cohorts;
    cohorts["small"] = small_cohort();
    options.workers = 2;
    service_ = std::make_unique<Service>(std::move(cohorts), options);
    port_ = service_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->listen(); });
    service_->server().wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }

  void TearDown() override {
    if (service_) service_->stop();
    if (thread_.joinable()) thread_.join();
  }

  static CohortPtr small_cohort() {
    static const CohortPtr c =
        std::make_shared<const Cohort>(generate_synthetic_cohort(default_synthetic_spec(500), 3));
    return c;
  }

  std::string create(const std::string& cohort = "small") {
    auto res = client_->Post("/api/sessions", Json{{"cohort", cohort}}.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return Json::parse(res->body)["session_id"];
  }

  static Json run_body(std::uint64_t seed = 5) {
    return Json{{"weights_a", {{"memory", 0}, {"information_processing_speed", 0}, {"reasoning", 1}, {"attention", 0}, {"behavioral_restraint", 0}}},
                {"weights_b", {{"memory", 0}, {"information_processing_speed", 0}, {"reasoning", 0}, {"attention", 1}, {"behavioral_restraint", 0}}},
                {"master_seed", seed},
                {"policy", {{"positive_count", 25}}}};
  }

  httplib::Result wait_for_results(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      auto res = client_->Get("/api/sessions/" + id + "/results");
      if (!res || res->status != 202) return res;
      std::this_thread::sleep_for(50ms);
    }
    return client_->Get("/api/sessions/" + id + "/results");
  }

  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServiceTest, ListsCohortsAndSchema) {
  start();
  auto res = client_->Get("/api/cohorts");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const Json j = Json::parse(res->body);
  ASSERT_EQ(j["cohorts"].size(), 1u);
  EXPECT_EQ(j["cohorts"][0]["name"], "small");
  EXPECT_EQ(j["cohorts"][0]["size"], 500);

  res = client_->Get("/api/schema/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, std::string(kReportSchema));
}

TEST_F(ServiceTest, SessionLifecycleMatchesDirectRun) {
  start();
  const std::string id = create();
  auto res = client_->Get("/api/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(Json::parse(res->body)["state"], "new");

  res = client_->Get("/api/sessions/" + id + "/results");
  EXPECT_EQ(res->status, 409);

  res = client_->Post("/api/sessions/" + id + "/run", run_body().dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 202) << res->body;

  res = wait_for_results(id);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;

  SessionConfig cfg;
  cfg.cohort = small_cohort();
  cfg.weights_a = WeightVector{{0, 0, 1, 0, 0}};
  cfg.weights_b = WeightVector{{0, 0, 0, 1, 0}};
  cfg.master_seed = 5;
  cfg.policy.positive_count = 25;
  EXPECT_EQ(res->body, serialize_result(run_simulation(cfg)));

  // Reads are idempotent.
  auto again = client_->Get("/api/sessions/" + id + "/results");
  EXPECT_EQ(again->body, res->body);
  EXPECT_EQ(Json::parse(client_->Get("/api/sessions/" + id)->body)["state"], "done");

  // A finished session can be run again with a new configuration.
  res = client_->Post("/api/sessions/" + id + "/run", run_body(6).dump(), "application/json");
  EXPECT_EQ(res->status, 202);
  res = wait_for_results(id);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body)["config"]["master_seed"], 6);
}

TEST_F(ServiceTest, ConcurrentRunIsConflict) {
  start();
  const std::string id = create();
  Json slow = run_body();
  slow["train"] = {{"tolerance", 1e-12}, {"max_iterations", 200000}};
  auto first = client_->Post("/api/sessions/" + id + "/run", slow.dump(), "application/json");
  ASSERT_EQ(first->status, 202);
  auto second = client_->Post("/api/sessions/" + id + "/run", slow.dump(), "application/json");
  const auto state = Json::parse(client_->Get("/api/sessions/" + id)->body)["state"];
  if (state == "running") {
    EXPECT_EQ(second->status, 409) << second->body;
    EXPECT_EQ(Json::parse(second->body)["error"]["code"], "Conflict");
  }
  EXPECT_TRUE(second->status == 409 || second->status == 202);
  wait_for_results(id);
}

TEST_F(ServiceTest, DistinctSessionIds) {
  start();
  std::set<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.insert(create());
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(service_->session_count(), 20u);
}

TEST_F(ServiceTest, ErrorsMapToStatusCodes) {
  start();
  auto res = client_->Post("/api/sessions", R"({"cohort":"nope"})", "application/json");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(Json::parse(res->body)["error"]["code"], "UnknownCohort");

  res = client_->Get("/api/sessions/0123456789abcdef");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(Json::parse(res->body)["error"]["code"], "UnknownSession");
  EXPECT_EQ(client_->Post("/api/sessions/0123abcd/run", run_body().dump(), "application/json")->status, 404);

  const std::string id = create();
  Json zero = run_body();
  for (auto& [k, v] : zero["weights_b"].items()) v = 0;
  res = client_->Post("/api/sessions/" + id + "/run", zero.dump(), "application/json");
  EXPECT_EQ(res->status, 422);
  const Json err = Json::parse(res->body)["error"];
  EXPECT_EQ(err["code"], "InvalidWeights");
  EXPECT_NE(err["message"].get<std::string>().find("weights_b"), std::string::npos);

  Json high = run_body();
  high["weights_a"]["memory"] = 11;
  EXPECT_EQ(client_->Post("/api/sessions/" + id + "/run", high.dump(), "application/json")->status, 422);

  res = client_->Post("/api/sessions/" + id + "/run", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(Json::parse(res->body)["error"]["code"], "BadRequest");

  Json unknown_key = run_body();
  unknown_key["policy"]["cutoff"] = 0.5;
  EXPECT_EQ(client_->Post("/api/sessions/" + id + "/run", unknown_key.dump(), "application/json")->status, 422);

  // Rejected runs leave the session untouched.
  EXPECT_EQ(Json::parse(client_->Get("/api/sessions/" + id)->body)["state"], "new");
}

TEST_F(ServiceTest, RunFailureIsReported) {
  start();
  const std::string id = create();
  Json body = run_body();
  body["policy"] = {{"percentile_cut", 0.0001}, {"positive_count", 500}};
  ASSERT_EQ(client_->Post("/api/sessions/" + id + "/run", body.dump(), "application/json")->status, 202);
  auto res = wait_for_results(id);
  EXPECT_EQ(res->status, 422);
  const Json j = Json::parse(res->body);
  EXPECT_EQ(j["state"], "failed");
  EXPECT_EQ(j["error"]["code"], "SingleClassDataset");
}

TEST_F(ServiceTest, CsvUpload) {
  start();
  const std::string csv = serialize_cohort_csv(*small_cohort());
  auto res = client_->Post("/api/sessions", csv, "text/csv");
  ASSERT_EQ(res->status, 201) << res->body;
  const Json j = Json::parse(res->body);
  EXPECT_EQ(j["cohort"], "upload:" + cohort_fingerprint(*small_cohort()));

  std::string broken = csv;
  broken.replace(broken.find("go_no_go"), 8, "go_no_gx");
  res = client_->Post("/api/sessions", broken, "text/csv");
  EXPECT_EQ(res->status, 422);
  const Json err = Json::parse(res->body)["error"];
  EXPECT_EQ(err["code"], "MissingColumn");
  EXPECT_EQ(err["subject"], "go_no_go");

  const std::string header = csv.substr(0, csv.find('\n') + 1);
  res = client_->Post("/api/sessions", header + "x1,female,18-29\n", "text/csv");
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(Json::parse(res->body)["error"]["code"], "MalformedRow");
  EXPECT_EQ(service_->session_count(), 1u);
}

TEST_F(ServiceTest, IdleSessionsExpire) {
  ServiceOptions options;
  options.session_ttl = 100ms;
  start(options);
  create();
  create();
  EXPECT_EQ(service_->session_count(), 2u);
  std::this_thread::sleep_for(250ms);
  service_->evict_expired();
  EXPECT_EQ(service_->session_count(), 0u);
}

TEST_F(ServiceTest, PayloadsMatchPublishedSchemas) {
  if (std::system("python3 -c 'import jsonschema' >/dev/null 2>&1") != 0) GTEST_SKIP() << "jsonschema unavailable";
  start();
  Json samples = Json::object();
  auto keep = [&](const std::string& def, const std::string& body) { samples[def].push_back(Json::parse(body)); };

  keep("cohort_list", client_->Get("/api/cohorts")->body);
  const Json create_request{{"cohort", "small"}};
  keep("create_session_request", create_request.dump());
  auto res = client_->Post("/api/sessions", create_request.dump(), "application/json");
  keep("session_created", res->body);
  const std::string id = Json::parse(res->body)["session_id"];
  keep("session_status", client_->Get("/api/sessions/" + id)->body);
  keep("session_status", client_->Get("/api/sessions/" + id + "/results")->body);

  Json body = run_body();
  body["train"] = {{"c", 2.0}, {"class_balance", true}};
  keep("run_request", body.dump());
  keep("run_accepted", client_->Post("/api/sessions/" + id + "/run", body.dump(), "application/json")->body);
  wait_for_results(id);
  keep("session_status", client_->Get("/api/sessions/" + id)->body);

  keep("error", client_->Get("/api/sessions/ffff")->body);
  keep("error", client_->Post("/api/sessions", "{", "application/json")->body);
  Json failing = run_body();
  failing["policy"] = {{"percentile_cut", 0.0001}, {"positive_count", 500}};
  client_->Post("/api/sessions/" + id + "/run", failing.dump(), "application/json");
  keep("session_status", wait_for_results(id)->body);

  const auto file = std::filesystem::temp_directory_path() / ("fts_api_samples_" + std::to_string(::getpid()) + ".json");
  std::ofstream(file) << samples.dump();
  const std::string check =
      "python3 -c 'import json,sys,jsonschema\n"
      "s=json.load(open(sys.argv[1])); d=json.load(open(sys.argv[2]))\n"
      "for name, items in d.items():\n"
      "  v=jsonschema.Draft202012Validator(dict(s, **{\"$ref\": \"#/$defs/\"+name}))\n"
      "  [v.validate(x) for x in items]' '" +
      std::string(FTS_SOURCE_DIR) + "/docs/api_schema.json' '" + file.string() + "'";
  EXPECT_EQ(std::system(check.c_str()), 0);
  std::filesystem::remove(file);
}

TEST(ServiceBind, PortInUse) {
  Service a({}, ServiceOptions{});
  const int port = a.bind("127.0.0.1", 0);
  Service b({}, ServiceOptions{});
  try {
    b.bind("127.0.0.1", port);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::port_in_use);
  }
}

TEST(WorkerPoolTest, ShutdownWaitsForJobs) {
  WorkerPool pool(2);
  std::atomic<int> done{0};
  for (int i = 0; i < 4; ++i)
    pool.submit([&] {
      std::this_thread::sleep_for(20ms);
      ++done;
    });
  EXPECT_TRUE(pool.shutdown(5s));
  EXPECT_EQ(done.load(), 4);
}

}  // namespace
}  // namespace fts
