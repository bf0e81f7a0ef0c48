#pragma once

// HTTP service over the engine.
//
//   GET  /api/cohorts                 built-in and preloaded cohorts
//   POST /api/sessions                {"cohort": name} or a text/csv upload
//   GET  /api/sessions/{id}           status
//   POST /api/sessions/{id}/run       weights_a, weights_b, master_seed, policy?, train?
//   GET  /api/sessions/{id}/results   result document once done
//   GET  /api/schema/report           JSON Schema of the result document
//
// Sessions live in memory and are evicted after `session_ttl` without access
// (never while running). Runs execute on a bounded worker pool.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fts/cohort.hpp"
#include "fts/engine.hpp"
#include "fts/error.hpp"
#include "fts/report.hpp"
#include "fts/report_schema.hpp"

namespace fts {

// Fixed-size pool. shutdown() waits for queued and in-flight jobs; on timeout
// it drops the queue and returns false, leaving running jobs to the
// destructor.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads) {
    if (threads == 0) threads = 1;
    for (std::size_t i = 0; i < threads; ++i) workers_.emplace_back([this] { loop(); });
  }
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;
  ~WorkerPool() { shutdown(std::chrono::hours(24)); }

  void submit(std::function<void()> job) {
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

  // Returns true when every job finished within the timeout.
  bool shutdown(std::chrono::milliseconds timeout) {
    {
      std::unique_lock lock(mu_);
      if (workers_.empty()) return true;
      stopping_ = true;
      cv_.notify_all();
      const bool drained =
          idle_cv_.wait_for(lock, timeout, [&] { return jobs_.empty() && active_ == 0; });
      if (!drained) {
        jobs_.clear();
        return false;
      }
    }
    for (auto& w : workers_) w.join();
    workers_.clear();
    return true;
  }

 private:
  void loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
        ++active_;
      }
      job();
      {
        std::lock_guard lock(mu_);
        --active_;
      }
      idle_cv_.notify_all();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> jobs_;
  std::vector<std::thread> workers_;
  std::size_t active_ = 0;
  bool stopping_ = false;
};

enum class SessionState { created, configured, running, done, failed };

inline std::string_view state_name(SessionState s) {
  switch (s) {
    case SessionState::created: return "new";
    case SessionState::configured: return "configured";
    case SessionState::running: return "running";
    case SessionState::done: return "done";
    case SessionState::failed: return "failed";
  }
  return "unknown";
}

struct ServiceOptions {
  std::chrono::milliseconds session_ttl = std::chrono::hours(1);
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::string static_dir;  // served at "/" when non-empty
};

inline Json error_json(const Error& e) {
  Json j;
  j["error"] = Json{{"code", error_code_name(e.code())}, {"message", e.detail()}, {"subject", e.subject()}};
  return j;
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_session:
    case ErrorCode::unknown_cohort: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::bad_request: return 400;
    default: return 422;
  }
}

class Service {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Service(std::map<std::string, CohortPtr> cohorts, ServiceOptions options = {})
      : cohorts_(std::move(cohorts)), options_(std::move(options)), pool_(options_.workers) {
    std::random_device rd;
    id_rng_.emplace((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    // httplib defaults to SO_REUSEPORT, which lets a second server share the
    // port silently; plain SO_REUSEADDR makes an occupied port fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  ~Service() { stop(); }

  httplib::Server& server() { return server_; }

  // Binds or throws PortInUse. Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = server_.bind_to_any_port(host);
      if (p < 0) throw Error(ErrorCode::port_in_use, "cannot bind " + host);
      return p;
    }
    if (!server_.bind_to_port(host, port))
      throw Error(ErrorCode::port_in_use, "port " + std::to_string(port) + " is in use",
                  std::to_string(port));
    return port;
  }

  // Blocks until stop() is called.
  bool listen() { return server_.listen_after_bind(); }

  // Stops accepting requests, then waits for in-flight runs. Returns false if
  // they did not finish within the timeout.
  bool stop(std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    if (server_.is_running()) server_.stop();
    return pool_.shutdown(timeout);
  }

  std::size_t session_count() {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  // Drops idle sessions older than the TTL; exposed for tests.
  void evict_expired() {
    const auto now = Clock::now();
    std::lock_guard lock(mu_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      std::lock_guard slock(it->second->mu);
      if (it->second->state != SessionState::running &&
          now - it->second->last_access > options_.session_ttl) {
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

 private:
  struct Session {
    std::mutex mu;
    std::string id;
    CohortPtr cohort;
    std::string cohort_name;
    SessionState state = SessionState::created;
    std::optional<SessionConfig> config;
    std::string result_document;
    std::optional<Error> error;
    std::string stage;
    Clock::time_point last_access = Clock::now();
  };

  void routes() {
    server_.Get("/api/cohorts", [this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& [name, c] : cohorts_)
        list.push_back(Json{{"name", name},
                            {"size", c->size()},
                            {"fingerprint", cohort_fingerprint(*c)},
                            {"provenance", c->provenance}});
      send(res, 200, Json{{"cohorts", std::move(list)}});
    });

    server_.Get("/api/schema/report", [](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(std::string(kReportSchema), "application/schema+json");
    });

    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { create_session(req, res); });
    });

    server_.Get(R"(/api/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->mu);
        send(res, 200, status_json(*s));
      });
    });

    server_.Post(R"(/api/sessions/([0-9a-f]+)/run)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { submit_and_run(req.matches[1], req.body, res); });
    });

    server_.Get(R"(/api/sessions/([0-9a-f]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] { get_results(req.matches[1], res); });
    });

    if (!options_.static_dir.empty()) server_.set_mount_point("/", options_.static_dir);
  }

  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  void handle(httplib::Response& res, F&& f) {
    evict_expired();
    try {
      f();
    } catch (const Error& e) {
      send(res, http_status(e.code()), error_json(e));
    } catch (const nlohmann::json::exception& e) {
      send(res, 400, error_json(Error(ErrorCode::bad_request, e.what())));
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::unknown_session, "no session " + id, id);
    std::lock_guard slock(it->second->mu);
    it->second->last_access = Clock::now();
    return it->second;
  }

  std::string new_id() {
    std::lock_guard lock(mu_);
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int word = 0; word < 2; ++word) {
      const std::uint64_t v = id_rng_->next();
      for (int i = 0; i < 16; ++i) id += hex[(v >> (4 * i)) & 0xF];
    }
    return id;
  }

  static Json status_json(const Session& s) {
    Json j{{"session_id", s.id}, {"state", state_name(s.state)}, {"cohort", s.cohort_name}};
    if (s.state == SessionState::running) j["stage"] = s.stage;
    if (s.state == SessionState::failed && s.error) j["error"] = error_json(*s.error)["error"];
    return j;
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    auto session = std::make_shared<Session>();
    const std::string content_type = req.get_header_value("Content-Type");
    if (content_type.rfind("text/csv", 0) == 0) {
      session->cohort = std::make_shared<const Cohort>(parse_cohort_csv(req.body, TestDirectionConfig{}, "upload"));
      session->cohort_name = "upload:" + cohort_fingerprint(*session->cohort);
    } else {
      const Json body = Json::parse(req.body.empty() ? "{}" : req.body);
      const std::string name = body.value("cohort", std::string());
      auto it = cohorts_.find(name);
      if (it == cohorts_.end()) throw Error(ErrorCode::unknown_cohort, "no cohort named '" + name + "'", name);
      session->cohort = it->second;
      session->cohort_name = name;
    }
    session->id = new_id();
    {
      std::lock_guard lock(mu_);
      sessions_[session->id] = session;
    }
    send(res, 201, Json{{"session_id", session->id}, {"state", "new"}, {"cohort", session->cohort_name}});
  }

  void submit_and_run(const std::string& id, const std::string& body_text, httplib::Response& res) {
    auto session = find(id);
    const Json body = Json::parse(body_text);

    SessionConfig config;
    {
      std::lock_guard lock(session->mu);
      config.cohort = session->cohort;
    }
    try {
      config.weights_a = weights_from_json(body.at("weights_a"));
    } catch (const Error& e) {
      throw e.with_context("weights_a");
    }
    try {
      config.weights_b = weights_from_json(body.at("weights_b"));
    } catch (const Error& e) {
      throw e.with_context("weights_b");
    }
    const Json& seed = body.at("master_seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      throw Error(ErrorCode::invalid_config, "master_seed must be a non-negative integer", "master_seed");
    config.master_seed = seed.get<std::uint64_t>();
    if (body.contains("policy")) apply_overrides(config.policy, body["policy"]);
    if (body.contains("train")) apply_overrides(config.train, body["train"]);
    config.validate();

    {
      std::lock_guard lock(session->mu);
      if (session->state == SessionState::running)
        throw Error(ErrorCode::conflict, "session " + id + " is already running", id);
      session->state = SessionState::configured;
      session->config = config;
      session->result_document.clear();
      session->error.reset();
      session->state = SessionState::running;
      session->stage = "queued";
    }
    pool_.submit([session, config] {
      auto progress = [&](std::string_view stage) {
        std::lock_guard lock(session->mu);
        session->stage = std::string(stage);
      };
      try {
        auto result = run_simulation(config, Execution::sequential, progress);
        std::string doc = serialize_result(result);
        std::lock_guard lock(session->mu);
        session->result_document = std::move(doc);
        session->state = SessionState::done;
      } catch (const Error& e) {
        std::lock_guard lock(session->mu);
        session->error = e;
        session->state = SessionState::failed;
      } catch (const std::exception& e) {
        std::lock_guard lock(session->mu);
        session->error = Error(ErrorCode::domain_error, e.what());
        session->state = SessionState::failed;
      }
    });
    send(res, 202, Json{{"session_id", id}, {"state", "running"}});
  }

  void get_results(const std::string& id, httplib::Response& res) {
    auto session = find(id);
    std::lock_guard lock(session->mu);
    switch (session->state) {
      case SessionState::done:
        res.status = 200;
        res.set_content(session->result_document, "application/json");
        return;
      case SessionState::failed:
        send(res, http_status(session->error->code()), status_json(*session));
        return;
      case SessionState::created:
        send(res, 409, status_json(*session));
        return;
      default:
        send(res, 202, status_json(*session));
        return;
    }
  }

  std::map<std::string, CohortPtr> cohorts_;
  ServiceOptions options_;
  httplib::Server server_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::optional<Xoshiro256> id_rng_;
  WorkerPool pool_;
};

// Cohorts every service instance offers by name.
inline std::map<std::string, CohortPtr> builtin_cohorts() {
  std::map<std::string, CohortPtr> out;
  out["synthetic-2000"] =
      std::make_shared<const Cohort>(generate_synthetic_cohort(default_synthetic_spec(2000), 7));
  SyntheticSpec gap = default_synthetic_spec(2000);
  gap.shifts.push_back({Attribute::gender, "female", Trait::reasoning, 0.5});
  out["synthetic-2000-reasoning-gap"] = std::make_shared<const Cohort>(generate_synthetic_cohort(gap, 7));
  return out;
}

}  // namespace fts
