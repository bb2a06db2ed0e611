#pragma once

// Live session service and its HTTP front end.
//
//   POST /sessions                      {"scenario", "mode", "seed"} -> handle
//   GET  /sessions                      -> [handle]
//   POST /sessions/{id}/instructions    {"text"} -> {"step", "queue_position"}
//   GET  /sessions/{id}/events?from=N   -> line-delimited events, live until the session ends
//                                          (follow=0 returns what exists and closes)
//   GET  /sessions/{id}/state           -> snapshot
//
// Instructions on one session are served in arrival order; readers never take
// the lock that instruction processing holds.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "replan/engine.hpp"
#include "replan/error.hpp"
#include "replan/harness.hpp"
#include "replan/scenario.hpp"

namespace replan {

struct SessionHandle {
  std::string id;
  std::int64_t created_at_ms = 0;
  std::string scenario;
  AblationMode mode = AblationMode::Full;
  std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const SessionHandle& h) {
  return {{"id", h.id},
          {"created_at_ms", h.created_at_ms},
          {"scenario", h.scenario},
          {"mode", std::string(to_string(h.mode))},
          {"seed", h.seed}};
}

struct InstructionAck {
  int step = 0;            // step of the InstructionReceived event
  int queue_position = 0;  // instructions ahead of this one on arrival
};

class SessionService {
 public:
  explicit SessionService(std::filesystem::path scenario_dir, std::optional<std::filesystem::path> log_dir = {})
      : scenario_dir_(std::move(scenario_dir)), log_dir_(std::move(log_dir)) {}

  SessionHandle create_session(const std::string& scenario_ref, AblationMode mode, std::uint64_t seed) {
    Scenario sc = load_scenario(resolve(scenario_ref));
    auto live = std::make_shared<Live>();
    live->handle = {"", now_ms(), scenario_ref, mode, seed};
    {
      std::unique_lock lock(sessions_mu_);
      live->handle.id = "session-" + std::to_string(++counter_);
    }
    if (log_dir_) {
      std::filesystem::create_directories(*log_dir_);
      live->log.open(*log_dir_ / (live->handle.id + ".ndjson"), std::ios::app);
    }
    Live* raw = live.get();
    auto sink = [raw](const SessionEvent& e, const SessionState& s) { raw->record(e, s); };
    live->session = std::make_unique<Session>(sc, make_reasoner(sc, seed), mode, seed, sink);
    live->snapshot = to_json(live->session->state());

    std::unique_lock lock(sessions_mu_);
    sessions_[live->handle.id] = live;
    order_.push_back(live->handle.id);
    return live->handle;
  }

  std::vector<SessionHandle> list() const {
    std::shared_lock lock(sessions_mu_);
    std::vector<SessionHandle> out;
    for (const auto& id : order_) out.push_back(sessions_.at(id)->handle);
    return out;
  }

  InstructionAck post_instruction(const std::string& id, const std::string& text) {
    auto live = find(id);
    std::unique_lock queue(live->queue_mu);
    const std::uint64_t ticket = live->next_ticket++;
    const int position = static_cast<int>(ticket - live->serving);
    live->queue_cv.wait(queue, [&] { return live->serving == ticket; });
    queue.unlock();

    struct Release {
      Live* l;
      ~Release() {
        std::lock_guard g(l->queue_mu);
        ++l->serving;
        l->queue_cv.notify_all();
      }
    } release{live.get()};
    const int step = live->session->submit(text);
    return {step, position};
  }

  nlohmann::json get_state(const std::string& id) const {
    auto live = find(id);
    std::lock_guard lock(live->data_mu);
    return live->snapshot;
  }

  // Copies events with step >= from. With a timeout, blocks until at least one
  // such event exists or the session has ended. Returns false once the session
  // has ended and nothing at or beyond `from` remains.
  bool read_events(const std::string& id, int from, std::vector<SessionEvent>& out,
                   std::chrono::milliseconds wait = std::chrono::milliseconds(0)) const {
    auto live = find(id);
    std::unique_lock lock(live->data_mu);
    auto ready = [&] { return live->ended || static_cast<int>(live->events.size()) > from; };
    if (wait.count() > 0) live->data_cv.wait_for(lock, wait, ready);
    for (std::size_t i = static_cast<std::size_t>(std::max(from, 0)); i < live->events.size(); ++i) {
      out.push_back(live->events[i]);
    }
    return !(live->ended && static_cast<int>(live->events.size()) <= from);
  }

  bool ended(const std::string& id) const {
    auto live = find(id);
    std::lock_guard lock(live->data_mu);
    return live->ended;
  }

 private:
  struct Live {
    SessionHandle handle;
    std::unique_ptr<Session> session;

    std::mutex queue_mu;
    std::condition_variable queue_cv;
    std::uint64_t next_ticket = 0;
    std::uint64_t serving = 0;

    mutable std::mutex data_mu;
    mutable std::condition_variable data_cv;
    std::vector<SessionEvent> events;
    nlohmann::json snapshot;
    bool ended = false;
    std::ofstream log;

    void record(const SessionEvent& e, const SessionState& s) {
      nlohmann::json snap = to_json(s);
      std::lock_guard lock(data_mu);
      events.push_back(e);
      snapshot = std::move(snap);
      if (e.kind == EventKind::SessionEnded) ended = true;
      if (log.is_open()) log << to_json(e).dump() << '\n' << std::flush;
      data_cv.notify_all();
    }
  };

  static std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  std::filesystem::path resolve(const std::string& ref) const {
    if (ref.empty() || ref.find("..") != std::string::npos || ref.find('/') != std::string::npos ||
        ref.find('\\') != std::string::npos) {
      throw Error(ErrorCode::ConfigError, "invalid scenario reference '" + ref + "'");
    }
    auto path = scenario_dir_ / (ref + ".json");
    if (!std::filesystem::exists(path)) path = scenario_dir_ / ref;
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::ConfigError, "unknown scenario '" + ref + "'");
    return path;
  }

  std::shared_ptr<Live> find(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    return it->second;
  }

  std::filesystem::path scenario_dir_;
  std::optional<std::filesystem::path> log_dir_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::vector<std::string> order_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return 400;
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::WrongPhase: return 409;
    default: return 500;
  }
}

class Gateway {
 public:
  explicit Gateway(SessionService& service, std::optional<std::filesystem::path> static_dir = {})
      : service_(service) {
    if (static_dir) server_.set_mount_point("/console", static_dir->string());
    routes();
  }

  ~Gateway() { stop(); }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::ConfigError, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Serves on the calling thread until stop().
  void serve(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error(ErrorCode::ConfigError, "cannot listen on port " + std::to_string(port));
  }

  void stop() {
    stopping_ = true;
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, const Error& e) {
    send_json(res, http_status(e.code()), {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}});
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::ConfigError, std::string("bad request body: ") + e.what()));
    }
  }

  void routes() {
    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = nlohmann::json::parse(req.body);
        const auto handle = service_.create_session(body.at("scenario").get<std::string>(),
                                                    parse_mode(body.value("mode", std::string("full"))),
                                                    body.value("seed", std::uint64_t{0}));
        send_json(res, 201, to_json(handle));
      });
    });

    server_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& h : service_.list()) list.push_back(to_json(h));
      send_json(res, 200, list);
    });

    server_.Post(R"(/sessions/([^/]+)/instructions)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = nlohmann::json::parse(req.body);
        const auto ack = service_.post_instruction(req.matches[1], body.at("text").get<std::string>());
        send_json(res, 200, {{"step", ack.step}, {"queue_position", ack.queue_position}});
      });
    });

    server_.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service_.get_state(req.matches[1])); });
    });

    server_.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        const int from = req.has_param("from") ? std::stoi(req.get_param_value("from")) : 0;
        const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
        service_.ended(id);  // UnknownSession before any bytes are sent

        if (!follow) {
          std::vector<SessionEvent> events;
          service_.read_events(id, from, events);
          res.set_content(serialize_log(events), "application/x-ndjson");
          return;
        }
        auto cursor = std::make_shared<int>(from);
        res.set_chunked_content_provider(
            "application/x-ndjson", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
              while (!stopping_) {
                std::vector<SessionEvent> batch;
                const bool more = service_.read_events(id, *cursor, batch, std::chrono::milliseconds(200));
                for (const auto& e : batch) {
                  const std::string line = to_json(e).dump() + "\n";
                  if (!sink.write(line.data(), line.size())) return false;
                  *cursor = e.step + 1;
                }
                if (!more || (batch.empty() && service_.ended(id))) {
                  sink.done();
                  return true;
                }
                if (!batch.empty()) return true;
                if (!sink.is_writable()) return false;
              }
              return false;
            });
      });
    });
  }

  SessionService& service_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = -1;
};

}  // namespace replan
