#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "pacebound/controller.hpp"
#include "pacebound/telemetry.hpp"

namespace pacebound::service {

struct ServiceConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    /// When set, every session appends its events to <log_dir>/<id>.jsonl in
    /// the session-log format.
    std::optional<std::filesystem::path> log_dir;
    ControllerParams params{};
    DelayBands bands{};
};

/// In-memory session store. The registry map and each session are guarded
/// independently, so requests for distinct sessions proceed in parallel.
/// Sessions apply the once-per-minute cadence by trusting the caller: each
/// minute_update is one aligned minute of feedback.
class SessionRegistry {
public:
    explicit SessionRegistry(ServiceConfig config);
    ~SessionRegistry();

    std::string create(DeveloperState initial_state,
                       std::optional<ControllerParams> params_override);
    /// nullopt when the session is unknown.
    std::optional<double> minute_update(const std::string& id,
                                        const MinuteFeedback& feedback);
    std::optional<double> current_delay(const std::string& id) const;

    enum class AppendStatus { ok, unknown_session, invalid_event };
    /// Validates the event against the log schema (including per-session
    /// timestamp ordering and suggestion references) and persists it when a
    /// log directory is configured. `error` receives the reason on
    /// invalid_event.
    AppendStatus append_event(const std::string& id,
                              const nlohmann::ordered_json& event,
                              std::string* error = nullptr);
    bool erase(const std::string& id);
    std::size_t live_sessions() const;

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;

    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t id_salt_;
    std::uint64_t counter_ = 0;
};

/// HTTP front end exposing the per-session timing API:
///   POST   /sessions                 -> {"session_id": ...}
///   POST   /sessions/{id}/minute     {"state","accepted","rejected"} -> {"delay_s": ...}
///   GET    /sessions/{id}/delay      -> {"delay_s": ...}
///   POST   /sessions/{id}/events     body = one session-log event object
///   DELETE /sessions/{id}
class HttpService {
public:
    explicit HttpService(ServiceConfig config);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds the configured address/port and serves until stopped.
    /// Throws std::runtime_error when the port is unavailable.
    void run();

    /// Binds (an ephemeral port when config.port == 0), serves on a
    /// background thread, and returns the bound port.
    int start_background();
    void stop();

    SessionRegistry& registry();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace pacebound::service
