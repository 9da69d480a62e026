#include "pacebound/service.hpp"

#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "pacebound/stateinfer.hpp"

namespace pacebound::service {

using nlohmann::json;
using nlohmann::ordered_json;

struct SessionRegistry::Session {
    Session(DeveloperState initial_state, const ControllerParams& params,
            const DelayBands& bands)
        : controller(initial_state, params, bands) {}

    std::mutex mutex;
    Controller controller;
    std::ofstream sink;
    std::int64_t last_event_ts = -1;
    std::unordered_set<std::string> shown_ids;
};

SessionRegistry::SessionRegistry(ServiceConfig config) : config_(std::move(config)) {
    config_.params.validate();
    std::random_device rd;
    id_salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

SessionRegistry::~SessionRegistry() = default;

std::string SessionRegistry::create(DeveloperState initial_state,
                                    std::optional<ControllerParams> params_override) {
    const ControllerParams params = params_override.value_or(config_.params);
    params.validate();
    auto session = std::make_shared<Session>(initial_state, params, config_.bands);

    std::lock_guard lock(mutex_);
    std::string id;
    do {
        const std::uint64_t tag = id_salt_ ^ (0x9e3779b97f4a7c15ULL * ++counter_);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s-%012llx",
                      static_cast<unsigned long long>(tag & 0xffffffffffffULL));
        id = buf;
    } while (sessions_.contains(id));

    if (config_.log_dir) {
        std::filesystem::create_directories(*config_.log_dir);
        session->sink.open(*config_.log_dir / (id + ".jsonl"),
                           std::ios::binary | std::ios::trunc);
        ordered_json header;
        header["schema"] = "pacebound-log";
        header["version"] = 1;
        header["session_id"] = id;
        header["phase"] = to_string(telemetry::Phase::adaptive);
        session->sink << header.dump() << '\n';
        session->sink.flush();
    }
    sessions_.emplace(id, std::move(session));
    return id;
}

std::shared_ptr<SessionRegistry::Session> SessionRegistry::find(
    const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::optional<double> SessionRegistry::minute_update(const std::string& id,
                                                     const MinuteFeedback& feedback) {
    const auto session = find(id);
    if (!session) return std::nullopt;
    std::lock_guard lock(session->mutex);
    return session->controller.update(feedback);
}

std::optional<double> SessionRegistry::current_delay(const std::string& id) const {
    const auto session = find(id);
    if (!session) return std::nullopt;
    std::lock_guard lock(session->mutex);
    return session->controller.current_delay();
}

SessionRegistry::AppendStatus SessionRegistry::append_event(
    const std::string& id, const ordered_json& event, std::string* error) {
    const auto session = find(id);
    if (!session) return AppendStatus::unknown_session;

    telemetry::Event parsed;
    try {
        parsed = telemetry::event_from_json(event);
    } catch (const telemetry::LogFormatError& e) {
        if (error) *error = e.what();
        return AppendStatus::invalid_event;
    }

    std::lock_guard lock(session->mutex);
    if (parsed.ts_ms < session->last_event_ts) {
        if (error) *error = "event timestamp precedes the session's last event";
        return AppendStatus::invalid_event;
    }
    if (parsed.kind == telemetry::EventKind::suggestion_shown) {
        session->shown_ids.insert(*parsed.suggestion_id);
    } else if (parsed.kind == telemetry::EventKind::suggestion_accepted ||
               parsed.kind == telemetry::EventKind::suggestion_rejected) {
        if (!session->shown_ids.contains(*parsed.suggestion_id)) {
            if (error) *error = "decision references a suggestion that was never shown";
            return AppendStatus::invalid_event;
        }
    }
    session->last_event_ts = parsed.ts_ms;
    if (session->sink.is_open()) {
        session->sink << telemetry::to_json(parsed).dump() << '\n';
        session->sink.flush();
    }
    return AppendStatus::ok;
}

bool SessionRegistry::erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
}

std::size_t SessionRegistry::live_sessions() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

// ---------------------------------------------------------------------------

struct HttpService::Impl {
    explicit Impl(ServiceConfig service_config)
        : config(std::move(service_config)), registry(config) {
        // address reuse only; a port with a live listener must fail to bind
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                       reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        wire_routes();
    }

    void wire_routes();

    ServiceConfig config;
    SessionRegistry registry;
    httplib::Server server;
    std::thread worker;
};

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply_json(res, status, json{{"error", message}});
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        reply_error(res, 400, std::string("invalid JSON body: ") + e.what());
        return std::nullopt;
    }
}

}  // namespace

void HttpService::Impl::wire_routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, res);
        if (!body) return;

        DeveloperState initial = DeveloperState::implementing;
        if (body->contains("state")) {
            const auto state = state_from_string((*body)["state"].get<std::string>());
            if (!state) {
                reply_error(res, 400, "state must be \"implementing\" or \"debugging\"");
                return;
            }
            initial = *state;
        }
        std::optional<ControllerParams> params;
        if (body->contains("gamma") || body->contains("a0") ||
            body->contains("smoothing_cap") || body->contains("idle_drift")) {
            ControllerParams p = config.params;
            if (body->contains("gamma")) p.gamma = (*body)["gamma"].get<double>();
            if (body->contains("a0")) p.a0 = (*body)["a0"].get<double>();
            if (body->contains("smoothing_cap")) {
                p.smoothing_cap = (*body)["smoothing_cap"].get<double>();
            }
            if (body->contains("idle_drift")) {
                p.idle_drift = (*body)["idle_drift"].get<bool>();
            }
            try {
                p.validate();
            } catch (const std::invalid_argument& e) {
                reply_error(res, 400, e.what());
                return;
            }
            params = p;
        }
        reply_json(res, 200, json{{"session_id", registry.create(initial, params)}});
    });

    server.Post(R"(/sessions/([^/]+)/minute)",
                [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, res);
        if (!body) return;

        MinuteFeedback feedback;
        std::string classifier_source;
        if (body->contains("state")) {
            if (!(*body)["state"].is_string()) {
                reply_error(res, 400, "\"state\" must be a string");
                return;
            }
            const auto state = state_from_string((*body)["state"].get<std::string>());
            if (!state) {
                reply_error(res, 400,
                            "state must be \"implementing\" or \"debugging\"");
                return;
            }
            feedback.state = *state;
        } else if (body->contains("summary") && (*body)["summary"].is_object()) {
            // no explicit state: classify the posted minute summary, remotely
            // when a classifier endpoint is configured
            const auto& s = (*body)["summary"];
            telemetry::MinuteSummary summary;
            summary.typing_speed_cps = s.value("typing_speed_cps", 0.0);
            summary.keystroke_count = s.value("keystroke_count", 0);
            summary.edit_count = s.value("edit_count", 0);
            summary.navigation_count = s.value("navigation_count", 0);
            summary.command_count = s.value("command_count", 0);
            summary.idle_seconds = s.value("idle_seconds", 0.0);
            const std::string diff = body->value("diff", "");
            const auto remote = stateinfer::RemoteClassifierConfig::from_env();
            const auto result =
                remote.endpoint_url.empty()
                    ? stateinfer::classify_heuristic(summary)
                    : stateinfer::classify_remote(remote, summary, diff);
            feedback.state = result.state;
            classifier_source = stateinfer::to_string(result.source);
        } else {
            reply_error(res, 400, "missing \"state\" (or a \"summary\" to classify)");
            return;
        }

        feedback.accepted = body->value("accepted", 0);
        feedback.rejected = body->value("rejected", 0);
        if (feedback.accepted < 0 || feedback.rejected < 0) {
            reply_error(res, 400, "accepted/rejected must be non-negative");
            return;
        }
        const auto delay = registry.minute_update(req.matches[1], feedback);
        if (!delay) {
            reply_error(res, 404, "unknown session");
            return;
        }
        json reply{{"delay_s", *delay}};
        if (!classifier_source.empty()) {
            reply["state"] = to_string(feedback.state);
            reply["classifier"] = classifier_source;
        }
        reply_json(res, 200, reply);
    });

    server.Get(R"(/sessions/([^/]+)/delay)",
               [this](const httplib::Request& req, httplib::Response& res) {
        const auto delay = registry.current_delay(req.matches[1]);
        if (!delay) {
            reply_error(res, 404, "unknown session");
            return;
        }
        reply_json(res, 200, json{{"delay_s", *delay}});
    });

    server.Post(R"(/sessions/([^/]+)/events)",
                [this](const httplib::Request& req, httplib::Response& res) {
        ordered_json event;
        try {
            event = ordered_json::parse(req.body);
        } catch (const json::parse_error& e) {
            reply_error(res, 400, std::string("invalid JSON body: ") + e.what());
            return;
        }
        std::string error;
        switch (registry.append_event(req.matches[1], event, &error)) {
            case SessionRegistry::AppendStatus::ok:
                reply_json(res, 200, json{{"ok", true}});
                return;
            case SessionRegistry::AppendStatus::unknown_session:
                reply_error(res, 404, "unknown session");
                return;
            case SessionRegistry::AppendStatus::invalid_event:
                reply_error(res, 400, error);
                return;
        }
    });

    server.Delete(R"(/sessions/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
        if (!registry.erase(req.matches[1])) {
            reply_error(res, 404, "unknown session");
            return;
        }
        reply_json(res, 200, json{{"ok", true}});
    });
}

HttpService::HttpService(ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpService::~HttpService() { stop(); }

void HttpService::run() {
    if (!impl_->server.bind_to_port(impl_->config.bind_address, impl_->config.port)) {
        throw std::runtime_error("cannot bind " + impl_->config.bind_address + ":" +
                                 std::to_string(impl_->config.port));
    }
    impl_->server.listen_after_bind();
}

int HttpService::start_background() {
    int port = impl_->config.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->config.bind_address);
        if (port <= 0) {
            throw std::runtime_error("cannot bind an ephemeral port on " +
                                     impl_->config.bind_address);
        }
    } else if (!impl_->server.bind_to_port(impl_->config.bind_address, port)) {
        throw std::runtime_error("cannot bind " + impl_->config.bind_address + ":" +
                                 std::to_string(port));
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void HttpService::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

SessionRegistry& HttpService::registry() { return impl_->registry; }

}  // namespace pacebound::service
