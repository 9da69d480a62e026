#include <doctest.h>

#include <filesystem>

#include <httplib.h>
#include <json.hpp>

#include "pacebound/service.hpp"
#include "pacebound/telemetry.hpp"

using namespace pacebound;
using nlohmann::json;

namespace {

struct LiveService {
    explicit LiveService(service::ServiceConfig config = {}) : svc([&] {
        config.port = 0;
        return config;
    }()) {
        port = svc.start_background();
    }

    httplib::Client client() {
        httplib::Client c("127.0.0.1", port);
        c.set_connection_timeout(std::chrono::seconds(5));
        c.set_read_timeout(std::chrono::seconds(5));
        return c;
    }

    std::string create_session(const json& body = json::object()) {
        auto c = client();
        const auto res = c.Post("/sessions", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    double post_minute(const std::string& id, const std::string& state,
                       int accepted, int rejected) {
        auto c = client();
        const json body{{"state", state}, {"accepted", accepted}, {"rejected", rejected}};
        const auto res =
            c.Post("/sessions/" + id + "/minute", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        return json::parse(res->body)["delay_s"].get<double>();
    }

    service::HttpService svc;
    int port = 0;
};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("fresh session drifts by one cap on an empty minute") {
    LiveService live;
    const auto id = live.create_session();
    CHECK(live.post_minute(id, "implementing", 0, 0) == doctest::Approx(1.20).epsilon(1e-9));
}

TEST_CASE("unknown session ids answer 404") {
    LiveService live;
    auto client = live.client();
    const json body{{"state", "implementing"}, {"accepted", 0}, {"rejected", 0}};
    const auto res =
        client.Post("/sessions/nope/minute", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body).contains("error"));

    const auto get = client.Get("/sessions/nope/delay");
    REQUIRE(get);
    CHECK(get->status == 404);

    const auto del = client.Delete("/sessions/nope");
    REQUIRE(del);
    CHECK(del->status == 404);
}

TEST_CASE("sessions are isolated") {
    LiveService live;
    const auto a = live.create_session();
    const auto b = live.create_session();
    CHECK(a != b);

    // starve session a for three minutes; feed b perfect acceptance
    double delay_a = 0.0;
    double delay_b = 0.0;
    for (int i = 0; i < 3; ++i) {
        delay_a = live.post_minute(a, "implementing", 0, 0);
        delay_b = live.post_minute(b, "implementing", 10, 0);
    }
    CHECK(delay_a == doctest::Approx(1.40).epsilon(1e-9));
    CHECK(delay_b == doctest::Approx(0.80).epsilon(1e-9));

    auto client = live.client();
    const auto get = client.Get("/sessions/" + a + "/delay");
    REQUIRE(get);
    CHECK(json::parse(get->body)["delay_s"].get<double>() ==
          doctest::Approx(1.40).epsilon(1e-9));
}

TEST_CASE("session creation accepts an initial state and overrides") {
    LiveService live;
    const auto id = live.create_session({{"state", "debugging"}});
    auto client = live.client();
    const auto get = client.Get("/sessions/" + id + "/delay");
    REQUIRE(get);
    CHECK(json::parse(get->body)["delay_s"].get<double>() ==
          doctest::Approx(1.30).epsilon(1e-9));

    const auto bad = client.Post("/sessions", R"({"state":"refactoring"})",
                                 "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    const auto custom = live.create_session({{"smoothing_cap", 0.05}});
    CHECK(live.post_minute(custom, "implementing", 0, 0) ==
          doctest::Approx(1.15).epsilon(1e-9));
}

TEST_CASE("minute updates validate their body") {
    LiveService live;
    const auto id = live.create_session();
    auto client = live.client();

    const auto missing =
        client.Post("/sessions/" + id + "/minute", "{}", "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 400);

    const auto negative = client.Post(
        "/sessions/" + id + "/minute",
        R"({"state":"implementing","accepted":-1,"rejected":0})", "application/json");
    REQUIRE(negative);
    CHECK(negative->status == 400);

    const auto garbage =
        client.Post("/sessions/" + id + "/minute", "not json", "application/json");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);
}

TEST_CASE("service matches the direct controller on a feedback sequence") {
    LiveService live;
    const auto id = live.create_session();
    Controller controller(DeveloperState::implementing);

    const struct {
        const char* state;
        int accepted;
        int rejected;
    } minutes[] = {{"implementing", 0, 0},  {"implementing", 4, 6},
                   {"debugging", 1, 9},     {"debugging", 0, 0},
                   {"implementing", 8, 2},  {"implementing", 10, 0},
                   {"debugging", 2, 2},     {"implementing", 0, 10}};
    for (const auto& minute : minutes) {
        const double via_http =
            live.post_minute(id, minute.state, minute.accepted, minute.rejected);
        const double direct = controller.update(MinuteFeedback{
            minute.accepted, minute.rejected, *state_from_string(minute.state)});
        CHECK(via_http == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("minute updates can classify a posted summary") {
    LiveService live;
    const auto id = live.create_session();
    auto client = live.client();

    // fast typing, no other signals: the heuristic says implementing, whose
    // empty-feedback drift is +0.10 toward the implementing band top
    const json body{{"summary", {{"typing_speed_cps", 4.0}}},
                    {"accepted", 0},
                    {"rejected", 0}};
    const auto res =
        client.Post("/sessions/" + id + "/minute", body.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto reply = json::parse(res->body);
    CHECK(reply["delay_s"].get<double>() == doctest::Approx(1.20).epsilon(1e-9));
    CHECK(reply["state"] == "implementing");
    CHECK(reply["classifier"] == "heuristic");
}

TEST_CASE("deleted sessions disappear") {
    LiveService live;
    const auto id = live.create_session();
    auto client = live.client();
    const auto del = client.Delete("/sessions/" + id);
    REQUIRE(del);
    CHECK(del->status == 200);
    const auto get = client.Get("/sessions/" + id + "/delay");
    REQUIRE(get);
    CHECK(get->status == 404);
}

TEST_CASE("a busy port is a startup error") {
    LiveService live;
    service::ServiceConfig config;
    config.port = live.port;  // already taken
    service::HttpService second(config);
    CHECK_THROWS_AS(second.start_background(), std::runtime_error);
}

TEST_CASE("event persistence writes a valid session log") {
    const auto dir =
        std::filesystem::temp_directory_path() / "pacebound_service_logs";
    std::filesystem::remove_all(dir);
    service::ServiceConfig config;
    config.log_dir = dir;
    LiveService live(config);

    const auto id = live.create_session();
    auto client = live.client();
    const auto post_event = [&](const json& event) {
        return client.Post("/sessions/" + id + "/events", event.dump(),
                           "application/json");
    };

    auto ok = post_event({{"ts_ms", 100}, {"kind", "keystroke"}});
    REQUIRE(ok);
    CHECK(ok->status == 200);
    ok = post_event({{"ts_ms", 900},
                     {"kind", "suggestion_shown"},
                     {"suggestion_id", "s1"},
                     {"delay_applied_s", 1.1}});
    REQUIRE(ok);
    CHECK(ok->status == 200);
    ok = post_event({{"ts_ms", 1400},
                     {"kind", "suggestion_accepted"},
                     {"suggestion_id", "s1"},
                     {"decision_time_s", 0.5}});
    REQUIRE(ok);
    CHECK(ok->status == 200);

    // schema violations are rejected
    auto bad = post_event({{"ts_ms", 2000}, {"kind", "mouse"}});
    REQUIRE(bad);
    CHECK(bad->status == 400);
    bad = post_event({{"ts_ms", 50}, {"kind", "keystroke"}});  // goes backward
    REQUIRE(bad);
    CHECK(bad->status == 400);
    bad = post_event({{"ts_ms", 2100},
                      {"kind", "suggestion_rejected"},
                      {"suggestion_id", "never-shown"}});
    REQUIRE(bad);
    CHECK(bad->status == 400);

    const auto log = telemetry::read_log(dir / (id + ".jsonl"));
    CHECK(log.session_id == id);
    REQUIRE(log.events.size() == 3);
    const auto counts = telemetry::phase_counts(log);
    CHECK(counts.n_total == 1);
    CHECK(counts.k_accepted == 1);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
