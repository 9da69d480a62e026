#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pacebound/telemetry.hpp"

using namespace pacebound;
using namespace pacebound::telemetry;

namespace {

SessionLog sample_log() {
    SessionLog log;
    log.session_id = "t-1";
    log.phase = Phase::adaptive;
    log.events.push_back(Event::state_label(0, DeveloperState::implementing));
    log.events.push_back(Event::keystroke(100));
    log.events.push_back(Event::keystroke(700));
    log.events.push_back(Event::suggestion_shown(1800, "s1", 1.1));
    log.events.push_back(Event::suggestion_rejected(1900, "s1", 0.1));
    log.events.push_back(Event::suggestion_shown(4000, "s2", 1.1));
    log.events.push_back(Event::suggestion_accepted(4800, "s2", 0.8));
    MinuteSummary minute;
    minute.minute_index = 0;
    minute.navigation_count = 3;
    minute.command_count = 1;
    minute.edit_count = 2;
    log.events.push_back(Event::minute_summary(59000, minute));
    log.events.push_back(Event::state_label(60000, DeveloperState::debugging));
    log.events.push_back(Event::keystroke(61000));
    return log;
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("aggregate_minutes on an empty log") {
    CHECK(aggregate_minutes(SessionLog{}).empty());
}

TEST_CASE("aggregate_minutes computes typing speed over the fixed window") {
    SessionLog log;
    log.session_id = "speed";
    for (int i = 0; i < 120; ++i) {
        log.events.push_back(Event::keystroke(i * 500));  // one every 0.5 s
    }
    const auto summaries = aggregate_minutes(log);
    REQUIRE(summaries.size() == 1);
    CHECK(summaries[0].typing_speed_cps == doctest::Approx(2.0));
    CHECK(summaries[0].keystroke_count == 120);
    CHECK(summaries[0].idle_seconds == 0.0);
}

TEST_CASE("aggregate_minutes partitions events across minutes") {
    SessionLog log;
    log.session_id = "span";
    for (std::int64_t ts : {0, 30000, 65000, 125000, 179000}) {
        log.events.push_back(Event::keystroke(ts));
    }
    const auto summaries = aggregate_minutes(log);
    REQUIRE(summaries.size() == 3);
    CHECK(summaries[0].keystroke_count == 2);
    CHECK(summaries[1].keystroke_count == 1);
    CHECK(summaries[2].keystroke_count == 2);
    CHECK(summaries[0].minute_index == 0);
    CHECK(summaries[2].minute_index == 2);

    std::int64_t total = 0;
    for (const auto& s : summaries) total += s.keystroke_count;
    CHECK(total == 5);
}

TEST_CASE("aggregate_minutes carries state labels forward and merges counters") {
    const auto summaries = aggregate_minutes(sample_log());
    REQUIRE(summaries.size() == 2);
    CHECK(summaries[0].state == DeveloperState::implementing);
    CHECK(summaries[1].state == DeveloperState::debugging);
    CHECK(summaries[0].navigation_count == 3);
    CHECK(summaries[0].command_count == 1);
    CHECK(summaries[0].edit_count == 2);
    CHECK(summaries[1].navigation_count == 0);
    // both keystrokes land in the first second bucket: 59 empty buckets
    CHECK(summaries[0].idle_seconds == 59.0);
}

TEST_CASE("property: minute aggregation is a partition of keystrokes") {
    std::mt19937 gen(47);
    std::uniform_int_distribution<std::int64_t> gaps(1, 4000);
    for (int run = 0; run < 50; ++run) {
        SessionLog log;
        log.session_id = "p";
        std::int64_t ts = 0;
        std::int64_t keystrokes = 0;
        for (int i = 0; i < 300; ++i) {
            ts += gaps(gen);
            log.events.push_back(Event::keystroke(ts));
            ++keystrokes;
        }
        std::int64_t total = 0;
        for (const auto& s : aggregate_minutes(log)) total += s.keystroke_count;
        CHECK(total == keystrokes);
    }
}

TEST_CASE("aggregate_minutes rejects unordered events") {
    SessionLog log;
    log.events.push_back(Event::keystroke(100));
    log.events.push_back(Event::keystroke(50));
    CHECK_THROWS_AS(aggregate_minutes(log), std::invalid_argument);
}

TEST_CASE("typing intervals filter and invert speeds") {
    std::vector<MinuteSummary> summaries(4);
    summaries[0].typing_speed_cps = 2.0;
    summaries[1].typing_speed_cps = 0.0;  // excluded: no typing
    summaries[2].typing_speed_cps = 6.0;  // excluded: above the 5 cps filter
    summaries[3].typing_speed_cps = 5.0;  // boundary included
    const auto intervals = typing_intervals(summaries);
    REQUIRE(intervals.size() == 2);
    CHECK(intervals[0] == doctest::Approx(0.5));
    CHECK(intervals[1] == doctest::Approx(0.2));
    for (double v : intervals) CHECK(v >= 0.2);
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i * 0.01);
    CHECK(nearest_rank_percentile(hundred, 0.97) == doctest::Approx(0.97));
    CHECK(nearest_rank_percentile({0.5}, 0.97) == doctest::Approx(0.5));

    // permutation invariance and monotonicity in the percentile
    std::mt19937 gen(53);
    std::vector<double> values(257);
    std::uniform_real_distribution<double> xs(0.0, 10.0);
    for (auto& v : values) v = xs(gen);
    auto shuffled = values;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    double previous = -1.0;
    for (double p : {0.01, 0.25, 0.5, 0.75, 0.97, 1.0}) {
        const double value = nearest_rank_percentile(values, p);
        CHECK(value == nearest_rank_percentile(shuffled, p));
        CHECK(value == doctest::Approx(oracle::percentile_nearest_rank(values, p)));
        CHECK(value >= previous);
        previous = value;
    }
    CHECK_THROWS_AS(nearest_rank_percentile({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(nearest_rank_percentile({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("derive_base_delays names the empty state") {
    const std::vector<double> some{0.5, 0.7};
    CHECK_THROWS_WITH_AS(derive_base_delays({}, some, 0.97),
                         doctest::Contains("implementing"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(derive_base_delays(some, {}, 0.97),
                         doctest::Contains("debugging"), std::invalid_argument);
    const auto base = derive_base_delays(some, some, 0.97);
    CHECK(base.implementing == doctest::Approx(0.7));
    CHECK(base.debugging == doctest::Approx(0.7));
}

TEST_CASE("classify_rejection") {
    SuggestionRecord rec;
    rec.outcome = SuggestionOutcome::rejected;
    rec.decision_time_s = 0.1;
    CHECK(classify_rejection(rec) == RejectionKind::blind);
    rec.decision_time_s = 0.3;  // boundary counts as read
    CHECK(classify_rejection(rec) == RejectionKind::read);
    rec.decision_time_s = 2.0;
    CHECK(classify_rejection(rec) == RejectionKind::read);
    rec.outcome = SuggestionOutcome::accepted;
    CHECK_THROWS_AS(classify_rejection(rec), std::invalid_argument);
}

TEST_CASE("log serialization round-trips byte-for-byte") {
    const SessionLog log = sample_log();
    const std::string once = serialize_log(log);
    std::istringstream in(once);
    const SessionLog parsed = parse_log(in);
    CHECK(parsed.session_id == log.session_id);
    CHECK(parsed.phase == log.phase);
    REQUIRE(parsed.events.size() == log.events.size());
    CHECK(serialize_log(parsed) == once);
}

TEST_CASE("unknown fields survive a round-trip") {
    const std::string text =
        R"({"schema":"pacebound-log","version":1,"session_id":"x","phase":"static"})"
        "\n"
        R"({"ts_ms":5,"kind":"keystroke","weight":1.5,"tag":"a"})"
        "\n";
    std::istringstream in(text);
    const SessionLog parsed = parse_log(in);
    REQUIRE(parsed.events.size() == 1);
    CHECK(parsed.events[0].extras.at("weight").get<double>() == 1.5);
    CHECK(parsed.phase == Phase::static_delay);
    const std::string out = serialize_log(parsed);
    CHECK(out.find("\"weight\":1.5") != std::string::npos);
    CHECK(out.find("\"tag\":\"a\"") != std::string::npos);
}

TEST_CASE("parse errors carry line numbers") {
    const std::string header =
        R"({"schema":"pacebound-log","version":1,"session_id":"x","phase":"adaptive"})"
        "\n";

    SUBCASE("decreasing timestamps") {
        std::istringstream in(header +
                              R"({"ts_ms":100,"kind":"keystroke"})" "\n" +
                              R"({"ts_ms":50,"kind":"keystroke"})" "\n");
        try {
            parse_log(in);
            FAIL("expected LogFormatError");
        } catch (const LogFormatError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }

    SUBCASE("truncated final line") {
        std::istringstream in(header +
                              R"({"ts_ms":100,"kind":"keystroke"})" "\n" +
                              R"({"ts_ms":200,"kind":"keyst)");
        try {
            parse_log(in);
            FAIL("expected LogFormatError");
        } catch (const LogFormatError& e) {
            CHECK(e.line() == 3);
        }
    }

    SUBCASE("unknown kind") {
        std::istringstream in(header + R"({"ts_ms":1,"kind":"mouse"})" "\n");
        CHECK_THROWS_AS(parse_log(in), LogFormatError);
    }

    SUBCASE("decision without a shown suggestion") {
        std::istringstream in(
            header +
            R"({"ts_ms":1,"kind":"suggestion_accepted","suggestion_id":"zz"})" "\n");
        CHECK_THROWS_AS(parse_log(in), LogFormatError);
    }

    SUBCASE("blank interior line") {
        std::istringstream in(header + "\n" + R"({"ts_ms":1,"kind":"keystroke"})" "\n");
        CHECK_THROWS_AS(parse_log(in), LogFormatError);
    }

    SUBCASE("wrong schema") {
        std::istringstream in(
            std::string(R"({"schema":"other","version":1,"session_id":"x","phase":"adaptive"})") +
            "\n");
        CHECK_THROWS_AS(parse_log(in), LogFormatError);
    }

    SUBCASE("empty input") {
        std::istringstream in("");
        CHECK_THROWS_AS(parse_log(in), LogFormatError);
    }
}

TEST_CASE("file round-trip") {
    const auto path = std::filesystem::temp_directory_path() / "pacebound_rt.jsonl";
    const SessionLog log = sample_log();
    write_log(log, path);
    const SessionLog parsed = read_log(path);
    CHECK(serialize_log(parsed) == serialize_log(log));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_log(path), std::runtime_error);
}

TEST_CASE("suggestion records join decisions with shown events") {
    const auto records = suggestion_records(sample_log());
    REQUIRE(records.size() == 2);
    CHECK(records[0].suggestion_id == "s1");
    CHECK(records[0].outcome == SuggestionOutcome::rejected);
    CHECK(records[0].decision_time_s == doctest::Approx(0.1));
    CHECK(records[0].delay_applied_s == doctest::Approx(1.1));
    CHECK(records[1].outcome == SuggestionOutcome::accepted);
}

TEST_CASE("decision time falls back to the timestamp difference") {
    SessionLog log;
    log.session_id = "d";
    log.events.push_back(Event::suggestion_shown(1000, "s1", 0.9));
    Event decision = Event::suggestion_rejected(1250, "s1", 0.0);
    decision.decision_time_s.reset();
    log.events.push_back(decision);
    const auto records = suggestion_records(log);
    REQUIRE(records.size() == 1);
    CHECK(records[0].decision_time_s == doctest::Approx(0.25));
    CHECK(classify_rejection(records[0]) == RejectionKind::blind);
}

TEST_CASE("phase counts partition rejections into blind and read") {
    const auto counts = phase_counts(sample_log());
    CHECK(counts.n_total == 2);
    CHECK(counts.k_accepted == 1);
    CHECK(counts.n_blind == 1);

    std::int64_t blind = 0;
    std::int64_t read = 0;
    for (const auto& rec : suggestion_records(sample_log())) {
        if (rec.outcome != SuggestionOutcome::rejected) continue;
        (classify_rejection(rec) == RejectionKind::blind ? blind : read) += 1;
    }
    CHECK(blind + read == counts.n_rejected());
}

TEST_CASE("keystroke intervals attribute gaps to the labeled state") {
    SessionLog log;
    log.session_id = "g";
    log.events.push_back(Event::state_label(0, DeveloperState::implementing));
    log.events.push_back(Event::keystroke(0));
    log.events.push_back(Event::keystroke(400));
    log.events.push_back(Event::keystroke(59800));
    log.events.push_back(Event::state_label(60000, DeveloperState::debugging));
    log.events.push_back(Event::keystroke(60200));
    log.events.push_back(Event::keystroke(61000));

    const auto intervals = keystroke_intervals(log);
    REQUIRE(intervals.implementing.size() == 3);
    REQUIRE(intervals.debugging.size() == 1);
    CHECK(intervals.implementing[0] == doctest::Approx(0.4));
    CHECK(intervals.implementing[2] == doctest::Approx(0.4));  // opens in minute 0
    CHECK(intervals.debugging[0] == doctest::Approx(0.8));
}

}  // TEST_SUITE
