#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "pacebound/controller.hpp"

namespace {

struct CliResult {
    int exit_code;
    std::string output;
};

std::string cli_binary() {
    const char* bin = std::getenv("PACEBOUND_CLI_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "PACEBOUND_CLI_BIN must point at the CLI binary");
    return bin;
}

CliResult run_cli(const std::string& args) {
    const std::string command = cli_binary() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char buffer[4096];
    while (const size_t n = fread(buffer, 1, sizeof(buffer), pipe)) {
        output.append(buffer, n);
    }
    const int status = pclose(pipe);
    return CliResult{WIFEXITED(status) ? WEXITSTATUS(status) : -1, output};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("step prints the updated delay") {
    const auto idle = run_cli("step --state implementing --acc 0 --rej 0 --old 1.10");
    CHECK(idle.exit_code == 0);
    CHECK(idle.output == "delay_s=1.2000\n");

    const auto perfect = run_cli("step --state implementing --acc 10 --rej 0 --old 0.85");
    CHECK(perfect.exit_code == 0);
    CHECK(perfect.output == "delay_s=0.8000\n");

    const auto debugging = run_cli("step --state debugging --acc 0 --rej 0 --old 1.30");
    CHECK(debugging.exit_code == 0);
    CHECK(debugging.output == "delay_s=1.4000\n");
}

TEST_CASE("chained step calls track an in-process controller") {
    // the stateless CLI, fed its own output, must walk the same delay
    // sequence as a live controller
    pacebound::Controller controller(pacebound::DeveloperState::implementing);
    double cli_delay = 1.10;
    const struct {
        const char* state;
        int accepted;
        int rejected;
    } minutes[] = {{"implementing", 0, 0}, {"implementing", 3, 7},
                   {"debugging", 1, 4},    {"implementing", 9, 1},
                   {"debugging", 0, 0},    {"implementing", 10, 0}};
    for (const auto& minute : minutes) {
        char args[160];
        std::snprintf(args, sizeof(args),
                      "step --state %s --acc %d --rej %d --old %.17g", minute.state,
                      minute.accepted, minute.rejected, cli_delay);
        const auto result = run_cli(args);
        REQUIRE(result.exit_code == 0);
        REQUIRE(std::sscanf(result.output.c_str(), "delay_s=%lf", &cli_delay) == 1);
        const double direct = controller.update(pacebound::MinuteFeedback{
            minute.accepted, minute.rejected,
            *pacebound::state_from_string(minute.state)});
        // the CLI round-trips through its 4-decimal output format
        CHECK(std::fabs(cli_delay - direct) < 1e-3);
    }
}

TEST_CASE("step rejects unknown states with a usage error") {
    const auto bogus = run_cli("step --state bogus --acc 0 --rej 0 --old 1.10");
    CHECK(bogus.exit_code == 2);
    CHECK(bogus.output.find("bogus") != std::string::npos);

    const auto missing = run_cli("step");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("reproduce-tables matches the golden file") {
    const char* golden_dir = std::getenv("PACEBOUND_GOLDEN_DIR");
    REQUIRE_MESSAGE(golden_dir != nullptr, "PACEBOUND_GOLDEN_DIR must be set");
    const auto result = run_cli("reproduce-tables");
    CHECK(result.exit_code == 0);
    const std::string golden =
        read_file(std::filesystem::path(golden_dir) / "reproduce_tables.txt");
    CHECK(result.output == golden);
}

TEST_CASE("simulate is reproducible and validates flags") {
    const auto out_a = temp_path("pacebound_cli_a.jsonl");
    const auto out_b = temp_path("pacebound_cli_b.jsonl");
    const std::string flags =
        " --minutes 15 --seed 33 --policy adaptive --format tsv --out ";
    const auto first = run_cli("simulate" + flags + out_a.string());
    const auto second = run_cli("simulate" + flags + out_b.string());
    CHECK(first.exit_code == 0);
    CHECK(second.exit_code == 0);
    CHECK(first.output == second.output);
    CHECK(read_file(out_a) == read_file(out_b));

    const auto invalid = run_cli("simulate --minutes 0");
    CHECK(invalid.exit_code == 2);

    std::filesystem::remove(out_a);
    std::filesystem::remove(out_b);
}

TEST_CASE("nodelay and adaptive summaries order blind ratios") {
    const auto out = temp_path("pacebound_cli_dir.jsonl");
    const auto nodelay = run_cli("simulate --minutes 120 --seed 5 --policy nodelay "
                                 "--format tsv --out " + out.string());
    const auto adaptive = run_cli("simulate --minutes 120 --seed 5 --policy adaptive "
                                  "--format tsv --out " + out.string());
    CHECK(nodelay.exit_code == 0);
    CHECK(adaptive.exit_code == 0);

    const auto extract = [](const std::string& text, const std::string& key) {
        const auto pos = text.find(key + "\t");
        REQUIRE(pos != std::string::npos);
        return std::stod(text.substr(pos + key.size() + 1));
    };
    CHECK(extract(nodelay.output, "blind_per_suggest") >
          extract(adaptive.output, "blind_per_suggest"));
    std::filesystem::remove(out);
}

TEST_CASE("replay reports zero divergence on a fresh adaptive log") {
    const auto out = temp_path("pacebound_cli_replay.jsonl");
    const auto sim = run_cli("simulate --minutes 45 --seed 11 --policy adaptive --out " +
                             out.string());
    CHECK(sim.exit_code == 0);
    const auto replay = run_cli("replay " + out.string());
    CHECK(replay.exit_code == 0);
    CHECK(replay.output.find("max_abs_divergence=0\n") != std::string::npos);
    std::filesystem::remove(out);
}

TEST_CASE("replay on a missing file is a runtime error") {
    const auto missing = run_cli("replay /nonexistent/log.jsonl");
    CHECK(missing.exit_code == 1);
    CHECK(missing.output.find("error") != std::string::npos);
}

TEST_CASE("sweep emits both band endpoints") {
    const auto result = run_cli("sweep --step 0.5");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("# state=implementing\n0\t1.400000\n") !=
          std::string::npos);
    CHECK(result.output.find("1\t0.800000\n") != std::string::npos);
    CHECK(result.output.find("# state=debugging\n0\t1.600000\n") != std::string::npos);
    CHECK(result.output.find("1\t1.000000\n") != std::string::npos);
}

TEST_CASE("derive-base recovers the calibration targets from logs") {
    const auto impl_log = temp_path("pacebound_cli_impl.jsonl");
    const auto debug_log = temp_path("pacebound_cli_debug.jsonl");
    // single-state sessions: dwell far beyond the session length
    const auto sim_impl = run_cli(
        "simulate --minutes 360 --seed 17 --policy static --initial-state implementing "
        "--state-dwell 1e9 --out " + impl_log.string());
    const auto sim_debug = run_cli(
        "simulate --minutes 360 --seed 18 --policy static --initial-state debugging "
        "--state-dwell 1e9 --out " + debug_log.string());
    CHECK(sim_impl.exit_code == 0);
    CHECK(sim_debug.exit_code == 0);

    const auto derived = run_cli("derive-base --format tsv " + impl_log.string() + " " +
                                 debug_log.string());
    CHECK(derived.exit_code == 0);

    double implementing = 0.0;
    double debugging = 0.0;
    std::istringstream lines(derived.output);
    std::string state;
    long long count = 0;
    double value = 0.0;
    while (lines >> state >> count >> value) {
        if (state == "implementing") implementing = value;
        if (state == "debugging") debugging = value;
    }
    CHECK(std::fabs(implementing - 1.068) < 0.05);
    CHECK(std::fabs(debugging - 1.293) < 0.05);

    std::filesystem::remove(impl_log);
    std::filesystem::remove(debug_log);
}

TEST_CASE("eval reports zero blind ratios when every rejection was read") {
    const auto log_path = temp_path("pacebound_cli_eval.jsonl");
    {
        std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
        out << R"({"schema":"pacebound-log","version":1,"session_id":"e","phase":"static"})"
            << "\n"
            << R"({"ts_ms":100,"kind":"suggestion_shown","suggestion_id":"s1","delay_applied_s":1.1})"
            << "\n"
            << R"({"ts_ms":800,"kind":"suggestion_rejected","suggestion_id":"s1","decision_time_s":0.7})"
            << "\n"
            << R"({"ts_ms":2000,"kind":"suggestion_shown","suggestion_id":"s2","delay_applied_s":1.1})"
            << "\n"
            << R"({"ts_ms":2600,"kind":"suggestion_accepted","suggestion_id":"s2","decision_time_s":0.6})"
            << "\n";
    }
    const auto result = run_cli("eval --format tsv " + log_path.string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("blind\tpacebound_cli_eval\t0\t1\t0\t0\n") !=
          std::string::npos);
    std::filesystem::remove(log_path);
}

TEST_CASE("unknown subcommands are usage errors") {
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
}

}  // TEST_SUITE
