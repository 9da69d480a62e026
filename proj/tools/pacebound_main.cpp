#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacebound/controller.hpp"
#include "pacebound/report.hpp"
#include "pacebound/service.hpp"
#include "pacebound/simulator.hpp"
#include "pacebound/telemetry.hpp"

namespace {

using namespace pacebound;

constexpr int kExitRuntimeError = 1;
constexpr int kExitUsageError = 2;

std::string format_double(const char* format, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, value);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << text;
}

struct ParamFlags {
    double gamma = ControllerParams{}.gamma;
    double a0 = ControllerParams{}.a0;
    double cap = ControllerParams{}.smoothing_cap;
    bool hold_idle = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--gamma", gamma, "Logistic steepness");
        cmd->add_option("--a0", a0, "Acceptance rate at the logistic inflection");
        cmd->add_option("--cap", cap, "Smoothing cap, seconds per update");
        cmd->add_flag("--hold-idle", hold_idle,
                      "Keep the delay unchanged on minutes without feedback");
    }
    ControllerParams params() const {
        ControllerParams p;
        p.gamma = gamma;
        p.a0 = a0;
        p.smoothing_cap = cap;
        p.idle_drift = !hold_idle;
        p.validate();
        return p;
    }
};

DeveloperState parse_state_flag(const std::string& text) {
    const auto state = state_from_string(text);
    if (!state) throw CLI::ValidationError("--state", "unknown developer state: " + text);
    return *state;
}

report::Format parse_format_flag(const std::string& text) {
    return text == "tsv" ? report::Format::tsv : report::Format::text;
}

// ---- step ------------------------------------------------------------------

void cmd_step(const std::string& state_text, std::int64_t accepted,
              std::int64_t rejected, double old_delay, const ParamFlags& flags) {
    const auto params = flags.params();
    const DeveloperState state = parse_state_flag(state_text);
    const DelayBand band = band_for_state(state);
    const double a = acceptance_rate(MinuteFeedback{accepted, rejected, state});
    const double predicted = predicted_delay(band, a, params);
    const double next = smooth_step(old_delay, predicted, params.smoothing_cap);
    std::cout << "delay_s=" << format_double("%.4f", next) << "\n";
}

// ---- simulate ---------------------------------------------------------------

struct SimulateFlags {
    std::int64_t minutes = 60;
    std::string policy = "adaptive";
    double static_delay = 1.1;
    std::uint64_t seed = 1;
    std::string out = "session.jsonl";
    std::string initial_state = "implementing";
    double state_dwell = 600.0;
    double read_latency = 0.4;
    double accept_implementing = sim::BehaviorModel{}.accept_prob_implementing;
    double accept_debugging = sim::BehaviorModel{}.accept_prob_debugging;
    std::string format = "text";
    ParamFlags params;
};

void cmd_simulate(const SimulateFlags& flags) {
    sim::SimConfig config;
    config.duration_minutes = flags.minutes;
    config.initial_state = parse_state_flag(flags.initial_state);
    config.behavior.rng_seed = flags.seed;
    config.behavior.state_dwell_s = flags.state_dwell;
    config.behavior.read_latency_s = flags.read_latency;
    config.behavior.accept_prob_implementing = flags.accept_implementing;
    config.behavior.accept_prob_debugging = flags.accept_debugging;
    if (flags.policy == "nodelay") {
        config.policy = sim::NoDelayPolicy{};
    } else if (flags.policy == "static") {
        config.policy = sim::StaticPolicy{flags.static_delay};
    } else {
        config.policy = sim::AdaptivePolicy{flags.params.params(), DelayBands{}};
    }

    const sim::SimResult result = sim::simulate_session(config);
    telemetry::write_log(result.log, flags.out);

    const auto& counts = result.counts;
    const auto rejected = counts.n_rejected();
    const double acceptance =
        counts.n_total > 0
            ? static_cast<double>(counts.k_accepted) / static_cast<double>(counts.n_total)
            : 0.0;
    const double blind_per_suggest =
        counts.n_total > 0
            ? static_cast<double>(counts.n_blind) / static_cast<double>(counts.n_total)
            : 0.0;
    const double blind_per_reject =
        rejected > 0 ? static_cast<double>(counts.n_blind) / static_cast<double>(rejected)
                     : 0.0;
    double mean_delay = 0.0;
    if (!result.delay_trace.empty()) {
        mean_delay = std::accumulate(result.delay_trace.begin(),
                                     result.delay_trace.end(), 0.0) /
                     static_cast<double>(result.delay_trace.size());
    } else if (const auto* fixed = std::get_if<sim::StaticPolicy>(&config.policy)) {
        mean_delay = fixed->delay_s;
    }

    if (flags.format == "tsv") {
        std::cout << "session_id\t" << result.log.session_id << "\n"
                  << "phase\t" << telemetry::to_string(result.log.phase) << "\n"
                  << "minutes\t" << flags.minutes << "\n"
                  << "suggestions\t" << counts.n_total << "\n"
                  << "accepted\t" << counts.k_accepted << "\n"
                  << "rejected\t" << rejected << "\n"
                  << "blind\t" << counts.n_blind << "\n"
                  << "acceptance_rate\t" << format_double("%.4f", acceptance) << "\n"
                  << "blind_per_suggest\t" << format_double("%.4f", blind_per_suggest)
                  << "\n"
                  << "blind_per_reject\t" << format_double("%.4f", blind_per_reject)
                  << "\n"
                  << "mean_delay_s\t" << format_double("%.4f", mean_delay) << "\n";
    } else {
        std::cout << "session " << result.log.session_id << " ("
                  << telemetry::to_string(result.log.phase) << ", " << flags.minutes
                  << " min) -> " << flags.out << "\n"
                  << "  suggestions=" << counts.n_total
                  << " accepted=" << counts.k_accepted << " rejected=" << rejected
                  << " blind=" << counts.n_blind << "\n"
                  << "  acceptance_rate=" << format_double("%.4f", acceptance)
                  << " blind_per_suggest=" << format_double("%.4f", blind_per_suggest)
                  << " blind_per_reject=" << format_double("%.4f", blind_per_reject)
                  << " mean_delay_s=" << format_double("%.4f", mean_delay) << "\n";
    }
}

// ---- replay ------------------------------------------------------------------

void cmd_replay(const std::string& log_path, const ParamFlags& flags, bool dump_trace) {
    const auto log = telemetry::read_log(log_path);
    const auto result = sim::replay_log(log, flags.params());
    if (dump_trace) {
        for (std::size_t m = 0; m < result.trace.size(); ++m) {
            std::cout << m << "\t" << format_double("%.6f", result.trace[m]) << "\n";
        }
    }
    std::cout << "minutes=" << result.trace.size()
              << " suggestions_compared=" << result.suggestions_compared
              << " max_abs_divergence=" << format_double("%.17g", result.max_abs_divergence)
              << "\n";
}

// ---- sweep -------------------------------------------------------------------

void cmd_sweep(double step, const std::string& out, const ParamFlags& flags) {
    if (!(step > 0.0 && step <= 1.0)) {
        throw CLI::ValidationError("--step", "grid step must lie in (0,1]");
    }
    std::vector<double> grid;
    for (double a = 0.0; a < 1.0 - 1e-12; a += step) grid.push_back(a);
    grid.push_back(1.0);

    const auto curves = sim::sweep_delay_curve(DelayBands{}, flags.params(), grid);
    std::string text;
    const auto emit = [&](const char* name, const std::vector<sim::SweepPoint>& points) {
        text += std::string("# state=") + name + "\n";
        for (const auto& point : points) {
            text += format_double("%g", point.acceptance) + "\t" +
                    format_double("%.6f", point.delay_s) + "\n";
        }
    };
    emit("implementing", curves.implementing);
    emit("debugging", curves.debugging);
    write_text(out, text);
}

// ---- eval --------------------------------------------------------------------

void cmd_eval(const std::vector<std::string>& log_paths, double blind_threshold,
              const std::string& format) {
    std::vector<report::PhaseRow> rows;
    for (const auto& path : log_paths) {
        const auto log = telemetry::read_log(path);
        report::PhaseRow row;
        row.name = std::filesystem::path(path).stem().string();
        row.counts = telemetry::phase_counts(log, blind_threshold);
        rows.push_back(std::move(row));
    }
    std::string text = report::render_phase_report(rows, parse_format_flag(format));
    const bool all_have_accepts = std::all_of(
        rows.begin(), rows.end(),
        [](const report::PhaseRow& row) { return row.counts.k_accepted >= 1; });
    if (all_have_accepts) {
        text += report::render_efficiency(rows, parse_format_flag(format));
    }
    std::cout << text;
}

// ---- derive-base ---------------------------------------------------------------

void cmd_derive_base(const std::vector<std::string>& log_paths, double percentile,
                     const std::string& format) {
    telemetry::StateIntervals merged;
    for (const auto& path : log_paths) {
        auto intervals = telemetry::keystroke_intervals(telemetry::read_log(path));
        merged.implementing.insert(merged.implementing.end(),
                                   intervals.implementing.begin(),
                                   intervals.implementing.end());
        merged.debugging.insert(merged.debugging.end(), intervals.debugging.begin(),
                                intervals.debugging.end());
    }
    const auto emit = [&](const char* name, const std::vector<double>& intervals) {
        if (format == "tsv") {
            std::cout << name << "\t" << intervals.size() << "\t";
            std::cout << (intervals.empty()
                              ? "n/a"
                              : format_double("%.4f", telemetry::nearest_rank_percentile(
                                                          intervals, percentile)))
                      << "\n";
            return;
        }
        std::cout << name << ": intervals=" << intervals.size();
        if (intervals.empty()) {
            std::cout << " base_delay_s=n/a\n";
        } else {
            std::cout << " percentile=" << format_double("%.2f", percentile)
                      << " base_delay_s="
                      << format_double("%.4f", telemetry::nearest_rank_percentile(
                                                   intervals, percentile))
                      << "\n";
        }
    };
    emit("implementing", merged.implementing);
    emit("debugging", merged.debugging);
}

// ---- serve ---------------------------------------------------------------------

void cmd_serve(const std::string& bind, int port, const std::string& log_dir,
               const ParamFlags& flags) {
    service::ServiceConfig config;
    config.bind_address = bind;
    config.port = port;
    config.params = flags.params();
    if (!log_dir.empty()) {
        config.log_dir = log_dir;
    } else if (const char* env_dir = std::getenv("PACEBOUND_LOG_DIR")) {
        config.log_dir = std::filesystem::path(env_dir);
    }
    service::HttpService svc(std::move(config));
    std::cout << "pacebound service starting on " << bind << ":" << port << "\n";
    svc.run();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pacebound - feedback-driven suggestion timing"};
    app.require_subcommand(1);

    // step
    auto* step = app.add_subcommand("step", "Run one controller update");
    std::string step_state;
    std::int64_t step_acc = 0;
    std::int64_t step_rej = 0;
    double step_old = 0.0;
    ParamFlags step_params;
    step->add_option("--state", step_state, "Developer state")
        ->required()
        ->check(CLI::IsMember({"implementing", "debugging"}));
    step->add_option("--acc", step_acc, "Suggestions accepted in the last minute")
        ->check(CLI::NonNegativeNumber);
    step->add_option("--rej", step_rej, "Suggestions rejected in the last minute")
        ->check(CLI::NonNegativeNumber);
    step->add_option("--old", step_old, "Previous delay, seconds")->required();
    step_params.attach(step);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a closed-loop session");
    SimulateFlags sim_flags;
    simulate->add_option("--minutes", sim_flags.minutes, "Session length, minutes")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--policy", sim_flags.policy, "Suggestion timing policy")
        ->check(CLI::IsMember({"nodelay", "static", "adaptive"}));
    simulate->add_option("--static-delay", sim_flags.static_delay,
                         "Fixed delay for --policy static, seconds");
    simulate->add_option("--seed", sim_flags.seed, "RNG seed");
    simulate->add_option("--out", sim_flags.out, "Session log output path");
    simulate->add_option("--initial-state", sim_flags.initial_state, "Starting state")
        ->check(CLI::IsMember({"implementing", "debugging"}));
    simulate->add_option("--state-dwell", sim_flags.state_dwell,
                         "Mean seconds between state switches");
    simulate->add_option("--read-latency", sim_flags.read_latency,
                         "Seconds a suggestion must be visible to be read");
    simulate->add_option("--accept-implementing", sim_flags.accept_implementing,
                         "Accept probability for read suggestions (implementing)");
    simulate->add_option("--accept-debugging", sim_flags.accept_debugging,
                         "Accept probability for read suggestions (debugging)");
    simulate->add_option("--format", sim_flags.format, "Summary format")
        ->check(CLI::IsMember({"text", "tsv"}));
    sim_flags.params.attach(simulate);

    // replay
    auto* replay = app.add_subcommand(
        "replay", "Recompute an adaptive log's delay trace and report divergence");
    std::string replay_log_path;
    bool replay_dump_trace = false;
    ParamFlags replay_params;
    replay->add_option("log", replay_log_path, "Session log path")->required();
    replay->add_flag("--trace", replay_dump_trace, "Print the per-minute delay trace");
    replay_params.attach(replay);

    // sweep
    auto* sweep = app.add_subcommand(
        "sweep", "Emit the delay-vs-acceptance curve for both states");
    double sweep_step = 0.01;
    std::string sweep_out;
    ParamFlags sweep_params;
    sweep->add_option("--step", sweep_step, "Acceptance grid step");
    sweep->add_option("--out", sweep_out, "Output path (stdout when omitted)");
    sweep_params.attach(sweep);

    // eval
    auto* eval = app.add_subcommand("eval", "Compute phase metrics from session logs");
    std::vector<std::string> eval_logs;
    double eval_threshold = telemetry::kBlindThresholdS;
    std::string eval_format = "text";
    eval->add_option("logs", eval_logs, "Session log paths")->required();
    eval->add_option("--blind-threshold", eval_threshold,
                     "Blind rejection threshold, seconds");
    eval->add_option("--format", eval_format, "Output format")
        ->check(CLI::IsMember({"text", "tsv"}));

    // derive-base
    auto* derive = app.add_subcommand(
        "derive-base", "Derive per-state base delays from logged typing intervals");
    std::vector<std::string> derive_logs;
    double derive_percentile = 0.97;
    std::string derive_format = "text";
    derive->add_option("logs", derive_logs, "Session log paths")->required();
    derive->add_option("--percentile", derive_percentile, "Percentile in (0,1]")
        ->check(CLI::Range(0.0, 1.0));
    derive->add_option("--format", derive_format, "Output format")
        ->check(CLI::IsMember({"text", "tsv"}));

    // reproduce-tables
    auto* tables = app.add_subcommand(
        "reproduce-tables", "Print the deployment metrics report");
    std::string tables_out;
    tables->add_option("--out", tables_out, "Output path (stdout when omitted)");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the session timing HTTP service");
    std::string serve_bind = "127.0.0.1";
    int serve_port = 8080;
    std::string serve_log_dir;
    ParamFlags serve_params;
    serve->add_option("--bind", serve_bind, "Bind address");
    serve->add_option("--port", serve_port, "Port")->check(CLI::Range(0, 65535));
    serve->add_option("--log-dir", serve_log_dir,
                      "Event persistence directory (default: $PACEBOUND_LOG_DIR)");
    serve_params.attach(serve);

    try {
        app.parse(argc, argv);
        if (step->parsed()) {
            cmd_step(step_state, step_acc, step_rej, step_old, step_params);
        } else if (simulate->parsed()) {
            cmd_simulate(sim_flags);
        } else if (replay->parsed()) {
            cmd_replay(replay_log_path, replay_params, replay_dump_trace);
        } else if (sweep->parsed()) {
            cmd_sweep(sweep_step, sweep_out, sweep_params);
        } else if (eval->parsed()) {
            cmd_eval(eval_logs, eval_threshold, eval_format);
        } else if (derive->parsed()) {
            cmd_derive_base(derive_logs, derive_percentile, derive_format);
        } else if (tables->parsed()) {
            write_text(tables_out, report::render_tables());
        } else if (serve->parsed()) {
            cmd_serve(serve_bind, serve_port, serve_log_dir, serve_params);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    return 0;
}
