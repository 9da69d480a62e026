#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "pacebound/controller.hpp"
#include "pacebound/evalstats.hpp"
#include "pacebound/report.hpp"
#include "pacebound/simulator.hpp"
#include "pacebound/stateinfer.hpp"
#include "pacebound/telemetry.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace pacebound;

namespace {

ControllerParams make_params(double gamma, double a0, double cap, bool idle_drift) {
    ControllerParams params;
    params.gamma = gamma;
    params.a0 = a0;
    params.smoothing_cap = cap;
    params.idle_drift = idle_drift;
    params.validate();
    return params;
}

sim::PhasePolicy make_policy(const std::string& policy, double static_delay,
                             const ControllerParams& params) {
    if (policy == "nodelay") return sim::NoDelayPolicy{};
    if (policy == "static") return sim::StaticPolicy{static_delay};
    if (policy == "adaptive") return sim::AdaptivePolicy{params, DelayBands{}};
    throw std::invalid_argument("policy must be nodelay, static or adaptive");
}

py::dict test_result_dict(const stats::TestResult& result) {
    py::dict out;
    out["z"] = result.z ? py::object(py::float_(*result.z)) : py::none();
    out["p_value"] = result.p_value;
    out["method"] =
        result.method == stats::TestMethod::pooled_z ? "pooled_z" : "fisher_exact";
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Feedback-driven suggestion timing: bounded delay controller, "
              "session simulator, and deployment statistics";

    py::enum_<DeveloperState>(m, "DeveloperState")
        .value("implementing", DeveloperState::implementing)
        .value("debugging", DeveloperState::debugging);

    py::class_<DelayBand>(m, "DelayBand")
        .def(py::init(&DelayBand::checked), "d_min"_a, "d_max"_a)
        .def_readonly("d_min", &DelayBand::d_min)
        .def_readonly("d_max", &DelayBand::d_max)
        .def_property_readonly("base", &DelayBand::base)
        .def_property_readonly("gain", &DelayBand::gain)
        .def("__repr__", [](const DelayBand& band) {
            return "DelayBand(d_min=" + std::to_string(band.d_min) +
                   ", d_max=" + std::to_string(band.d_max) + ")";
        });

    m.def("band_for_state", &band_for_state, "state"_a,
          "Delay band anchored to a developer state");

    py::class_<Controller>(m, "Controller")
        .def(py::init([](DeveloperState initial_state, double gamma, double a0,
                         double cap, bool idle_drift) {
                 return Controller(initial_state,
                                   make_params(gamma, a0, cap, idle_drift));
             }),
             "initial_state"_a = DeveloperState::implementing, "gamma"_a = 10.0,
             "a0"_a = 0.15, "smoothing_cap"_a = 0.10, "idle_drift"_a = true)
        .def(
            "update",
            [](Controller& controller, DeveloperState state, std::int64_t accepted,
               std::int64_t rejected) {
                return controller.update(MinuteFeedback{accepted, rejected, state});
            },
            "state"_a, "accepted"_a, "rejected"_a,
            "Apply one minute of feedback; returns the new delay in seconds")
        .def_property_readonly("current_delay", &Controller::current_delay);

    m.def(
        "acceptance_rate",
        [](std::int64_t accepted, std::int64_t rejected) {
            return acceptance_rate(MinuteFeedback{accepted, rejected,
                                                  DeveloperState::implementing});
        },
        "accepted"_a, "rejected"_a);
    m.def("scaled_logistic", &scaled_logistic, "x"_a);
    m.def(
        "normalized_score",
        [](double a, double gamma, double a0) {
            return normalized_score(a, make_params(gamma, a0, 0.10, true));
        },
        "a"_a, "gamma"_a = 10.0, "a0"_a = 0.15);
    m.def(
        "predicted_delay",
        [](DeveloperState state, double a, double gamma, double a0) {
            return predicted_delay(band_for_state(state), a,
                                   make_params(gamma, a0, 0.10, true));
        },
        "state"_a, "a"_a, "gamma"_a = 10.0, "a0"_a = 0.15);
    m.def("smooth_step", &smooth_step, "d_old"_a, "d_pred"_a, "cap"_a = 0.10);

    // --- statistics ---------------------------------------------------------
    py::class_<stats::PhaseCounts>(m, "PhaseCounts")
        .def(py::init([](std::int64_t n_total, std::int64_t k_accepted,
                         std::int64_t n_blind) {
                 stats::PhaseCounts counts{n_total, k_accepted, n_blind};
                 counts.validate();
                 return counts;
             }),
             "n_total"_a, "k_accepted"_a, "n_blind"_a = 0)
        .def_readonly("n_total", &stats::PhaseCounts::n_total)
        .def_readonly("k_accepted", &stats::PhaseCounts::k_accepted)
        .def_readonly("n_blind", &stats::PhaseCounts::n_blind)
        .def_property_readonly("n_rejected", &stats::PhaseCounts::n_rejected);

    m.def(
        "wald_estimate",
        [](std::int64_t n, std::int64_t k, double z_crit) {
            const auto est = stats::wald_estimate(n, k, z_crit);
            return py::dict("rate"_a = est.rate, "se"_a = est.se,
                            "ci_low"_a = est.ci_low, "ci_high"_a = est.ci_high);
        },
        "n"_a, "k"_a, "z_crit"_a = stats::kDefaultZCrit);
    m.def(
        "two_proportion_z",
        [](std::int64_t n1, std::int64_t k1, std::int64_t n2, std::int64_t k2) {
            return test_result_dict(stats::two_proportion_z(n1, k1, n2, k2));
        },
        "n1"_a, "k1"_a, "n2"_a, "k2"_a);
    m.def(
        "blind_ratio_tests",
        [](const stats::PhaseCounts& a, const stats::PhaseCounts& b) {
            return test_result_dict(stats::blind_ratio_tests(a, b));
        },
        "phase_a"_a, "phase_b"_a);
    m.def(
        "fisher_exact_2x2",
        [](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
            return test_result_dict(stats::fisher_exact_2x2(a, b, c, d));
        },
        "a"_a, "b"_a, "c"_a, "d"_a);
    m.def(
        "blind_ratios",
        [](const stats::PhaseCounts& counts) {
            const auto ratios = stats::blind_ratios(counts);
            return py::make_tuple(ratios.per_reject, ratios.per_suggest);
        },
        "counts"_a, "Returns (blind/rejections, blind/suggestions)");
    m.def("calls_per_accept", &stats::calls_per_accept, "counts"_a);
    m.def(
        "cost_savings",
        [](const stats::PhaseCounts& phase_a, const stats::PhaseCounts& phase_b,
           std::int64_t accepted_target, std::int64_t tokens_per_call,
           double price_per_1k_tokens) {
            const stats::Money price{
                static_cast<std::int64_t>(std::llround(price_per_1k_tokens * 1e6))};
            return stats::cost_savings(phase_a, phase_b, accepted_target,
                                       tokens_per_call, price)
                .units();
        },
        "phase_a"_a, "phase_b"_a, "accepted_target"_a = 1000,
        "tokens_per_call"_a = report::kTokensPerCall,
        "price_per_1k_tokens"_a = report::kPricePer1kTokens.units());
    m.def("normal_cdf", &stats::normal_cdf, "x"_a);
    m.def("reproduce_tables", &report::render_tables,
          "Deployment metrics report as text");

    // --- state inference ------------------------------------------------------
    py::class_<telemetry::MinuteSummary>(m, "MinuteSummary")
        .def(py::init([](std::int64_t minute_index, double typing_speed_cps,
                         std::int64_t keystroke_count, std::int64_t edit_count,
                         std::int64_t navigation_count, std::int64_t command_count,
                         double idle_seconds, DeveloperState state) {
                 telemetry::MinuteSummary summary;
                 summary.minute_index = minute_index;
                 summary.typing_speed_cps = typing_speed_cps;
                 summary.keystroke_count = keystroke_count;
                 summary.edit_count = edit_count;
                 summary.navigation_count = navigation_count;
                 summary.command_count = command_count;
                 summary.idle_seconds = idle_seconds;
                 summary.state = state;
                 return summary;
             }),
             "minute_index"_a = 0, "typing_speed_cps"_a = 0.0,
             "keystroke_count"_a = 0, "edit_count"_a = 0, "navigation_count"_a = 0,
             "command_count"_a = 0, "idle_seconds"_a = 0.0,
             "state"_a = DeveloperState::implementing)
        .def_readwrite("minute_index", &telemetry::MinuteSummary::minute_index)
        .def_readwrite("typing_speed_cps", &telemetry::MinuteSummary::typing_speed_cps)
        .def_readwrite("keystroke_count", &telemetry::MinuteSummary::keystroke_count)
        .def_readwrite("edit_count", &telemetry::MinuteSummary::edit_count)
        .def_readwrite("navigation_count", &telemetry::MinuteSummary::navigation_count)
        .def_readwrite("command_count", &telemetry::MinuteSummary::command_count)
        .def_readwrite("idle_seconds", &telemetry::MinuteSummary::idle_seconds)
        .def_readwrite("state", &telemetry::MinuteSummary::state);

    m.def(
        "classify_heuristic",
        [](const telemetry::MinuteSummary& summary) {
            const auto result = stateinfer::classify_heuristic(summary);
            return py::dict("state"_a = result.state,
                            "confidence"_a = result.confidence,
                            "source"_a = stateinfer::to_string(result.source));
        },
        "summary"_a);
    m.def("build_prompt", &stateinfer::build_prompt, "summary"_a, "diff"_a = "");
    m.def(
        "parse_state_response",
        [](const std::string& text) -> py::object {
            const auto state = stateinfer::parse_state_response(text);
            return state ? py::cast(*state) : py::none();
        },
        "text"_a);

    // --- telemetry -------------------------------------------------------------
    m.def("nearest_rank_percentile", &telemetry::nearest_rank_percentile, "values"_a,
          "percentile"_a);
    m.def(
        "derive_base_delays",
        [](const std::vector<double>& implementing,
           const std::vector<double>& debugging, double percentile) {
            const auto base =
                telemetry::derive_base_delays(implementing, debugging, percentile);
            return py::make_tuple(base.implementing, base.debugging);
        },
        "implementing_intervals"_a, "debugging_intervals"_a, "percentile"_a = 0.97);

    // --- simulator ---------------------------------------------------------------
    m.def(
        "calibrate_pauses",
        [](double target_p97_s, double sigma) {
            const auto params = sim::calibrate_pauses(target_p97_s, sigma);
            return py::make_tuple(params.mu, params.sigma);
        },
        "target_p97_s"_a, "sigma"_a = 0.6);
    m.def(
        "sample_intervals",
        [](DeveloperState state, std::size_t n, std::uint64_t seed) {
            return sim::sample_intervals(sim::default_pause_model(state), n, seed);
        },
        "state"_a, "n"_a, "seed"_a = 1);
    m.def(
        "sweep_delay_curve",
        [](double step, double gamma, double a0) {
            std::vector<double> grid;
            for (double a = 0.0; a < 1.0 - 1e-12; a += step) grid.push_back(a);
            grid.push_back(1.0);
            const auto curves = sim::sweep_delay_curve(
                DelayBands{}, make_params(gamma, a0, 0.10, true), grid);
            const auto to_list = [](const std::vector<sim::SweepPoint>& points) {
                py::list out;
                for (const auto& point : points) {
                    out.append(py::make_tuple(point.acceptance, point.delay_s));
                }
                return out;
            };
            return py::dict("implementing"_a = to_list(curves.implementing),
                            "debugging"_a = to_list(curves.debugging));
        },
        "step"_a = 0.01, "gamma"_a = 10.0, "a0"_a = 0.15);
    m.def(
        "simulate_session",
        [](std::int64_t minutes, const std::string& policy, double static_delay,
           std::uint64_t seed, DeveloperState initial_state, double state_dwell_s,
           double read_latency_s, double gamma, double a0, double cap,
           const std::string& out) {
            sim::SimConfig config;
            config.duration_minutes = minutes;
            config.initial_state = initial_state;
            config.behavior.rng_seed = seed;
            config.behavior.state_dwell_s = state_dwell_s;
            config.behavior.read_latency_s = read_latency_s;
            config.policy =
                make_policy(policy, static_delay, make_params(gamma, a0, cap, true));
            const auto result = sim::simulate_session(config);
            if (!out.empty()) telemetry::write_log(result.log, out);
            return py::dict(
                "session_id"_a = result.log.session_id,
                "phase"_a = telemetry::to_string(result.log.phase),
                "events"_a = result.log.events.size(),
                "n_total"_a = result.counts.n_total,
                "k_accepted"_a = result.counts.k_accepted,
                "n_blind"_a = result.counts.n_blind,
                "delay_trace"_a = result.delay_trace);
        },
        "minutes"_a = 60, "policy"_a = "adaptive", "static_delay"_a = 1.1,
        "seed"_a = 1, "initial_state"_a = DeveloperState::implementing,
        "state_dwell_s"_a = 600.0, "read_latency_s"_a = 0.4, "gamma"_a = 10.0,
        "a0"_a = 0.15, "smoothing_cap"_a = 0.10, "out"_a = "");
    m.def(
        "replay_log",
        [](const std::string& path, double gamma, double a0, double cap) {
            const auto result = sim::replay_log(telemetry::read_log(path),
                                                make_params(gamma, a0, cap, true));
            return py::dict("trace"_a = result.trace,
                            "max_abs_divergence"_a = result.max_abs_divergence,
                            "suggestions_compared"_a = result.suggestions_compared);
        },
        "path"_a, "gamma"_a = 10.0, "a0"_a = 0.15, "smoothing_cap"_a = 0.10);

    m.attr("__version__") = "0.1.0";
}
