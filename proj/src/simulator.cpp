#include "pacebound/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacebound::sim {

namespace {

constexpr std::int64_t kMinuteMs = 60'000;
// Read decisions land uniformly in [0.3, 0.3 + window).
constexpr double kReadDecisionWindowS = 1.2;

double lognormal_cdf(double log_x, double mu, double sigma) {
    if (sigma <= 0.0) return log_x >= mu ? 1.0 : 0.0;
    return stats::normal_cdf((log_x - mu) / sigma);
}

}  // namespace

LogNormalParams calibrate_pauses(double target_p97_s, double sigma) {
    if (!(target_p97_s > 0.0)) {
        throw std::invalid_argument("calibration target must be positive");
    }
    if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
    return LogNormalParams{std::log(target_p97_s) - kZ97 * sigma, sigma};
}

double PauseModel::sample(Rng& rng) const {
    // component draw first, then the value draw; order is part of the
    // reproducibility contract
    const bool think = rng.uniform() < think_weight;
    return think ? rng.lognormal(think_mu, think_sigma)
                 : rng.lognormal(burst_mu, burst_sigma);
}

double PauseModel::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    const double lx = std::log(x);
    return (1.0 - think_weight) * lognormal_cdf(lx, burst_mu, burst_sigma) +
           think_weight * lognormal_cdf(lx, think_mu, think_sigma);
}

double PauseModel::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("quantile requires p in (0,1)");
    }
    const double spread = 12.0 * std::max(burst_sigma, think_sigma) + 1.0;
    double lo = std::min(burst_mu, think_mu) - spread;
    double hi = std::max(burst_mu, think_mu) + spread;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(std::exp(mid)) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::exp(0.5 * (lo + hi));
}

PauseModel PauseModel::scaled_to_p97(double target_p97_s) const {
    if (!(target_p97_s > 0.0)) {
        throw std::invalid_argument("calibration target must be positive");
    }
    const double shift = std::log(target_p97_s) - std::log(quantile(0.97));
    PauseModel out = *this;
    out.burst_mu += shift;
    out.think_mu += shift;
    return out;
}

void PauseModel::validate() const {
    if (burst_sigma < 0.0 || think_sigma < 0.0) {
        throw std::invalid_argument("pause sigmas must be non-negative");
    }
    if (!(think_weight >= 0.0 && think_weight <= 1.0)) {
        throw std::invalid_argument("think_weight must lie in [0,1]");
    }
}

PauseModel default_pause_model(DeveloperState state) {
    PauseModel base;
    base.burst_mu = std::log(0.25);
    base.burst_sigma = 0.5;
    base.think_mu = std::log(0.45);
    base.think_sigma = 1.0;
    base.think_weight = 0.15;
    const double target = state == DeveloperState::implementing
                              ? kIntervalP97Implementing
                              : kIntervalP97Debugging;
    return base.scaled_to_p97(target);
}

void BehaviorModel::validate() const {
    pauses_implementing.validate();
    pauses_debugging.validate();
    if (!(read_latency_s > 0.0)) {
        throw std::invalid_argument("read_latency_s must be > 0");
    }
    for (double p : {accept_prob_implementing, accept_prob_debugging}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("accept probabilities must lie in [0,1]");
        }
    }
    if (!(state_dwell_s > 0.0)) {
        throw std::invalid_argument("state_dwell_s must be > 0");
    }
}

DeveloperResponse developer_response(const BehaviorModel& model, Rng& rng,
                                     double pause_remaining_s, DeveloperState state) {
    if (pause_remaining_s < model.read_latency_s) {
        return DeveloperResponse{ResponseKind::blind_rejected,
                                 telemetry::kBlindThresholdS * rng.uniform()};
    }
    const bool accepted = rng.uniform() < model.accept_prob(state);
    const double decision_time =
        telemetry::kBlindThresholdS + kReadDecisionWindowS * rng.uniform();
    return DeveloperResponse{
        accepted ? ResponseKind::accepted : ResponseKind::rejected, decision_time};
}

telemetry::Phase phase_of(const PhasePolicy& policy) {
    if (std::holds_alternative<NoDelayPolicy>(policy)) return telemetry::Phase::no_delay;
    if (std::holds_alternative<StaticPolicy>(policy)) return telemetry::Phase::static_delay;
    return telemetry::Phase::adaptive;
}

void SimConfig::validate() const {
    if (duration_minutes < 1) {
        throw std::invalid_argument("duration_minutes must be >= 1");
    }
    behavior.validate();
    if (const auto* fixed = std::get_if<StaticPolicy>(&policy)) {
        if (fixed->delay_s < 0.0) {
            throw std::invalid_argument("static delay must be >= 0");
        }
    }
    if (const auto* adaptive = std::get_if<AdaptivePolicy>(&policy)) {
        adaptive->params.validate();
    }
}

SimResult simulate_session(const SimConfig& config) {
    config.validate();
    Rng rng(config.behavior.rng_seed);

    const std::int64_t minutes = config.duration_minutes;
    const double end_s = static_cast<double>(minutes) * 60.0;
    const std::int64_t end_ms = minutes * kMinuteMs;

    // State switch timeline: exponential dwell, alternating states. Drawn up
    // front so the schedule is independent of the policy under test.
    struct Segment {
        double start_s;
        DeveloperState state;
    };
    std::vector<Segment> segments;
    {
        double t = 0.0;
        DeveloperState s = config.initial_state;
        while (t < end_s) {
            segments.push_back(Segment{t, s});
            t += rng.exponential(config.behavior.state_dwell_s);
            s = s == DeveloperState::implementing ? DeveloperState::debugging
                                                  : DeveloperState::implementing;
        }
    }
    const auto state_at = [&](double t) {
        auto it = std::upper_bound(
            segments.begin(), segments.end(), t,
            [](double value, const Segment& seg) { return value < seg.start_s; });
        return std::prev(it)->state;
    };

    std::vector<DeveloperState> labels(static_cast<std::size_t>(minutes));
    for (std::int64_t m = 0; m < minutes; ++m) {
        labels[static_cast<std::size_t>(m)] = state_at(static_cast<double>(m) * 60.0);
    }

    std::vector<telemetry::Event> events;
    events.reserve(static_cast<std::size_t>(minutes) * 256 + 16);
    for (std::int64_t m = 0; m < minutes; ++m) {
        events.push_back(telemetry::Event::state_label(
            m * kMinuteMs, labels[static_cast<std::size_t>(m)]));
    }

    const bool adaptive = std::holds_alternative<AdaptivePolicy>(config.policy);
    const AdaptivePolicy adaptive_policy =
        adaptive ? std::get<AdaptivePolicy>(config.policy) : AdaptivePolicy{};
    Controller controller(labels[0], adaptive_policy.params, adaptive_policy.bands);

    std::vector<double> trace;
    if (adaptive) {
        trace.assign(static_cast<std::size_t>(minutes), 0.0);
        trace[0] = controller.current_delay();
    }
    std::vector<std::int64_t> accepted_in(static_cast<std::size_t>(minutes), 0);
    std::vector<std::int64_t> rejected_in(static_cast<std::size_t>(minutes), 0);

    const auto delay_for_minute = [&](std::int64_t m) {
        if (std::holds_alternative<NoDelayPolicy>(config.policy)) return 0.0;
        if (const auto* fixed = std::get_if<StaticPolicy>(&config.policy)) {
            return fixed->delay_s;
        }
        return trace[static_cast<std::size_t>(m)];
    };

    std::int64_t cur_minute = 0;
    const auto advance_to_minute = [&](std::int64_t target) {
        while (cur_minute < target) {
            if (adaptive) {
                const auto m = static_cast<std::size_t>(cur_minute);
                const double next = controller.update(
                    MinuteFeedback{accepted_in[m], rejected_in[m], labels[m]});
                trace[m + 1] = next;
            }
            ++cur_minute;
        }
    };

    stats::PhaseCounts counts;
    std::int64_t suggestion_counter = 0;
    double t = 0.0;
    while (t < end_s) {
        const auto ts = static_cast<std::int64_t>(std::llround(t * 1000.0));
        if (ts >= end_ms) break;
        const std::int64_t minute = ts / kMinuteMs;
        advance_to_minute(minute);
        events.push_back(telemetry::Event::keystroke(ts));

        const DeveloperState state = state_at(t);
        const double pause = config.behavior.pauses(state).sample(rng);
        const double delay = delay_for_minute(minute);
        if (pause > delay) {
            const double shown_t = t + delay;
            const auto shown_ts =
                static_cast<std::int64_t>(std::llround(shown_t * 1000.0));
            if (shown_ts < end_ms) {
                std::string id = "s" + std::to_string(++suggestion_counter);
                events.push_back(
                    telemetry::Event::suggestion_shown(shown_ts, id, delay));
                counts.n_total += 1;

                const DeveloperResponse response = developer_response(
                    config.behavior, rng, pause - delay, state_at(shown_t));
                auto decision_ts = static_cast<std::int64_t>(
                    std::llround((shown_t + response.decision_time_s) * 1000.0));
                decision_ts = std::min(decision_ts, end_ms - 1);
                const auto decision_minute =
                    static_cast<std::size_t>(decision_ts / kMinuteMs);

                if (response.kind == ResponseKind::accepted) {
                    events.push_back(telemetry::Event::suggestion_accepted(
                        decision_ts, std::move(id), response.decision_time_s));
                    accepted_in[decision_minute] += 1;
                    counts.k_accepted += 1;
                } else {
                    events.push_back(telemetry::Event::suggestion_rejected(
                        decision_ts, std::move(id), response.decision_time_s));
                    rejected_in[decision_minute] += 1;
                    if (response.kind == ResponseKind::blind_rejected) {
                        counts.n_blind += 1;
                    }
                }
            }
        }
        t += pause;
    }
    advance_to_minute(minutes - 1);

    std::stable_sort(events.begin(), events.end(),
                     [](const telemetry::Event& a, const telemetry::Event& b) {
                         return a.ts_ms < b.ts_ms;
                     });

    SimResult result;
    result.log.session_id =
        config.session_id.empty()
            ? "sim-" + std::string(telemetry::to_string(phase_of(config.policy))) +
                  "-" + std::to_string(config.behavior.rng_seed)
            : config.session_id;
    result.log.phase = phase_of(config.policy);
    result.log.events = std::move(events);
    result.delay_trace = std::move(trace);
    result.counts = counts;
    return result;
}

std::vector<double> sample_intervals(const PauseModel& model, std::size_t n,
                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> intervals;
    intervals.reserve(n);
    for (std::size_t i = 0; i < n; ++i) intervals.push_back(model.sample(rng));
    return intervals;
}

SweepCurves sweep_delay_curve(const DelayBands& bands, const ControllerParams& params,
                              std::span<const double> a_grid) {
    SweepCurves curves;
    for (double a : a_grid) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw std::invalid_argument("acceptance grid values must lie in [0,1]");
        }
        curves.implementing.push_back(
            SweepPoint{a, predicted_delay(bands.implementing, a, params)});
        curves.debugging.push_back(
            SweepPoint{a, predicted_delay(bands.debugging, a, params)});
    }
    return curves;
}

ReplayResult replay_log(const telemetry::SessionLog& log,
                        const ControllerParams& params, const DelayBands& bands) {
    if (log.phase != telemetry::Phase::adaptive) {
        throw std::invalid_argument("replay requires an adaptive-phase log");
    }
    ReplayResult result;
    if (log.events.empty()) return result;

    const auto summaries = telemetry::aggregate_minutes(log);
    const auto minutes = static_cast<std::int64_t>(summaries.size());

    std::vector<std::int64_t> accepted_in(summaries.size(), 0);
    std::vector<std::int64_t> rejected_in(summaries.size(), 0);
    for (const telemetry::Event& ev : log.events) {
        const auto m = static_cast<std::size_t>(ev.ts_ms / kMinuteMs);
        if (ev.kind == telemetry::EventKind::suggestion_accepted) {
            accepted_in[m] += 1;
        } else if (ev.kind == telemetry::EventKind::suggestion_rejected) {
            rejected_in[m] += 1;
        }
    }

    Controller controller(summaries[0].state, params, bands);
    result.trace.resize(summaries.size());
    result.trace[0] = controller.current_delay();
    for (std::int64_t m = 0; m + 1 < minutes; ++m) {
        const auto i = static_cast<std::size_t>(m);
        result.trace[i + 1] = controller.update(
            MinuteFeedback{accepted_in[i], rejected_in[i], summaries[i].state});
    }

    // Each suggestion was scheduled by the keystroke that opened its pause,
    // with the delay in effect during that keystroke's minute.
    std::int64_t last_keystroke_ts = -1;
    for (const telemetry::Event& ev : log.events) {
        if (ev.kind == telemetry::EventKind::keystroke) {
            last_keystroke_ts = ev.ts_ms;
        } else if (ev.kind == telemetry::EventKind::suggestion_shown) {
            const std::int64_t sched_ts =
                last_keystroke_ts >= 0 ? last_keystroke_ts : ev.ts_ms;
            const double expected =
                result.trace[static_cast<std::size_t>(sched_ts / kMinuteMs)];
            const double recorded = ev.delay_applied_s.value_or(0.0);
            result.max_abs_divergence =
                std::max(result.max_abs_divergence, std::fabs(recorded - expected));
            result.suggestions_compared += 1;
        }
    }
    return result;
}

}  // namespace pacebound::sim
