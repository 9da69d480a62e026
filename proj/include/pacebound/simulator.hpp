#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pacebound/controller.hpp"
#include "pacebound/evalstats.hpp"
#include "pacebound/rng.hpp"
#include "pacebound/telemetry.hpp"

namespace pacebound::sim {

/// z-score of the 97th percentile of the standard normal, as used by the
/// closed-form log-normal calibration.
inline constexpr double kZ97 = 1.8808;

/// Default 97th-percentile inter-keystroke interval targets the simulated
/// pause models are calibrated to, per developer state (seconds).
inline constexpr double kIntervalP97Implementing = 1.068;
inline constexpr double kIntervalP97Debugging = 1.293;

struct LogNormalParams {
    double mu;
    double sigma;

    double p97() const { return std::exp(mu + kZ97 * sigma); }
};

/// Inverts the log-normal percentile formula: given the desired 97th
/// percentile and a fixed sigma, returns mu = ln(target) - z97*sigma, so the
/// analytic p97 of the result equals the target.
LogNormalParams calibrate_pauses(double target_p97_s, double sigma);

/// Inter-keystroke pause distribution: a mixture of two log-normals, short
/// intra-typing gaps plus a heavier-tailed reflective-pause component.
/// A pure log-normal is the think_weight = 0 special case.
struct PauseModel {
    double burst_mu = 0.0;
    double burst_sigma = 0.0;
    double think_mu = 0.0;
    double think_sigma = 0.0;
    double think_weight = 0.0;

    double sample(Rng& rng) const;
    double cdf(double x) const;
    double quantile(double p) const;

    /// Shifts both components by a common log-offset so quantile(0.97)
    /// equals `target_p97_s` exactly (scaling every pause by one factor).
    PauseModel scaled_to_p97(double target_p97_s) const;

    void validate() const;
};

/// Default pause model for a state, calibrated to the state's p97 target.
PauseModel default_pause_model(DeveloperState state);

/// Generative model of a developer's reactions. Not a behavioral twin: the
/// pieces exist to reproduce the mechanisms the metrics measure (pause
/// structure, blind dismissal, probabilistic acceptance), not magnitudes.
struct BehaviorModel {
    PauseModel pauses_implementing = default_pause_model(DeveloperState::implementing);
    PauseModel pauses_debugging = default_pause_model(DeveloperState::debugging);
    /// A suggestion must be visible at least this long before the developer
    /// can evaluate it; anything shorter is dismissed blind.
    double read_latency_s = 0.4;
    double accept_prob_implementing = 0.18;
    double accept_prob_debugging = 0.10;
    /// Mean dwell time of the two-state Markov switch process.
    double state_dwell_s = 600.0;
    std::uint64_t rng_seed = 1;

    const PauseModel& pauses(DeveloperState state) const {
        return state == DeveloperState::implementing ? pauses_implementing
                                                     : pauses_debugging;
    }
    double accept_prob(DeveloperState state) const {
        return state == DeveloperState::implementing ? accept_prob_implementing
                                                     : accept_prob_debugging;
    }
    void validate() const;
};

enum class ResponseKind { accepted, rejected, blind_rejected };

struct DeveloperResponse {
    ResponseKind kind;
    double decision_time_s;
};

/// Reaction to one shown suggestion. pause_remaining_s is how long the
/// developer's current pause still lasts when the suggestion appears: below
/// read_latency_s it is blind-rejected (decision in [0, 0.3)); otherwise it
/// is read and accepted with the state's probability, decided in [0.3, 1.5).
DeveloperResponse developer_response(const BehaviorModel& model, Rng& rng,
                                     double pause_remaining_s, DeveloperState state);

struct NoDelayPolicy {};

struct StaticPolicy {
    double delay_s = 1.1;
};

struct AdaptivePolicy {
    ControllerParams params{};
    DelayBands bands{};
};

using PhasePolicy = std::variant<NoDelayPolicy, StaticPolicy, AdaptivePolicy>;

telemetry::Phase phase_of(const PhasePolicy& policy);

struct SimConfig {
    std::int64_t duration_minutes = 60;
    BehaviorModel behavior{};
    PhasePolicy policy = AdaptivePolicy{};
    DeveloperState initial_state = DeveloperState::implementing;
    std::string session_id;  ///< defaults to "sim-<phase>-<seed>"

    void validate() const;
};

struct SimResult {
    telemetry::SessionLog log;
    /// Adaptive runs only: the delay in effect during each minute.
    std::vector<double> delay_trace;
    stats::PhaseCounts counts;
};

/// Runs one closed-loop session: keystrokes separated by sampled pauses, a
/// suggestion whenever a pause outlasts the policy's current delay, developer
/// responses per developer_response, and (adaptive policy) one controller
/// update per aligned minute. Fully reproducible from the seed.
SimResult simulate_session(const SimConfig& config);

/// Draws n pauses from the model; the raw-interval sample the base-delay
/// calibration round-trips through.
std::vector<double> sample_intervals(const PauseModel& model, std::size_t n,
                                     std::uint64_t seed);

struct SweepPoint {
    double acceptance;
    double delay_s;
};

struct SweepCurves {
    std::vector<SweepPoint> implementing;
    std::vector<SweepPoint> debugging;
};

/// Pure evaluation of the predicted delay over an acceptance-rate grid for
/// both states; plot-ready data for the delay-vs-acceptance curve.
SweepCurves sweep_delay_curve(const DelayBands& bands, const ControllerParams& params,
                              std::span<const double> a_grid);

struct ReplayResult {
    std::vector<double> trace;
    double max_abs_divergence = 0.0;
    std::size_t suggestions_compared = 0;
};

/// Recomputes the adaptive delay trace from a recorded log (per-minute state
/// labels plus decision counts) and compares it against the delays recorded
/// on suggestion_shown events. Requires an adaptive-phase log.
ReplayResult replay_log(const telemetry::SessionLog& log,
                        const ControllerParams& params = {},
                        const DelayBands& bands = {});

}  // namespace pacebound::sim
