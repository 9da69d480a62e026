#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace pacebound {

/// High-level cognitive mode of the developer. The state anchors the delay
/// band the controller is allowed to move in; it never triggers suggestions
/// by itself.
enum class DeveloperState { implementing, debugging };

std::string_view to_string(DeveloperState state);
std::optional<DeveloperState> state_from_string(std::string_view text);

/// Per-state delay band [d_min, d_max] in seconds. Base delay and gain are
/// derived, so the algebraic identities (1-k)*base == d_min and
/// (1+k)*base == d_max hold by construction.
struct DelayBand {
    double d_min;
    double d_max;

    double base() const { return 0.5 * (d_min + d_max); }
    double gain() const { return (d_max - d_min) / (d_max + d_min); }

    /// Validating constructor; throws std::invalid_argument unless
    /// 0 < d_min < d_max.
    static DelayBand checked(double d_min, double d_max);
};

/// Deployment delay ranges by predicted developer state.
struct DelayBands {
    DelayBand implementing{0.80, 1.40};
    DelayBand debugging{1.00, 1.60};

    const DelayBand& for_state(DeveloperState state) const {
        return state == DeveloperState::implementing ? implementing : debugging;
    }
};

/// Fixed default band for a state (see DelayBands).
DelayBand band_for_state(DeveloperState state);

/// Tunables of the adaptive delay controller. Defaults are the production
/// values: logistic steepness 10 centered at 15% acceptance, 0.10 s per-update
/// smoothing cap, one update per minute.
struct ControllerParams {
    double gamma = 10.0;          ///< logistic steepness
    double a0 = 0.15;             ///< acceptance rate at the logistic inflection
    double smoothing_cap = 0.10;  ///< max |delay change| per update, seconds
    double update_period_s = 60.0;
    /// When false, minutes without any suggestion feedback leave the delay
    /// unchanged instead of drifting it toward d_max (the A=0 convention).
    bool idle_drift = true;

    void validate() const;  // throws std::invalid_argument on bad values
};

/// One aligned minute of suggestion feedback.
struct MinuteFeedback {
    std::int64_t accepted = 0;
    std::int64_t rejected = 0;
    DeveloperState state = DeveloperState::implementing;
};

/// Acceptance rate A = accepted/(accepted+rejected); defined as 0 for an
/// empty minute.
double acceptance_rate(const MinuteFeedback& feedback);

/// L(x) = 2/(1+e^-x) - 1, an odd sigmoid onto (-1, 1).
double scaled_logistic(double x);

/// Rescales L(gamma*(a - a0)) affinely so a=0 maps to -1 and a=1 to +1
/// exactly. Strictly increasing in a.
double normalized_score(double acceptance, const ControllerParams& params);

/// D_base * (1 - K * S_norm), clamped into [d_min, d_max]. Monotone
/// decreasing in the acceptance rate; endpoints of the band are reached at
/// acceptance 0 and 1.
double predicted_delay(const DelayBand& band, double acceptance,
                       const ControllerParams& params);

/// Moves d_old toward d_pred by at most `cap` seconds.
double smooth_step(double d_old, double d_pred, double cap);

/// Feedback-driven delay controller. Holds the current delay and applies one
/// bounded, smoothed adjustment per minute of feedback.
///
/// A Controller is a plain value: no internal threading, trivially movable.
/// Share one instance across threads only under external locking.
class Controller {
public:
    explicit Controller(DeveloperState initial_state,
                        ControllerParams params = {}, DelayBands bands = {});

    /// One minute-level update: computes the acceptance rate, maps it through
    /// the normalized logistic into the state's band, and steps the current
    /// delay toward the prediction by at most the smoothing cap.
    /// Returns the new current delay.
    double update(const MinuteFeedback& feedback);

    double current_delay() const { return delay_; }
    const ControllerParams& params() const { return params_; }
    const DelayBands& bands() const { return bands_; }

private:
    double delay_;
    ControllerParams params_;
    DelayBands bands_;
};

}  // namespace pacebound
