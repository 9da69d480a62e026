#include "pacebound/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacebound {

std::string_view to_string(DeveloperState state) {
    return state == DeveloperState::implementing ? "implementing" : "debugging";
}

std::optional<DeveloperState> state_from_string(std::string_view text) {
    if (text == "implementing") return DeveloperState::implementing;
    if (text == "debugging") return DeveloperState::debugging;
    return std::nullopt;
}

DelayBand DelayBand::checked(double d_min, double d_max) {
    if (!(d_min > 0.0) || !(d_min < d_max)) {
        throw std::invalid_argument("DelayBand requires 0 < d_min < d_max");
    }
    return DelayBand{d_min, d_max};
}

DelayBand band_for_state(DeveloperState state) {
    return DelayBands{}.for_state(state);
}

void ControllerParams::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
    if (!(a0 > 0.0 && a0 < 1.0)) throw std::invalid_argument("a0 must be in (0,1)");
    if (!(smoothing_cap > 0.0)) throw std::invalid_argument("smoothing_cap must be > 0");
    if (!(update_period_s > 0.0)) throw std::invalid_argument("update_period_s must be > 0");
}

double acceptance_rate(const MinuteFeedback& feedback) {
    if (feedback.accepted < 0 || feedback.rejected < 0) {
        throw std::invalid_argument("feedback counts must be non-negative");
    }
    const std::int64_t total = feedback.accepted + feedback.rejected;
    if (total == 0) return 0.0;
    return static_cast<double>(feedback.accepted) / static_cast<double>(total);
}

double scaled_logistic(double x) {
    return 2.0 / (1.0 + std::exp(-x)) - 1.0;
}

double normalized_score(double acceptance, const ControllerParams& params) {
    const double raw = scaled_logistic(params.gamma * (acceptance - params.a0));
    const double s0 = scaled_logistic(-params.gamma * params.a0);
    const double s1 = scaled_logistic(params.gamma * (1.0 - params.a0));
    return 2.0 * (raw - s0) / (s1 - s0) - 1.0;
}

double predicted_delay(const DelayBand& band, double acceptance,
                       const ControllerParams& params) {
    const double factor = 1.0 - band.gain() * normalized_score(acceptance, params);
    return std::clamp(band.base() * factor, band.d_min, band.d_max);
}

double smooth_step(double d_old, double d_pred, double cap) {
    const double delta = std::clamp(d_pred - d_old, -cap, cap);
    return d_old + delta;
}

Controller::Controller(DeveloperState initial_state, ControllerParams params,
                       DelayBands bands)
    : delay_(bands.for_state(initial_state).base()),
      params_(params),
      bands_(bands) {
    params_.validate();
}

double Controller::update(const MinuteFeedback& feedback) {
    if (!params_.idle_drift && feedback.accepted + feedback.rejected == 0) {
        return delay_;
    }
    const DelayBand& band = bands_.for_state(feedback.state);
    const double a = acceptance_rate(feedback);
    const double pred = predicted_delay(band, a, params_);
    delay_ = smooth_step(delay_, pred, params_.smoothing_cap);
    return delay_;
}

}  // namespace pacebound
