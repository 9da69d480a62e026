#pragma once

#include <cstdint>
#include <optional>

namespace pacebound::stats {

/// Suggestion outcome totals for one deployment phase.
struct PhaseCounts {
    std::int64_t n_total = 0;    ///< suggestions shown
    std::int64_t k_accepted = 0;
    std::int64_t n_blind = 0;    ///< rejections decided in under the blind threshold

    std::int64_t n_rejected() const { return n_total - k_accepted; }
    void validate() const;  // throws std::invalid_argument on inconsistent counts
};

struct RateEstimate {
    double rate;
    double se;
    double ci_low;
    double ci_high;
};

enum class TestMethod { pooled_z, fisher_exact };

struct TestResult {
    std::optional<double> z;  ///< absent for Fisher's exact test
    double p_value;
    TestMethod method;
};

/// Two-sided 95% critical value used for Wald intervals.
inline constexpr double kDefaultZCrit = 1.95996;

/// Binomial rate with its standard error and a Wald interval clipped to [0,1].
RateEstimate wald_estimate(std::int64_t n, std::int64_t k,
                           double z_crit = kDefaultZCrit);

/// Two-sample z-test for proportions with pooled variance; two-sided p-value.
/// Throws when the pooled proportion is 0 or 1 (degenerate variance).
TestResult two_proportion_z(std::int64_t n1, std::int64_t k1, std::int64_t n2,
                            std::int64_t k2);

/// Pooled z-test on the blind-per-rejection rates of two phases.
TestResult blind_ratio_tests(const PhaseCounts& phase_a, const PhaseCounts& phase_b);

/// Fisher's exact test on the 2x2 table [[a, b], [c, d]]. Two-sided p-value
/// by the sum-of-smaller-probabilities convention: all tables with the
/// observed margins whose probability does not exceed the observed table's.
TestResult fisher_exact_2x2(std::int64_t a, std::int64_t b, std::int64_t c,
                            std::int64_t d);

struct BlindRatios {
    double per_reject;   ///< blind / all rejections
    double per_suggest;  ///< blind / all suggestions
};

/// Both blind-rejection ratios. Requires at least one rejection; throws
/// otherwise (the per-reject ratio is undefined).
BlindRatios blind_ratios(const PhaseCounts& counts);

/// Inference calls per accepted suggestion (n_total / k_accepted).
/// Throws when nothing was accepted.
double calls_per_accept(const PhaseCounts& counts);

/// Currency in exact decimal micro-units (1e-6 of the base currency), so cost
/// arithmetic over integer counts stays drift-free.
struct Money {
    std::int64_t micro = 0;

    double units() const { return static_cast<double>(micro) / 1e6; }
    static Money from_micro(std::int64_t m) { return Money{m}; }
};

/// Spend difference between two phases for a fixed number of accepted
/// suggestions: (calls/accept_a - calls/accept_b) * accepted_target *
/// tokens_per_call / 1000 * price_per_1k_tokens. Computed in integer
/// micro-units with a single rounded division.
Money cost_savings(const PhaseCounts& phase_a, const PhaseCounts& phase_b,
                   std::int64_t accepted_target, std::int64_t tokens_per_call,
                   Money price_per_1k_tokens);

/// Standard normal CDF via the complementary error function
/// (Phi(x) = erfc(-x/sqrt(2))/2); absolute error well under 1e-7.
double normal_cdf(double x);

}  // namespace pacebound::stats
