#include "pacebound/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacebound::stats {

namespace {

// log C(n, k) via lgamma; exact enough for pmf ratios over the table support
double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

void PhaseCounts::validate() const {
    if (n_total < 0 || k_accepted < 0 || n_blind < 0) {
        throw std::invalid_argument("phase counts must be non-negative");
    }
    if (k_accepted > n_total) {
        throw std::invalid_argument("accepted count exceeds total suggestions");
    }
    if (n_blind > n_total - k_accepted) {
        throw std::invalid_argument("blind rejections exceed total rejections");
    }
}

RateEstimate wald_estimate(std::int64_t n, std::int64_t k, double z_crit) {
    if (n < 1) throw std::invalid_argument("wald_estimate requires n >= 1");
    if (k < 0 || k > n) throw std::invalid_argument("wald_estimate requires 0 <= k <= n");
    const double rate = static_cast<double>(k) / static_cast<double>(n);
    const double se = std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
    return RateEstimate{rate, se, std::max(0.0, rate - z_crit * se),
                        std::min(1.0, rate + z_crit * se)};
}

TestResult two_proportion_z(std::int64_t n1, std::int64_t k1, std::int64_t n2,
                            std::int64_t k2) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("z-test requires n1, n2 >= 1");
    if (k1 < 0 || k1 > n1 || k2 < 0 || k2 > n2) {
        throw std::invalid_argument("z-test requires 0 <= k <= n for both samples");
    }
    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
    if (pooled <= 0.0 || pooled >= 1.0) {
        throw std::invalid_argument("pooled proportion is degenerate (0 or 1)");
    }
    const double se = std::sqrt(pooled * (1.0 - pooled) *
                                (1.0 / static_cast<double>(n1) +
                                 1.0 / static_cast<double>(n2)));
    const double z = (p1 - p2) / se;
    const double p_value = 2.0 * normal_cdf(-std::fabs(z));
    return TestResult{z, p_value, TestMethod::pooled_z};
}

TestResult blind_ratio_tests(const PhaseCounts& phase_a, const PhaseCounts& phase_b) {
    phase_a.validate();
    phase_b.validate();
    if (phase_a.n_rejected() < 1 || phase_b.n_rejected() < 1) {
        throw std::invalid_argument("blind ratio test requires rejections in both phases");
    }
    return two_proportion_z(phase_a.n_rejected(), phase_a.n_blind,
                            phase_b.n_rejected(), phase_b.n_blind);
}

TestResult fisher_exact_2x2(std::int64_t a, std::int64_t b, std::int64_t c,
                            std::int64_t d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) {
        throw std::invalid_argument("fisher_exact_2x2 requires non-negative counts");
    }
    const std::int64_t row1 = a + b;
    const std::int64_t row2 = c + d;
    const std::int64_t col1 = a + c;
    const std::int64_t total = row1 + row2;
    if (total == 0) throw std::invalid_argument("fisher_exact_2x2 on an all-zero table");

    // Hypergeometric pmf over all tables with the observed margins,
    // parameterized by the top-left cell.
    const double log_denom = log_choose(total, col1);
    const auto log_pmf = [&](std::int64_t k) {
        return log_choose(row1, k) + log_choose(row2, col1 - k) - log_denom;
    };

    const std::int64_t lo = std::max<std::int64_t>(0, col1 - row2);
    const std::int64_t hi = std::min(row1, col1);
    const double log_p_obs = log_pmf(a);

    // Relative slack absorbs lgamma rounding when a table ties the observed
    // probability (e.g. proportional rows, where the two-sided p must be 1).
    const double cutoff = log_p_obs + 1e-9;
    double p = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
        const double lp = log_pmf(k);
        if (lp <= cutoff) p += std::exp(lp);
    }
    return TestResult{std::nullopt, std::min(p, 1.0), TestMethod::fisher_exact};
}

BlindRatios blind_ratios(const PhaseCounts& counts) {
    counts.validate();
    if (counts.n_rejected() < 1) {
        throw std::invalid_argument("blind_ratios undefined without rejections");
    }
    const double blind = static_cast<double>(counts.n_blind);
    return BlindRatios{blind / static_cast<double>(counts.n_rejected()),
                       blind / static_cast<double>(counts.n_total)};
}

double calls_per_accept(const PhaseCounts& counts) {
    counts.validate();
    if (counts.k_accepted < 1) {
        throw std::invalid_argument("calls_per_accept undefined with zero accepted");
    }
    return static_cast<double>(counts.n_total) /
           static_cast<double>(counts.k_accepted);
}

Money cost_savings(const PhaseCounts& phase_a, const PhaseCounts& phase_b,
                   std::int64_t accepted_target, std::int64_t tokens_per_call,
                   Money price_per_1k_tokens) {
    if (phase_a.k_accepted < 1 || phase_b.k_accepted < 1) {
        throw std::invalid_argument("cost_savings requires accepted suggestions in both phases");
    }
    if (accepted_target < 0 || tokens_per_call < 0) {
        throw std::invalid_argument("cost_savings requires non-negative volume inputs");
    }
    // (n_a/k_a - n_b/k_b) * target * tokens/1000 * price, as one integer
    // rational: numerator/(k_a*k_b*1000) in micro-units.
    const __int128 diff = static_cast<__int128>(phase_a.n_total) * phase_b.k_accepted -
                          static_cast<__int128>(phase_b.n_total) * phase_a.k_accepted;
    const __int128 numer =
        diff * accepted_target * tokens_per_call * price_per_1k_tokens.micro;
    const __int128 denom =
        static_cast<__int128>(phase_a.k_accepted) * phase_b.k_accepted * 1000;
    // round half away from zero
    const __int128 half = denom / 2;
    const __int128 rounded = numer >= 0 ? (numer + half) / denom : (numer - half) / denom;
    return Money{static_cast<std::int64_t>(rounded)};
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace pacebound::stats
