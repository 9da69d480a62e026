#pragma once

#include <span>
#include <string>
#include <vector>

#include "pacebound/evalstats.hpp"

namespace pacebound::report {

/// Outcome counts from the three-phase deployment (suggestions shown,
/// accepted, blind rejections). Single source for the reproduction report
/// and its golden tests.
inline constexpr stats::PhaseCounts kNoDelayCounts{5460, 267, 453};
inline constexpr stats::PhaseCounts kStaticDelayCounts{1225, 189, 13};
inline constexpr stats::PhaseCounts kAdaptiveCounts{1032, 192, 3};

/// Token volume per inference call and price (micro-currency per 1k tokens)
/// behind the cost-savings estimate.
inline constexpr std::int64_t kTokensPerCall = 1250;
inline constexpr stats::Money kPricePer1kTokens{400};

struct PhaseRow {
    std::string name;
    stats::PhaseCounts counts;
};

std::vector<PhaseRow> deployment_phases();

enum class Format { text, tsv };

/// Acceptance rates with Wald intervals, blind-rejection ratios, and the
/// pairwise significance tests for an ordered list of phases.
std::string render_phase_report(std::span<const PhaseRow> rows, Format format);

/// Calls-per-accept for each phase, the first-to-last relative reduction,
/// and the cost-savings estimate per 1000 accepted suggestions.
std::string render_efficiency(std::span<const PhaseRow> rows, Format format);

/// Full reproduction report over the embedded deployment counts.
std::string render_tables();

}  // namespace pacebound::report
