#include "pacebound/report.hpp"

#include <cstdio>

namespace pacebound::report {

namespace {

std::string fmt(const char* format, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, value);
    return buf;
}

std::string fmt_counts(const char* format, long long value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, value);
    return buf;
}

std::string test_line(Format format, const std::string& metric,
                      const std::string& from, const std::string& to,
                      const stats::TestResult& result) {
    std::string out;
    if (format == Format::tsv) {
        out = metric + "\t" + from + "\t" + to + "\t";
        out += result.z ? fmt("%.2f", *result.z) : "-";
        out += "\t" + fmt("%.2g", result.p_value) + "\n";
        return out;
    }
    char buf[160];
    const std::string transition = from + " -> " + to;
    if (result.z) {
        std::snprintf(buf, sizeof(buf), "  %-11s %-22s z = %7.2f   p = %.2g\n",
                      metric.c_str(), transition.c_str(), *result.z, result.p_value);
    } else {
        std::snprintf(buf, sizeof(buf), "  %-11s %-22s %-13s p = %.2g\n",
                      metric.c_str(), transition.c_str(), "", result.p_value);
    }
    return buf;
}

}  // namespace

std::vector<PhaseRow> deployment_phases() {
    return {PhaseRow{"no_delay", kNoDelayCounts},
            PhaseRow{"static", kStaticDelayCounts},
            PhaseRow{"adaptive", kAdaptiveCounts}};
}

std::string render_phase_report(std::span<const PhaseRow> rows, Format format) {
    std::string out;
    const bool tsv = format == Format::tsv;

    if (tsv) {
        out += "acceptance\tphase\tn\tk\trate_pct\tse_pct\tci_low_pct\tci_high_pct\n";
    } else {
        out += "Suggestion acceptance by phase (Wald 95% CI)\n";
        out += "  phase         n      k   rate%    se%          ci95%\n";
    }
    for (const PhaseRow& row : rows) {
        const auto est = stats::wald_estimate(row.counts.n_total, row.counts.k_accepted);
        if (tsv) {
            out += "acceptance\t" + row.name + "\t" +
                   fmt_counts("%lld", row.counts.n_total) + "\t" +
                   fmt_counts("%lld", row.counts.k_accepted) + "\t" +
                   fmt("%.2f", 100.0 * est.rate) + "\t" + fmt("%.2f", 100.0 * est.se) +
                   "\t" + fmt("%.1f", 100.0 * est.ci_low) + "\t" +
                   fmt("%.1f", 100.0 * est.ci_high) + "\n";
        } else {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "  %-10s %6lld %6lld %7.2f %6.2f   [%.1f, %.1f]\n",
                          row.name.c_str(),
                          static_cast<long long>(row.counts.n_total),
                          static_cast<long long>(row.counts.k_accepted),
                          100.0 * est.rate, 100.0 * est.se, 100.0 * est.ci_low,
                          100.0 * est.ci_high);
            out += buf;
        }
    }

    if (tsv) {
        out += "blind\tphase\tn_blind\tn_rejected\tper_reject_pct\tper_suggest_pct\n";
    } else {
        out += "\nBlind rejections by phase\n";
        out += "  phase       blind  rejected  per_reject%  per_suggest%\n";
    }
    for (const PhaseRow& row : rows) {
        const auto ratios = stats::blind_ratios(row.counts);
        if (tsv) {
            out += "blind\t" + row.name + "\t" + fmt_counts("%lld", row.counts.n_blind) +
                   "\t" + fmt_counts("%lld", row.counts.n_rejected()) + "\t" +
                   fmt("%.2g", 100.0 * ratios.per_reject) + "\t" +
                   fmt("%.2g", 100.0 * ratios.per_suggest) + "\n";
        } else {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "  %-10s %6lld %9lld %12s %13s\n",
                          row.name.c_str(),
                          static_cast<long long>(row.counts.n_blind),
                          static_cast<long long>(row.counts.n_rejected()),
                          fmt("%.2g", 100.0 * ratios.per_reject).c_str(),
                          fmt("%.2g", 100.0 * ratios.per_suggest).c_str());
            out += buf;
        }
    }

    if (rows.size() < 2) return out;
    if (tsv) {
        out += "test\tfrom\tto\tz\tp\n";
    } else {
        out += "\nPooled two-proportion z-tests\n";
    }
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const PhaseRow& a = rows[i];
        const PhaseRow& b = rows[i + 1];
        out += test_line(format, "acceptance", a.name, b.name,
                         stats::two_proportion_z(a.counts.n_total, a.counts.k_accepted,
                                                 b.counts.n_total, b.counts.k_accepted));
        out += test_line(format, "blind/rej", a.name, b.name,
                         stats::blind_ratio_tests(a.counts, b.counts));
    }
    // exact-test check on the last transition, where counts are smallest
    const PhaseRow& a = rows[rows.size() - 2];
    const PhaseRow& b = rows.back();
    out += test_line(format, "fisher", a.name, b.name,
                     stats::fisher_exact_2x2(a.counts.n_blind,
                                             a.counts.n_rejected() - a.counts.n_blind,
                                             b.counts.n_blind,
                                             b.counts.n_rejected() - b.counts.n_blind));
    return out;
}

std::string render_efficiency(std::span<const PhaseRow> rows, Format format) {
    std::string out;
    const bool tsv = format == Format::tsv;
    if (tsv) {
        out += "efficiency\tphase\tcalls_per_accept\n";
    } else {
        out += "\nInference efficiency\n";
        out += "  calls per accepted suggestion:";
    }
    for (const PhaseRow& row : rows) {
        const double calls = stats::calls_per_accept(row.counts);
        if (tsv) {
            out += "efficiency\t" + row.name + "\t" + fmt("%.1f", calls) + "\n";
        } else {
            if (&row != &rows.front()) out += ",";
            out += " " + row.name + " = " + fmt("%.1f", calls);
        }
    }
    if (!tsv) out += "\n";

    if (rows.size() < 2) return out;
    const PhaseRow& first = rows.front();
    const PhaseRow& last = rows.back();
    const double calls_first = stats::calls_per_accept(first.counts);
    const double calls_last = stats::calls_per_accept(last.counts);
    const double reduction = 100.0 * (calls_first - calls_last) / calls_first;
    const stats::Money savings = stats::cost_savings(
        first.counts, last.counts, 1000, kTokensPerCall, kPricePer1kTokens);

    if (tsv) {
        out += "efficiency\treduction_pct\t" + fmt("%.1f", reduction) + "\n";
        out += "efficiency\tsavings_per_1000_accepted\t" +
               fmt("%.2f", savings.units()) + "\n";
    } else {
        out += "  relative reduction " + first.name + " -> " + last.name + ": " +
               fmt("%.1f", reduction) + "%\n";
        out += "  est. savings per 1000 accepted (" + std::to_string(kTokensPerCall) +
               " tokens/call @ $" + fmt("%.4f", kPricePer1kTokens.units()) +
               "/1k tokens): $" + fmt("%.2f", savings.units()) + "\n";
    }
    return out;
}

std::string render_tables() {
    const auto rows = deployment_phases();
    return render_phase_report(rows, Format::text) +
           render_efficiency(rows, Format::text);
}

}  // namespace pacebound::report
