#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pacebound/controller.hpp"
#include "pacebound/evalstats.hpp"

namespace pacebound::telemetry {

enum class EventKind {
    keystroke,
    suggestion_shown,
    suggestion_accepted,
    suggestion_rejected,
    state_label,
    minute_summary,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view text);

/// One aligned minute of activity metrics. typing_speed, keystroke_count and
/// idle_seconds are derived from keystroke events over the fixed 60 s window;
/// edit/navigation/command counts come from recorded minute_summary events
/// when a log carries them.
struct MinuteSummary {
    std::int64_t minute_index = 0;
    double typing_speed_cps = 0.0;
    std::int64_t keystroke_count = 0;
    std::int64_t edit_count = 0;
    std::int64_t navigation_count = 0;
    std::int64_t command_count = 0;
    double idle_seconds = 0.0;  ///< whole seconds of the minute without a keystroke
    DeveloperState state = DeveloperState::implementing;
};

/// One interaction event. Only the fields that apply to `kind` are set;
/// unrecognized JSON fields survive in `extras` so foreign logs round-trip.
struct Event {
    std::int64_t ts_ms = 0;
    EventKind kind = EventKind::keystroke;
    std::optional<std::string> suggestion_id;
    std::optional<double> delay_applied_s;   ///< suggestion_shown
    std::optional<double> decision_time_s;   ///< accepted/rejected, seconds from shown
    std::optional<DeveloperState> state;     ///< state_label
    std::optional<MinuteSummary> minute;     ///< minute_summary
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();

    static Event keystroke(std::int64_t ts_ms);
    static Event suggestion_shown(std::int64_t ts_ms, std::string id, double delay_s);
    static Event suggestion_accepted(std::int64_t ts_ms, std::string id, double decision_s);
    static Event suggestion_rejected(std::int64_t ts_ms, std::string id, double decision_s);
    static Event state_label(std::int64_t ts_ms, DeveloperState state);
    static Event minute_summary(std::int64_t ts_ms, const MinuteSummary& summary);
};

/// Suggestion-triggering regime a session ran under.
enum class Phase { no_delay, static_delay, adaptive };

std::string_view to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view text);

struct SessionLog {
    std::string session_id;
    Phase phase = Phase::adaptive;
    std::vector<Event> events;  ///< ts_ms non-decreasing
};

enum class SuggestionOutcome { accepted, rejected };

struct SuggestionRecord {
    std::string suggestion_id;
    double delay_applied_s = 0.0;
    SuggestionOutcome outcome = SuggestionOutcome::rejected;
    double decision_time_s = 0.0;
};

enum class RejectionKind { blind, read };

/// Rejections decided faster than this were dismissed without being read.
inline constexpr double kBlindThresholdS = 0.3;

/// Parse/validation failure for the session-log format; carries the
/// offending 1-based line number (0 when no line applies).
class LogFormatError : public std::runtime_error {
public:
    LogFormatError(const std::string& message, std::size_t line);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Canonical JSON form of one event (stable field order).
nlohmann::ordered_json to_json(const Event& event);

/// Parses and validates one event object; throws LogFormatError on schema
/// violations.
Event event_from_json(const nlohmann::ordered_json& j);

/// One MinuteSummary per started minute of the log. Keystroke-derived fields
/// are recomputed; recorded minute_summary events supply edit/navigation/
/// command counts; state labels carry forward from their own minute.
std::vector<MinuteSummary> aggregate_minutes(const SessionLog& log);

/// Per-minute mean inter-keystroke interval (1 / typing speed) for minutes
/// whose typing speed lies in (0, 5] characters per second; the bounds match
/// the active-typing filter, upper bound inclusive.
std::vector<double> typing_intervals(std::span<const MinuteSummary> summaries);

/// Nearest-rank percentile: the ceil(p*n)-th order statistic. Deterministic,
/// no interpolation.
double nearest_rank_percentile(std::vector<double> values, double percentile);

struct BaseDelays {
    double implementing;
    double debugging;
};

/// Per-state percentile of typing intervals, the safe-delay estimate each
/// band is anchored on. Throws naming the state whose interval list is empty.
BaseDelays derive_base_delays(std::span<const double> implementing_intervals,
                              std::span<const double> debugging_intervals,
                              double percentile = 0.97);

/// blind iff decision_time_s < threshold (strict; the boundary reads).
/// Throws std::invalid_argument when called on an accepted record.
RejectionKind classify_rejection(const SuggestionRecord& record,
                                 double threshold_s = kBlindThresholdS);

// --- session-log file format: UTF-8 JSON Lines -----------------------------
// Header line: {"schema":"pacebound-log","version":1,"session_id":...,"phase":...}
// followed by one event object per line, timestamps non-decreasing.

std::string serialize_log(const SessionLog& log);
SessionLog parse_log(std::istream& in);
SessionLog read_log(const std::filesystem::path& path);
void write_log(const SessionLog& log, const std::filesystem::path& path);

/// Joins suggestion_shown events with their accept/reject decision. Decision
/// time falls back to the event timestamp difference when not recorded.
std::vector<SuggestionRecord> suggestion_records(const SessionLog& log);

/// Phase totals recomputed from a log.
stats::PhaseCounts phase_counts(const SessionLog& log,
                                double blind_threshold_s = kBlindThresholdS);

struct StateIntervals {
    std::vector<double> implementing;
    std::vector<double> debugging;
};

/// Raw consecutive inter-keystroke gaps in seconds, attributed to the state
/// labeled for the minute of the gap's opening keystroke.
StateIntervals keystroke_intervals(const SessionLog& log);

}  // namespace pacebound::telemetry
