#include "pacebound/telemetry.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pacebound::telemetry {

using nlohmann::ordered_json;

namespace {

constexpr std::int64_t kMinuteMs = 60'000;

std::int64_t minute_of(std::int64_t ts_ms) { return ts_ms / kMinuteMs; }

void check_time_ordered(const std::vector<Event>& events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].ts_ms < events[i - 1].ts_ms) {
            throw std::invalid_argument("session log events are not time-ordered");
        }
    }
}

/// Effective per-minute state: each state_label applies from its own minute
/// until the next label; implementing before any label.
std::vector<DeveloperState> minute_states(const SessionLog& log,
                                          std::int64_t n_minutes) {
    std::vector<DeveloperState> states(static_cast<std::size_t>(n_minutes),
                                       DeveloperState::implementing);
    std::vector<std::pair<std::int64_t, DeveloperState>> labels;
    for (const Event& ev : log.events) {
        if (ev.kind == EventKind::state_label && ev.state) {
            labels.emplace_back(minute_of(ev.ts_ms), *ev.state);
        }
    }
    std::size_t li = 0;
    DeveloperState current = DeveloperState::implementing;
    for (std::int64_t m = 0; m < n_minutes; ++m) {
        while (li < labels.size() && labels[li].first <= m) {
            current = labels[li].second;
            ++li;
        }
        states[static_cast<std::size_t>(m)] = current;
    }
    return states;
}

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::keystroke: return "keystroke";
        case EventKind::suggestion_shown: return "suggestion_shown";
        case EventKind::suggestion_accepted: return "suggestion_accepted";
        case EventKind::suggestion_rejected: return "suggestion_rejected";
        case EventKind::state_label: return "state_label";
        case EventKind::minute_summary: return "minute_summary";
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view text) {
    if (text == "keystroke") return EventKind::keystroke;
    if (text == "suggestion_shown") return EventKind::suggestion_shown;
    if (text == "suggestion_accepted") return EventKind::suggestion_accepted;
    if (text == "suggestion_rejected") return EventKind::suggestion_rejected;
    if (text == "state_label") return EventKind::state_label;
    if (text == "minute_summary") return EventKind::minute_summary;
    return std::nullopt;
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::no_delay: return "no_delay";
        case Phase::static_delay: return "static";
        case Phase::adaptive: return "adaptive";
    }
    return "unknown";
}

std::optional<Phase> phase_from_string(std::string_view text) {
    if (text == "no_delay") return Phase::no_delay;
    if (text == "static") return Phase::static_delay;
    if (text == "adaptive") return Phase::adaptive;
    return std::nullopt;
}

Event Event::keystroke(std::int64_t ts_ms) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::keystroke;
    return ev;
}

Event Event::suggestion_shown(std::int64_t ts_ms, std::string id, double delay_s) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::suggestion_shown;
    ev.suggestion_id = std::move(id);
    ev.delay_applied_s = delay_s;
    return ev;
}

Event Event::suggestion_accepted(std::int64_t ts_ms, std::string id, double decision_s) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::suggestion_accepted;
    ev.suggestion_id = std::move(id);
    ev.decision_time_s = decision_s;
    return ev;
}

Event Event::suggestion_rejected(std::int64_t ts_ms, std::string id, double decision_s) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::suggestion_rejected;
    ev.suggestion_id = std::move(id);
    ev.decision_time_s = decision_s;
    return ev;
}

Event Event::state_label(std::int64_t ts_ms, DeveloperState state) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::state_label;
    ev.state = state;
    return ev;
}

Event Event::minute_summary(std::int64_t ts_ms, const MinuteSummary& summary) {
    Event ev;
    ev.ts_ms = ts_ms;
    ev.kind = EventKind::minute_summary;
    ev.minute = summary;
    ev.state = summary.state;
    return ev;
}

LogFormatError::LogFormatError(const std::string& message, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                  : message),
      line_(line) {}

std::vector<MinuteSummary> aggregate_minutes(const SessionLog& log) {
    check_time_ordered(log.events);
    if (log.events.empty()) return {};
    if (log.events.front().ts_ms < 0) {
        throw std::invalid_argument("negative event timestamp");
    }

    const std::int64_t n_minutes = minute_of(log.events.back().ts_ms) + 1;
    std::vector<MinuteSummary> out(static_cast<std::size_t>(n_minutes));
    std::vector<std::bitset<60>> active(static_cast<std::size_t>(n_minutes));

    for (const Event& ev : log.events) {
        const auto m = static_cast<std::size_t>(minute_of(ev.ts_ms));
        switch (ev.kind) {
            case EventKind::keystroke:
                out[m].keystroke_count += 1;
                active[m].set(static_cast<std::size_t>((ev.ts_ms / 1000) % 60));
                break;
            case EventKind::minute_summary:
                if (ev.minute) {
                    out[m].edit_count = ev.minute->edit_count;
                    out[m].navigation_count = ev.minute->navigation_count;
                    out[m].command_count = ev.minute->command_count;
                }
                break;
            default:
                break;
        }
    }

    const auto states = minute_states(log, n_minutes);
    for (std::int64_t m = 0; m < n_minutes; ++m) {
        auto& s = out[static_cast<std::size_t>(m)];
        s.minute_index = m;
        s.typing_speed_cps = static_cast<double>(s.keystroke_count) / 60.0;
        s.idle_seconds =
            static_cast<double>(60 - active[static_cast<std::size_t>(m)].count());
        s.state = states[static_cast<std::size_t>(m)];
    }
    return out;
}

std::vector<double> typing_intervals(std::span<const MinuteSummary> summaries) {
    std::vector<double> intervals;
    for (const MinuteSummary& s : summaries) {
        if (s.typing_speed_cps > 0.0 && s.typing_speed_cps <= 5.0) {
            intervals.push_back(1.0 / s.typing_speed_cps);
        }
    }
    return intervals;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
    if (values.empty()) {
        throw std::invalid_argument("percentile of an empty sample");
    }
    if (!(percentile >= 0.0 && percentile <= 1.0)) {
        throw std::invalid_argument("percentile must lie in [0,1]");
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::int64_t>(std::ceil(percentile * n - 1e-9));
    rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(values.size()));
    return values[static_cast<std::size_t>(rank - 1)];
}

BaseDelays derive_base_delays(std::span<const double> implementing_intervals,
                              std::span<const double> debugging_intervals,
                              double percentile) {
    if (implementing_intervals.empty()) {
        throw std::invalid_argument("no typing intervals for state: implementing");
    }
    if (debugging_intervals.empty()) {
        throw std::invalid_argument("no typing intervals for state: debugging");
    }
    return BaseDelays{
        nearest_rank_percentile(
            {implementing_intervals.begin(), implementing_intervals.end()}, percentile),
        nearest_rank_percentile(
            {debugging_intervals.begin(), debugging_intervals.end()}, percentile)};
}

RejectionKind classify_rejection(const SuggestionRecord& record, double threshold_s) {
    if (record.outcome != SuggestionOutcome::rejected) {
        throw std::invalid_argument("classify_rejection called on an accepted record");
    }
    return record.decision_time_s < threshold_s ? RejectionKind::blind
                                                : RejectionKind::read;
}

namespace {

ordered_json event_to_json(const Event& ev) {
    ordered_json j;
    j["ts_ms"] = ev.ts_ms;
    j["kind"] = to_string(ev.kind);
    switch (ev.kind) {
        case EventKind::suggestion_shown:
            j["suggestion_id"] = ev.suggestion_id.value_or("");
            j["delay_applied_s"] = ev.delay_applied_s.value_or(0.0);
            break;
        case EventKind::suggestion_accepted:
        case EventKind::suggestion_rejected:
            j["suggestion_id"] = ev.suggestion_id.value_or("");
            if (ev.decision_time_s) j["decision_time_s"] = *ev.decision_time_s;
            break;
        case EventKind::state_label:
            j["state"] = to_string(ev.state.value_or(DeveloperState::implementing));
            break;
        case EventKind::minute_summary: {
            const MinuteSummary m = ev.minute.value_or(MinuteSummary{});
            j["minute_index"] = m.minute_index;
            j["typing_speed_cps"] = m.typing_speed_cps;
            j["keystroke_count"] = m.keystroke_count;
            j["edit_count"] = m.edit_count;
            j["navigation_count"] = m.navigation_count;
            j["command_count"] = m.command_count;
            j["idle_seconds"] = m.idle_seconds;
            j["state"] = to_string(m.state);
            break;
        }
        case EventKind::keystroke:
            break;
    }
    for (const auto& [key, value] : ev.extras.items()) {
        if (!j.contains(key)) j[key] = value;
    }
    return j;
}

ordered_json parse_json_line(const std::string& line, std::size_t line_no) {
    try {
        return ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw LogFormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
}

double require_number(const ordered_json& j, const char* key, std::size_t line_no) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw LogFormatError(std::string("missing or non-numeric field '") + key + "'",
                             line_no);
    }
    return it->get<double>();
}

std::string require_string(const ordered_json& j, const char* key,
                           std::size_t line_no) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw LogFormatError(std::string("missing or non-string field '") + key + "'",
                             line_no);
    }
    return it->get<std::string>();
}

DeveloperState require_state(const ordered_json& j, std::size_t line_no) {
    const auto text = require_string(j, "state", line_no);
    const auto state = state_from_string(text);
    if (!state) throw LogFormatError("unknown developer state '" + text + "'", line_no);
    return *state;
}

Event parse_event(const ordered_json& j, std::size_t line_no) {
    if (!j.is_object()) throw LogFormatError("event is not a JSON object", line_no);
    const auto ts_it = j.find("ts_ms");
    if (ts_it == j.end() || !ts_it->is_number_integer()) {
        throw LogFormatError("missing or non-integer field 'ts_ms'", line_no);
    }
    Event ev;
    ev.ts_ms = ts_it->get<std::int64_t>();
    if (ev.ts_ms < 0) throw LogFormatError("negative ts_ms", line_no);

    const auto kind_text = require_string(j, "kind", line_no);
    const auto kind = event_kind_from_string(kind_text);
    if (!kind) throw LogFormatError("unknown event kind '" + kind_text + "'", line_no);
    ev.kind = *kind;

    std::unordered_set<std::string> consumed{"ts_ms", "kind"};
    switch (ev.kind) {
        case EventKind::suggestion_shown:
            ev.suggestion_id = require_string(j, "suggestion_id", line_no);
            ev.delay_applied_s = require_number(j, "delay_applied_s", line_no);
            if (*ev.delay_applied_s < 0.0) {
                throw LogFormatError("negative delay_applied_s", line_no);
            }
            consumed.insert({"suggestion_id", "delay_applied_s"});
            break;
        case EventKind::suggestion_accepted:
        case EventKind::suggestion_rejected:
            ev.suggestion_id = require_string(j, "suggestion_id", line_no);
            if (j.contains("decision_time_s")) {
                ev.decision_time_s = require_number(j, "decision_time_s", line_no);
                if (*ev.decision_time_s < 0.0) {
                    throw LogFormatError("negative decision_time_s", line_no);
                }
            }
            consumed.insert({"suggestion_id", "decision_time_s"});
            break;
        case EventKind::state_label:
            ev.state = require_state(j, line_no);
            consumed.insert("state");
            break;
        case EventKind::minute_summary: {
            MinuteSummary m;
            if (j.contains("minute_index")) {
                m.minute_index = static_cast<std::int64_t>(
                    require_number(j, "minute_index", line_no));
            }
            if (j.contains("typing_speed_cps")) {
                m.typing_speed_cps = require_number(j, "typing_speed_cps", line_no);
            }
            if (j.contains("keystroke_count")) {
                m.keystroke_count = static_cast<std::int64_t>(
                    require_number(j, "keystroke_count", line_no));
            }
            if (j.contains("edit_count")) {
                m.edit_count =
                    static_cast<std::int64_t>(require_number(j, "edit_count", line_no));
            }
            if (j.contains("navigation_count")) {
                m.navigation_count = static_cast<std::int64_t>(
                    require_number(j, "navigation_count", line_no));
            }
            if (j.contains("command_count")) {
                m.command_count = static_cast<std::int64_t>(
                    require_number(j, "command_count", line_no));
            }
            if (j.contains("idle_seconds")) {
                m.idle_seconds = require_number(j, "idle_seconds", line_no);
            }
            if (j.contains("state")) m.state = require_state(j, line_no);
            ev.minute = m;
            ev.state = m.state;
            consumed.insert({"minute_index", "typing_speed_cps", "keystroke_count",
                             "edit_count", "navigation_count", "command_count",
                             "idle_seconds", "state"});
            break;
        }
        case EventKind::keystroke:
            break;
    }
    for (const auto& [key, value] : j.items()) {
        if (!consumed.contains(key)) ev.extras[key] = value;
    }
    return ev;
}

}  // namespace

nlohmann::ordered_json to_json(const Event& event) { return event_to_json(event); }

Event event_from_json(const nlohmann::ordered_json& j) { return parse_event(j, 0); }

std::string serialize_log(const SessionLog& log) {
    ordered_json header;
    header["schema"] = "pacebound-log";
    header["version"] = 1;
    header["session_id"] = log.session_id;
    header["phase"] = to_string(log.phase);

    std::string out = header.dump();
    out.push_back('\n');
    for (const Event& ev : log.events) {
        out += event_to_json(ev).dump();
        out.push_back('\n');
    }
    return out;
}

SessionLog parse_log(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) {
        throw LogFormatError("empty log: missing header line", 1);
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const ordered_json header = parse_json_line(line, line_no);
    if (!header.is_object()) throw LogFormatError("header is not a JSON object", line_no);
    if (require_string(header, "schema", line_no) != "pacebound-log") {
        throw LogFormatError("unexpected schema (want \"pacebound-log\")", line_no);
    }
    if (static_cast<std::int64_t>(require_number(header, "version", line_no)) != 1) {
        throw LogFormatError("unsupported log version (want 1)", line_no);
    }

    SessionLog log;
    log.session_id = require_string(header, "session_id", line_no);
    const auto phase_text = require_string(header, "phase", line_no);
    const auto phase = phase_from_string(phase_text);
    if (!phase) throw LogFormatError("unknown phase '" + phase_text + "'", line_no);
    log.phase = *phase;

    std::int64_t prev_ts = -1;
    std::unordered_set<std::string> shown_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw LogFormatError("blank line", line_no);
        Event ev = parse_event(parse_json_line(line, line_no), line_no);
        if (ev.ts_ms < prev_ts) {
            throw LogFormatError("timestamps decrease", line_no);
        }
        prev_ts = ev.ts_ms;
        if (ev.kind == EventKind::suggestion_shown) {
            shown_ids.insert(*ev.suggestion_id);
        } else if (ev.kind == EventKind::suggestion_accepted ||
                   ev.kind == EventKind::suggestion_rejected) {
            if (!shown_ids.contains(*ev.suggestion_id)) {
                throw LogFormatError(
                    "decision references suggestion '" + *ev.suggestion_id +
                        "' that was never shown",
                    line_no);
            }
        }
        log.events.push_back(std::move(ev));
    }
    return log;
}

SessionLog read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open log file: " + path.string());
    }
    return parse_log(in);
}

void write_log(const SessionLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open log file for writing: " + path.string());
    }
    out << serialize_log(log);
    if (!out) {
        throw std::runtime_error("failed writing log file: " + path.string());
    }
}

std::vector<SuggestionRecord> suggestion_records(const SessionLog& log) {
    struct Shown {
        std::int64_t ts_ms;
        double delay_s;
    };
    std::unordered_map<std::string, Shown> shown;
    std::unordered_set<std::string> decided;
    std::vector<SuggestionRecord> records;

    for (const Event& ev : log.events) {
        switch (ev.kind) {
            case EventKind::suggestion_shown:
                shown[*ev.suggestion_id] = Shown{ev.ts_ms, *ev.delay_applied_s};
                break;
            case EventKind::suggestion_accepted:
            case EventKind::suggestion_rejected: {
                const auto& id = *ev.suggestion_id;
                const auto it = shown.find(id);
                if (it == shown.end()) {
                    throw std::invalid_argument(
                        "decision references suggestion that was never shown: " + id);
                }
                if (decided.contains(id)) break;  // first decision wins
                decided.insert(id);
                SuggestionRecord rec;
                rec.suggestion_id = id;
                rec.delay_applied_s = it->second.delay_s;
                rec.outcome = ev.kind == EventKind::suggestion_accepted
                                  ? SuggestionOutcome::accepted
                                  : SuggestionOutcome::rejected;
                rec.decision_time_s = ev.decision_time_s.value_or(
                    static_cast<double>(ev.ts_ms - it->second.ts_ms) / 1000.0);
                records.push_back(std::move(rec));
                break;
            }
            default:
                break;
        }
    }
    return records;
}

stats::PhaseCounts phase_counts(const SessionLog& log, double blind_threshold_s) {
    stats::PhaseCounts counts;
    for (const Event& ev : log.events) {
        if (ev.kind == EventKind::suggestion_shown) counts.n_total += 1;
    }
    for (const SuggestionRecord& rec : suggestion_records(log)) {
        if (rec.outcome == SuggestionOutcome::accepted) {
            counts.k_accepted += 1;
        } else if (classify_rejection(rec, blind_threshold_s) == RejectionKind::blind) {
            counts.n_blind += 1;
        }
    }
    return counts;
}

StateIntervals keystroke_intervals(const SessionLog& log) {
    check_time_ordered(log.events);
    StateIntervals out;
    if (log.events.empty()) return out;

    const std::int64_t n_minutes = minute_of(log.events.back().ts_ms) + 1;
    const auto states = minute_states(log, n_minutes);

    std::optional<std::int64_t> prev;
    for (const Event& ev : log.events) {
        if (ev.kind != EventKind::keystroke) continue;
        if (prev) {
            const double dt = static_cast<double>(ev.ts_ms - *prev) / 1000.0;
            const auto m = static_cast<std::size_t>(minute_of(*prev));
            if (states[m] == DeveloperState::implementing) {
                out.implementing.push_back(dt);
            } else {
                out.debugging.push_back(dt);
            }
        }
        prev = ev.ts_ms;
    }
    return out;
}

}  // namespace pacebound::telemetry
