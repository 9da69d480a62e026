#include "pacebound/stateinfer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace pacebound::stateinfer {

namespace {

// Confidence ramps linearly with distance from the decision threshold and
// saturates at 1 once the score is this far out.
constexpr double kConfidenceScale = 3.0;

// Shortest round-trip decimal form, so 2.5 prints as "2.5".
std::string format_number(double value) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Splits "http://host:port/path" into the client base and the request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const std::size_t authority_start =
        scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', authority_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string_view to_string(Source source) {
    switch (source) {
        case Source::heuristic: return "heuristic";
        case Source::remote: return "remote";
        case Source::fallback: return "fallback";
    }
    return "unknown";
}

ClassificationResult classify_heuristic(const telemetry::MinuteSummary& summary,
                                        const HeuristicWeights& weights) {
    const double score =
        weights.navigation * static_cast<double>(summary.navigation_count) +
        weights.command * static_cast<double>(summary.command_count) +
        weights.idle * (summary.idle_seconds / 60.0) -
        weights.typing * summary.typing_speed_cps;
    const DeveloperState state = score > weights.threshold
                                     ? DeveloperState::debugging
                                     : DeveloperState::implementing;
    const double confidence =
        std::min(1.0, std::fabs(score - weights.threshold) / kConfidenceScale);
    return ClassificationResult{state, confidence, Source::heuristic};
}

std::string build_prompt(const telemetry::MinuteSummary& summary,
                         std::string_view diff) {
    std::string prompt;
    prompt += "You are classifying one minute of IDE activity from a software developer.\n";
    prompt += "\n";
    prompt += "Activity metrics:\n";
    prompt += "- typing speed: " + format_number(summary.typing_speed_cps) +
              " characters/second\n";
    prompt += "- keystrokes: " + std::to_string(summary.keystroke_count) + "\n";
    prompt += "- file edits: " + std::to_string(summary.edit_count) + "\n";
    prompt += "- navigation actions: " + std::to_string(summary.navigation_count) + "\n";
    prompt += "- commands run: " + std::to_string(summary.command_count) + "\n";
    prompt += "- idle time: " + format_number(summary.idle_seconds) + " seconds\n";
    prompt += "\n";
    prompt += "Code changes (diff):\n";
    if (diff.empty()) {
        prompt += "(no code changes)\n";
    } else {
        prompt += diff;
        if (diff.back() != '\n') prompt += '\n';
    }
    prompt += "\n";
    prompt +=
        "Is this developer implementing or debugging? Answer with exactly one "
        "word: \"implementing\" or \"debugging\".";
    return prompt;
}

std::optional<DeveloperState> parse_state_response(std::string_view text) {
    const std::string lower = lowercase(text);
    const bool has_implementing = lower.find("implementing") != std::string::npos;
    const bool has_debugging = lower.find("debugging") != std::string::npos;
    if (has_implementing == has_debugging) return std::nullopt;  // both or neither
    return has_implementing ? DeveloperState::implementing : DeveloperState::debugging;
}

RemoteClassifierConfig RemoteClassifierConfig::from_env() {
    RemoteClassifierConfig config;
    if (const char* url = std::getenv("PACEBOUND_CLASSIFIER_URL")) {
        config.endpoint_url = url;
    }
    if (const char* token = std::getenv("PACEBOUND_CLASSIFIER_TOKEN")) {
        config.auth_token = token;
    }
    return config;
}

void RemoteClassifierConfig::validate() const {
    if (!(timeout_s > 0.0)) throw std::invalid_argument("timeout must be > 0");
    if (retry_count < 0) throw std::invalid_argument("retry_count must be >= 0");
}

ClassificationResult classify_remote(const RemoteClassifierConfig& config,
                                     const telemetry::MinuteSummary& summary,
                                     std::string_view diff) {
    config.validate();
    const std::string prompt = build_prompt(summary, diff);
    const auto [base, path] = split_url(config.endpoint_url);

    nlohmann::json body;
    body["prompt"] = prompt;
    const std::string payload = body.dump();

    std::string last_error = "endpoint not configured";
    if (!config.endpoint_url.empty()) {
        httplib::Client client(base);
        const auto timeout_us =
            std::chrono::microseconds(static_cast<std::int64_t>(config.timeout_s * 1e6));
        client.set_connection_timeout(timeout_us);
        client.set_read_timeout(timeout_us);
        client.set_write_timeout(timeout_us);
        if (!config.auth_token.empty()) {
            client.set_bearer_token_auth(config.auth_token);
        }

        for (int attempt = 0; attempt <= config.retry_count; ++attempt) {
            auto response = client.Post(path, payload, "application/json");
            if (!response) {
                last_error = "transport error: " + httplib::to_string(response.error());
                continue;
            }
            if (response->status != 200) {
                last_error = "unexpected status " + std::to_string(response->status);
                continue;
            }
            try {
                const auto reply = nlohmann::json::parse(response->body);
                const auto text_it = reply.find("text");
                if (text_it == reply.end() || !text_it->is_string()) {
                    last_error = "reply missing \"text\" field";
                    continue;
                }
                const auto state = parse_state_response(text_it->get<std::string>());
                if (!state) {
                    last_error = "ambiguous classifier reply";
                    continue;
                }
                return ClassificationResult{*state, 1.0, Source::remote};
            } catch (const nlohmann::json::parse_error&) {
                last_error = "reply is not valid JSON";
            }
        }
    }

    std::cerr << "pacebound: remote classifier unavailable (" << last_error
              << "), falling back to heuristic\n";
    ClassificationResult result = classify_heuristic(summary);
    result.source = Source::fallback;
    return result;
}

ClassificationResult HeuristicClassifier::classify(
    const telemetry::MinuteSummary& summary, std::string_view) {
    return classify_heuristic(summary, weights_);
}

ClassificationResult RemoteClassifier::classify(
    const telemetry::MinuteSummary& summary, std::string_view diff) {
    return classify_remote(config_, summary, diff);
}

}  // namespace pacebound::stateinfer
