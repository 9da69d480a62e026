#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pacebound/controller.hpp"
#include "pacebound/telemetry.hpp"

namespace pacebound::stateinfer {

enum class Source { heuristic, remote, fallback };

std::string_view to_string(Source source);

struct ClassificationResult {
    DeveloperState state;
    double confidence;  ///< in [0,1]
    Source source;
};

/// Linear rule over a minute of activity: navigation, commands and idle time
/// vote for debugging, typing speed votes against. Score above the threshold
/// means debugging; ties resolve to implementing.
struct HeuristicWeights {
    double navigation = 1.0;
    double command = 1.0;
    double idle = 1.0;    ///< applied to idle_seconds/60
    double typing = 1.0;  ///< applied (negatively) to typing_speed_cps
    double threshold = 1.0;
};

ClassificationResult classify_heuristic(const telemetry::MinuteSummary& summary,
                                        const HeuristicWeights& weights = {});

/// Deterministic prompt embedding the summary's metrics and the diff verbatim.
/// Ends with an instruction to answer with exactly one word.
std::string build_prompt(const telemetry::MinuteSummary& summary,
                         std::string_view diff);

/// Case-insensitive scan for "implementing"/"debugging". Exactly one present
/// decides the state; both or neither is a parse failure (nullopt).
std::optional<DeveloperState> parse_state_response(std::string_view text);

struct RemoteClassifierConfig {
    std::string endpoint_url;
    std::string auth_token;  ///< sent as a bearer token when non-empty
    double timeout_s = 5.0;
    int retry_count = 2;  ///< retries after the first attempt

    /// Reads PACEBOUND_CLASSIFIER_URL / PACEBOUND_CLASSIFIER_TOKEN.
    static RemoteClassifierConfig from_env();
    void validate() const;
};

/// POSTs {"prompt": ...} to the configured endpoint and parses the {"text":
/// ...} reply. Transport failures and unparseable replies never escape: after
/// the retries run out the heuristic result is returned with
/// Source::fallback. Failures are reported on stderr.
ClassificationResult classify_remote(const RemoteClassifierConfig& config,
                                     const telemetry::MinuteSummary& summary,
                                     std::string_view diff);

/// Common contract for state classifiers: total over valid summaries.
class StateClassifier {
public:
    virtual ~StateClassifier() = default;
    virtual ClassificationResult classify(const telemetry::MinuteSummary& summary,
                                          std::string_view diff) = 0;
};

class HeuristicClassifier final : public StateClassifier {
public:
    explicit HeuristicClassifier(HeuristicWeights weights = {}) : weights_(weights) {}
    ClassificationResult classify(const telemetry::MinuteSummary& summary,
                                  std::string_view diff) override;

private:
    HeuristicWeights weights_;
};

class RemoteClassifier final : public StateClassifier {
public:
    explicit RemoteClassifier(RemoteClassifierConfig config)
        : config_(std::move(config)) {}
    ClassificationResult classify(const telemetry::MinuteSummary& summary,
                                  std::string_view diff) override;

private:
    RemoteClassifierConfig config_;
};

}  // namespace pacebound::stateinfer
