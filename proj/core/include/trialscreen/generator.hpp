#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trialscreen/corpus.hpp"
#include "trialscreen/criteria.hpp"
#include "trialscreen/prompt.hpp"

namespace trialscreen {

struct Verdict {
    std::string patient_id;
    CriterionId criterion = CriterionId::Abdominal;
    EligibilityLabel predicted = EligibilityLabel::NotMet;
    double met_score = 0.0;  // confidence that the label is Met
    std::vector<std::string> evidence;
    std::string raw_text;
    std::optional<std::string> anomaly;
};

/// The label anomalous pairs fall back to.
inline constexpr EligibilityLabel kDefaultLabel = EligibilityLabel::NotMet;

class Generator {
public:
    virtual ~Generator() = default;

    virtual Verdict classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const = 0;
    virtual std::string fingerprint() const = 0;
    /// Scores are only 0.0 / 1.0.
    virtual bool hard_label() const noexcept { return true; }
    /// Upper bound on concurrent classify() calls.
    virtual std::size_t parallelism() const noexcept { return 1; }
};

enum class GeneratorBackend { Remote, KeywordOracle, LabelReplay, Constant };

enum class GenerateAdapter {
    Native,          // POST {url}/generate {"model","prompt","max_new_tokens"} -> {"text","met_score"}
    ChatCompletions  // POST {url}/v1/chat/completions, messages wrapper
};

struct GeneratorConfig {
    GeneratorBackend backend = GeneratorBackend::Constant;
    std::string endpoint_url;
    std::string model_id;
    GenerateAdapter adapter = GenerateAdapter::Native;
    std::filesystem::path rules_path;  // empty: built-in rules
    EligibilityLabel constant_label = EligibilityLabel::NotMet;
    std::size_t max_new_tokens = 8;
    std::size_t parallelism = 4;
    int timeout_ms = 60000;
    int max_retries = 3;
    int initial_backoff_ms = 200;

    void validate() const;
};

/// Builds the verdict for a generated answer: parse_verdict on the text,
/// default label plus an anomaly note when it does not parse.
Verdict verdict_from_text(const ContextBundle& bundle, CriterionId criterion, std::string text,
                          std::optional<double> met_score);

class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(GeneratorConfig config);
    Verdict classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const override;
    std::string fingerprint() const override;
    bool hard_label() const noexcept override { return false; }
    std::size_t parallelism() const noexcept override { return config_.parallelism; }

private:
    GeneratorConfig config_;
};

/// Met iff any regex for the criterion matches the bundle's context text.
class KeywordOracleGenerator final : public Generator {
public:
    /// "CRITERION_ID<TAB>regex" lines, '#' comments. Regexes are case-insensitive.
    static KeywordOracleGenerator from_tsv(std::string_view tsv);
    static KeywordOracleGenerator from_file(const std::filesystem::path& path);
    static KeywordOracleGenerator builtin();

    Verdict classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const override;
    std::string fingerprint() const override;
    std::size_t parallelism() const noexcept override;

private:
    std::array<std::vector<std::pair<std::string, std::regex>>, kCriterionCount> rules_;
    std::uint64_t content_hash_ = 0;
};

/// Answers with the gold label. For checking the harness itself.
class LabelReplayGenerator final : public Generator {
public:
    explicit LabelReplayGenerator(std::map<std::string, CriterionLabels, std::less<>> answer_key);
    static LabelReplayGenerator from_corpus(const Corpus& corpus);

    Verdict classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const override;
    std::string fingerprint() const override { return "label-replay"; }
    std::size_t parallelism() const noexcept override;

private:
    std::map<std::string, CriterionLabels, std::less<>> answer_key_;
};

class ConstantGenerator final : public Generator {
public:
    explicit ConstantGenerator(EligibilityLabel label) : label_(label) {}
    Verdict classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const override;
    std::string fingerprint() const override;

private:
    EligibilityLabel label_;
};

/// `answer_key` is only consulted by LabelReplay.
std::unique_ptr<Generator> make_generator(const GeneratorConfig& config, const Corpus* answer_key = nullptr);

}  // namespace trialscreen
