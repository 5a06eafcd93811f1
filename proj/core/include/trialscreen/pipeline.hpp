#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trialscreen/config.hpp"
#include "trialscreen/corpus.hpp"
#include "trialscreen/manifest.hpp"
#include "trialscreen/metrics.hpp"

namespace trialscreen {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int { Ok = 0, Internal = 1, Validation = 2, Backend = 3, Incomplete = 4 };

struct IndexSummary {
    std::filesystem::path path;
    std::size_t chunks = 0;
    std::size_t dims = 0;
    double build_seconds = 0.0;
    bool cache_hit = false;
};

/// Chunks every patient, embeds, builds and atomically saves the index.
/// Skips the rebuild when an index with identical fingerprints exists.
IndexSummary cmd_index(const PipelineConfig& config, const Corpus& corpus);

enum class SplitSelector { Train, Validation, Test, All };
std::string_view to_string(SplitSelector selector) noexcept;
std::optional<SplitSelector> split_selector_from_string(std::string_view text) noexcept;

/// Patient ids selected from the configured split (split_file or seeded split).
std::vector<std::string> select_patients(const PipelineConfig& config, const Corpus& corpus, SplitSelector selector);

struct ScreenOptions {
    SplitSelector split = SplitSelector::Test;
    std::filesystem::path manifest_path;  // empty: <output_dir>/manifest-<strategy>-<split>.jsonl
    /// Stop after appending this many new records without writing a footer,
    /// leaving the manifest as an interrupted run would.
    std::optional<std::size_t> stop_after;
};

struct ScreenSummary {
    std::filesystem::path manifest_path;
    std::size_t verdicts = 0;   // total records in the manifest
    std::size_t resumed = 0;    // records found from an earlier run
    std::size_t met = 0;
    std::size_t not_met = 0;
    std::size_t anomalies = 0;
    std::size_t backend_failures = 0;
    bool complete = false;
    double seconds = 0.0;
};

/// Screens every (patient, criterion) pair of the selected split. Records
/// are appended in canonical order, so a resumed run produces the same file
/// as an uninterrupted one. Returns complete=false if aborted because backend
/// failures exceeded the configured fraction.
ScreenSummary cmd_screen(const PipelineConfig& config, const Corpus& corpus, const ScreenOptions& options);

struct EvalResult {
    MetricsReport report;
    std::optional<MetricsReport> baseline;
    std::string markdown;
    std::string csv;
    std::string json;
};

/// Scores a complete manifest against the corpus labels. Throws
/// IncompleteRunError listing missing pairs otherwise.
EvalResult cmd_eval(const std::filesystem::path& manifest_path, const Corpus& gold,
                    const std::optional<std::filesystem::path>& baseline_manifest = std::nullopt);

GoldLabels gold_labels(const Corpus& corpus);

/// Per-patient token counts of the context as assembled by each strategy
/// (before the strategy's limit). RagTopK averages over the 13 criteria and
/// needs the index from cmd_index.
std::vector<std::size_t> per_patient_tokens(const PipelineConfig& config, const Corpus& corpus, InputType type);

}  // namespace trialscreen
