#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trialscreen/criteria.hpp"
#include "trialscreen/generator.hpp"

namespace trialscreen {

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); every 0/0 is 0.
Prf prf(const ClassCounts& counts) noexcept;

struct CriterionScore {
    CriterionId criterion = CriterionId::Abdominal;
    ClassCounts met_counts;
    ClassCounts not_met_counts;
    Prf met;
    Prf not_met;
    double criterion_f1 = 0.0;  // (F1_met + F1_not_met) / 2
    double auroc = 0.5;
    bool auroc_degenerate = false;
};

struct MetricsReport {
    std::array<CriterionScore, kCriterionCount> criteria{};
    Prf micro_met;
    Prf micro_not_met;
    double micro_p = 0.0;
    double micro_r = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double auc = 0.0;
    bool hard_label_auroc = false;
    std::size_t anomaly_count = 0;
    std::size_t n_patients = 0;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline bool operator==(const ClassCounts& a, const ClassCounts& b) {
    return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn;
}
inline bool operator==(const Prf& a, const Prf& b) {
    return a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
}
inline bool operator==(const CriterionScore& a, const CriterionScore& b) {
    return a.criterion == b.criterion && a.met_counts == b.met_counts && a.not_met_counts == b.not_met_counts &&
           a.met == b.met && a.not_met == b.not_met && a.criterion_f1 == b.criterion_f1 && a.auroc == b.auroc &&
           a.auroc_degenerate == b.auroc_degenerate;
}

using GoldLabels = std::map<std::string, CriterionLabels, std::less<>>;

/// Scores verdicts against gold. Throws CoverageError unless every
/// (patient, criterion) in gold has exactly one verdict and there are no extras.
MetricsReport score_run(std::span<const Verdict> verdicts, const GoldLabels& gold);

/// Unweighted mean of exactly 13 per-criterion values.
double macro_of(std::span<const double> per_criterion_scores);

struct AurocResult {
    double value = 0.5;
    bool degenerate = false;  // one class absent
    bool hard_label = false;  // every score is 0 or 1
};

/// Mann-Whitney AUROC with ties counted as one half.
AurocResult auroc(std::span<const std::pair<double, EligibilityLabel>> pairs);

enum class ReportFormat { Markdown, Csv, Json };
std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept;

/// Markdown: summary row plus the per-criterion table, with a delta column
/// when `baseline` is given. CSV/JSON carry every field at full precision.
std::string render_report(const MetricsReport& report, ReportFormat format,
                          const MetricsReport* baseline = nullptr);

MetricsReport report_from_json(std::string_view json_text);

}  // namespace trialscreen
