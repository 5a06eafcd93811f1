#include "trialscreen/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "trialscreen/errors.hpp"

namespace trialscreen {

using nlohmann::json;

Prf prf(const ClassCounts& c) noexcept {
    auto ratio = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); };
    Prf out;
    out.precision = ratio(c.tp, c.tp + c.fp);
    out.recall = ratio(c.tp, c.tp + c.fn);
    const double sum = out.precision + out.recall;
    out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
    return out;
}

double macro_of(std::span<const double> per_criterion_scores) {
    if (per_criterion_scores.size() != kCriterionCount) {
        throw std::invalid_argument("macro_of needs exactly 13 values, got " + std::to_string(per_criterion_scores.size()));
    }
    double sum = 0.0;
    for (double v : per_criterion_scores) sum += v;
    return sum / static_cast<double>(kCriterionCount);
}

AurocResult auroc(std::span<const std::pair<double, EligibilityLabel>> pairs) {
    AurocResult out;
    out.hard_label = std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.first == 0.0 || p.first == 1.0; });
    std::vector<std::pair<double, EligibilityLabel>> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (sorted[t].second == EligibilityLabel::Met) {
                positive_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = sorted.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        out.degenerate = true;
        out.value = 0.5;
        return out;
    }
    const double np = static_cast<double>(n_pos);
    out.value = (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
    return out;
}

MetricsReport score_run(std::span<const Verdict> verdicts, const GoldLabels& gold) {
    std::map<std::pair<std::string, std::size_t>, const Verdict*> by_key;
    std::vector<std::string> problems;
    auto pair_name = [](std::string_view patient, CriterionId id) {
        return std::string(patient) + "/" + std::string(to_string(id));
    };
    for (const auto& v : verdicts) {
        if (!gold.count(v.patient_id)) {
            problems.push_back("unexpected " + pair_name(v.patient_id, v.criterion));
            continue;
        }
        if (!by_key.emplace(std::make_pair(v.patient_id, index_of(v.criterion)), &v).second) {
            problems.push_back("duplicate " + pair_name(v.patient_id, v.criterion));
        }
    }
    for (const auto& [patient, labels] : gold) {
        for (auto id : kAllCriteria) {
            if (!by_key.count({patient, index_of(id)})) problems.push_back("missing " + pair_name(patient, id));
        }
    }
    if (!problems.empty()) {
        auto message = "verdicts do not cover the gold labels exactly once (" + std::to_string(problems.size()) +
                       " problems, first: " + problems.front() + ")";
        throw CoverageError(std::move(message), std::move(problems));
    }

    MetricsReport report;
    report.n_patients = gold.size();
    report.hard_label_auroc = true;
    for (const auto& v : verdicts) {
        if (v.anomaly) ++report.anomaly_count;
    }
    ClassCounts pooled_met, pooled_not_met;
    std::array<double, kCriterionCount> f1s{};
    std::array<double, kCriterionCount> aurocs{};
    for (auto id : kAllCriteria) {
        auto& cs = report.criteria[index_of(id)];
        cs.criterion = id;
        std::vector<std::pair<double, EligibilityLabel>> scored;
        for (const auto& [patient, labels] : gold) {
            const Verdict& v = *by_key.at({patient, index_of(id)});
            const bool gold_met = labels[index_of(id)] == EligibilityLabel::Met;
            const bool pred_met = v.predicted == EligibilityLabel::Met;
            if (gold_met && pred_met) ++cs.met_counts.tp;
            if (!gold_met && pred_met) ++cs.met_counts.fp;
            if (gold_met && !pred_met) ++cs.met_counts.fn;
            if (!gold_met && !pred_met) ++cs.not_met_counts.tp;
            if (gold_met && !pred_met) ++cs.not_met_counts.fp;
            if (!gold_met && pred_met) ++cs.not_met_counts.fn;
            scored.emplace_back(v.met_score, labels[index_of(id)]);
        }
        cs.met = prf(cs.met_counts);
        cs.not_met = prf(cs.not_met_counts);
        cs.criterion_f1 = (cs.met.f1 + cs.not_met.f1) / 2.0;
        const auto a = auroc(scored);
        cs.auroc = a.value;
        cs.auroc_degenerate = a.degenerate;
        report.hard_label_auroc = report.hard_label_auroc && a.hard_label;
        f1s[index_of(id)] = cs.criterion_f1;
        aurocs[index_of(id)] = cs.auroc;
        for (auto [dst, src] : {std::pair{&pooled_met, &cs.met_counts}, std::pair{&pooled_not_met, &cs.not_met_counts}}) {
            dst->tp += src->tp;
            dst->fp += src->fp;
            dst->fn += src->fn;
        }
    }
    report.micro_met = prf(pooled_met);
    report.micro_not_met = prf(pooled_not_met);
    report.micro_p = (report.micro_met.precision + report.micro_not_met.precision) / 2.0;
    report.micro_r = (report.micro_met.recall + report.micro_not_met.recall) / 2.0;
    report.micro_f1 = (report.micro_met.f1 + report.micro_not_met.f1) / 2.0;
    report.macro_f1 = macro_of(f1s);
    report.auc = macro_of(aurocs);
    return report;
}

std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept {
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    return std::nullopt;
}

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string delta4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.4f", v);
    // "-0.0000" and "+0.0000" both read as no change.
    if (std::string_view(buf) == "-0.0000" || std::string_view(buf) == "+0.0000") return "0.0000";
    return buf;
}

std::string full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json counts_json(const ClassCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }
json prf_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }
ClassCounts counts_from(const json& j) { return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>()}; }
Prf prf_from(const json& j) { return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()}; }

std::string render_markdown(const MetricsReport& r, const MetricsReport* baseline) {
    std::string out = "## Summary\n\n| Micro-P | Micro-R | Micro-F1 | Macro-F1 | AUC |\n|---|---|---|---|---|\n";
    out += "| " + fmt4(r.micro_p) + " | " + fmt4(r.micro_r) + " | " + fmt4(r.micro_f1) + " | " + fmt4(r.macro_f1) +
           " | " + fmt4(r.auc) + " |\n\n";
    out += "Patients: " + std::to_string(r.n_patients) + ". Anomalous verdicts: " + std::to_string(r.anomaly_count) + ".\n";
    if (r.hard_label_auroc) {
        out += "AUC is a hard-label AUROC: every score is 0 or 1, so it equals balanced accuracy.\n";
    }
    out += "\n## Per-criterion F1\n\n| Criterion | F1 (met) | F1 (not met) | Criterion F1 | AUROC |";
    out += baseline ? " Δ vs baseline |\n|---|---|---|---|---|---|\n" : "\n|---|---|---|---|---|\n";
    for (const auto& cs : r.criteria) {
        out += "| " + std::string(to_string(cs.criterion)) + " | " + fmt4(cs.met.f1) + " | " + fmt4(cs.not_met.f1) +
               " | " + fmt4(cs.criterion_f1) + " | " + fmt4(cs.auroc) + (cs.auroc_degenerate ? "*" : "") + " |";
        if (baseline) out += " " + delta4(cs.criterion_f1 - baseline->criteria[index_of(cs.criterion)].criterion_f1) + " |";
        out += "\n";
    }
    out += "| Micro avg | " + fmt4(r.micro_met.f1) + " | " + fmt4(r.micro_not_met.f1) + " | " + fmt4(r.micro_f1) +
           " | " + fmt4(r.auc) + " |";
    if (baseline) out += " " + delta4(r.micro_f1 - baseline->micro_f1) + " |";
    out += "\n| Macro avg | | | " + fmt4(r.macro_f1) + " | |";
    if (baseline) out += " " + delta4(r.macro_f1 - baseline->macro_f1) + " |";
    out += "\n";
    if (std::any_of(r.criteria.begin(), r.criteria.end(), [](const CriterionScore& c) { return c.auroc_degenerate; })) {
        out += "\n\\* one class absent from the gold labels; AUROC fixed at 0.5.\n";
    }
    return out;
}

std::string render_csv(const MetricsReport& r) {
    std::string out =
        "criterion,p_met,r_met,f1_met,p_notmet,r_notmet,f1_notmet,criterion_f1,auroc,"
        "tp_met,fp_met,fn_met,tp_notmet,fp_notmet,fn_notmet,auroc_degenerate\n";
    for (const auto& c : r.criteria) {
        out += std::string(to_string(c.criterion)) + "," + full(c.met.precision) + "," + full(c.met.recall) + "," +
               full(c.met.f1) + "," + full(c.not_met.precision) + "," + full(c.not_met.recall) + "," +
               full(c.not_met.f1) + "," + full(c.criterion_f1) + "," + full(c.auroc) + "," +
               std::to_string(c.met_counts.tp) + "," + std::to_string(c.met_counts.fp) + "," +
               std::to_string(c.met_counts.fn) + "," + std::to_string(c.not_met_counts.tp) + "," +
               std::to_string(c.not_met_counts.fp) + "," + std::to_string(c.not_met_counts.fn) + "," +
               (c.auroc_degenerate ? "1" : "0") + "\n";
    }
    out += "MICRO," + full(r.micro_met.precision) + "," + full(r.micro_met.recall) + "," + full(r.micro_met.f1) + "," +
           full(r.micro_not_met.precision) + "," + full(r.micro_not_met.recall) + "," + full(r.micro_not_met.f1) + "," +
           full(r.micro_f1) + "," + full(r.auc) + ",,,,,,,\n";
    out += "MACRO,,,,,,," + full(r.macro_f1) + "," + full(r.auc) + ",,,,,,,\n";
    out += "# micro_p," + full(r.micro_p) + "\n# micro_r," + full(r.micro_r) + "\n";
    out += "# hard_label_auroc," + std::string(r.hard_label_auroc ? "1" : "0") + "\n";
    out += "# anomaly_count," + std::to_string(r.anomaly_count) + "\n# n_patients," + std::to_string(r.n_patients) + "\n";
    return out;
}

json report_json(const MetricsReport& r) {
    json criteria = json::array();
    for (const auto& c : r.criteria) {
        criteria.push_back({{"criterion", to_string(c.criterion)},
                            {"met_counts", counts_json(c.met_counts)},
                            {"not_met_counts", counts_json(c.not_met_counts)},
                            {"met", prf_json(c.met)},
                            {"not_met", prf_json(c.not_met)},
                            {"criterion_f1", c.criterion_f1},
                            {"auroc", c.auroc},
                            {"auroc_degenerate", c.auroc_degenerate}});
    }
    return {{"criteria", criteria},
            {"micro_met", prf_json(r.micro_met)},
            {"micro_not_met", prf_json(r.micro_not_met)},
            {"micro_p", r.micro_p},
            {"micro_r", r.micro_r},
            {"micro_f1", r.micro_f1},
            {"macro_f1", r.macro_f1},
            {"auc", r.auc},
            {"hard_label_auroc", r.hard_label_auroc},
            {"anomaly_count", r.anomaly_count},
            {"n_patients", r.n_patients}};
}

}  // namespace

std::string render_report(const MetricsReport& report, ReportFormat format, const MetricsReport* baseline) {
    switch (format) {
        case ReportFormat::Markdown: return render_markdown(report, baseline);
        case ReportFormat::Csv: return render_csv(report);
        case ReportFormat::Json: return report_json(report).dump(2) + "\n";
    }
    throw std::invalid_argument("unknown report format");
}

MetricsReport report_from_json(std::string_view json_text) {
    MetricsReport r;
    try {
        const auto j = json::parse(json_text);
        const auto& criteria = j.at("criteria");
        if (criteria.size() != kCriterionCount) throw FormatError("metrics report must hold 13 criteria");
        std::set<std::size_t> seen;
        for (const auto& c : criteria) {
            const auto id = criterion_from_string(c.at("criterion").get<std::string>());
            if (!id || !seen.insert(index_of(*id)).second) throw FormatError("metrics report has a bad criterion entry");
            auto& cs = r.criteria[index_of(*id)];
            cs.criterion = *id;
            cs.met_counts = counts_from(c.at("met_counts"));
            cs.not_met_counts = counts_from(c.at("not_met_counts"));
            cs.met = prf_from(c.at("met"));
            cs.not_met = prf_from(c.at("not_met"));
            cs.criterion_f1 = c.at("criterion_f1").get<double>();
            cs.auroc = c.at("auroc").get<double>();
            cs.auroc_degenerate = c.at("auroc_degenerate").get<bool>();
        }
        r.micro_met = prf_from(j.at("micro_met"));
        r.micro_not_met = prf_from(j.at("micro_not_met"));
        r.micro_p = j.at("micro_p").get<double>();
        r.micro_r = j.at("micro_r").get<double>();
        r.micro_f1 = j.at("micro_f1").get<double>();
        r.macro_f1 = j.at("macro_f1").get<double>();
        r.auc = j.at("auc").get<double>();
        r.hard_label_auroc = j.at("hard_label_auroc").get<bool>();
        r.anomaly_count = j.at("anomaly_count").get<std::size_t>();
        r.n_patients = j.at("n_patients").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed metrics report: ") + e.what());
    }
    return r;
}

}  // namespace trialscreen
