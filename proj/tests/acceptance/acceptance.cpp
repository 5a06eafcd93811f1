// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/fixtures.hpp"
#include "trialscreen/metrics.hpp"
#include "trialscreen/pipeline.hpp"
#include "trialscreen/synthetic.hpp"
#include "trialscreen/vindex.hpp"

using namespace trialscreen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and thresholds.
constexpr double kScoreTolerance = 1e-9;
constexpr double kRetrievalSeconds = 1.0;
constexpr double kMacroTolerance = 1e-4;
constexpr double kHarnessSeconds = 10.0;
constexpr double kLocalizationRate = 0.95;
constexpr double kOracleMicroF1 = 0.99;
constexpr double kTokenStatsTolerance = 0.15;
constexpr std::uint64_t kSyntheticSeed = 7;
constexpr std::size_t kSyntheticPatients = 288;

struct Outcome {
    enum class Status { Pass, Fail, Skip } status = Status::Fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::Skip, std::move(d)}; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

PipelineConfig config_for(const fs::path& corpus, const fs::path& out, const std::string& extra = {}) {
    return PipelineConfig::parse("corpus_path = " + corpus.string() + "\noutput_dir = " + out.string() + "\n" + extra);
}

Outcome ac1_retrieval_exactness() {
    std::mt19937_64 rng(2024);
    constexpr std::size_t kVectors = 1000, kPatients = 20, kQueries = 50, kK = 10, kDims = 384;
    std::normal_distribution<double> g;
    auto random_unit = [&] {
        std::vector<double> raw(kDims);
        for (auto& x : raw) x = g(rng);
        return EmbeddingVector::normalized(raw);
    };
    std::vector<Chunk> chunks(kVectors);
    std::vector<EmbeddingVector> vectors;
    for (std::size_t i = 0; i < kVectors; ++i) {
        chunks[i].patient_id = "patient-" + std::to_string(i % kPatients);
        chunks[i].chunk_id = make_chunk_id(chunks[i].patient_id, 0, i);
        vectors.push_back(random_unit());
    }
    std::vector<std::pair<EmbeddingVector, std::string>> queries;
    for (std::size_t q = 0; q < kQueries; ++q) queries.emplace_back(random_unit(), "patient-" + std::to_string(rng() % kPatients));

    const auto start = Clock::now();
    const auto index = VectorIndex::build(chunks, vectors, kDims, {"e", "c", "t", "x"});
    std::vector<RetrievalResult> results;
    for (const auto& [query, pid] : queries) results.push_back(index.retrieve(query, pid, kK));
    const double elapsed = seconds_since(start);

    for (std::size_t q = 0; q < kQueries; ++q) {
        const auto& [query, pid] = queries[q];
        std::vector<std::pair<double, std::string>> scan;
        for (std::size_t i = 0; i < kVectors; ++i) {
            if (chunks[i].patient_id != pid) continue;
            double s = 0.0;
            for (std::size_t d = 0; d < kDims; ++d) s += static_cast<double>(query.values()[d]) * vectors[i].values()[d];
            scan.emplace_back(s, chunks[i].chunk_id);
        }
        std::sort(scan.begin(), scan.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        scan.resize(std::min(scan.size(), kK));
        const auto& hits = results[q].hits;
        if (hits.size() != scan.size()) return fail("query " + std::to_string(q) + ": hit count differs");
        for (std::size_t i = 0; i < scan.size(); ++i) {
            if (hits[i].chunk_id != scan[i].second || std::abs(hits[i].score - scan[i].first) > kScoreTolerance) {
                return fail("query " + std::to_string(q) + " rank " + std::to_string(i + 1) + " differs from the oracle");
            }
        }
    }
    const auto detail = "50 queries x k=10 over 1000 vectors identical to brute force; " + fmt("%.4f s", elapsed);
    return elapsed < kRetrievalSeconds ? pass(detail) : fail(detail + " (limit 1 s)");
}

Outcome ac2_metric_anchors() {
    const auto& t4 = builtin_fixture("table4_per_criterion_f1");
    const double rag = macro_of(t4.column_values("RAG-top10", is_criterion_row));
    const double ner = macro_of(t4.column_values("NER-512", is_criterion_row));

    GoldLabels gold;
    std::vector<Verdict> verdicts;
    for (int p = 0; p < 5; ++p) {
        CriterionLabels labels;
        labels.fill(EligibilityLabel::NotMet);
        const auto pid = "p" + std::to_string(p);
        gold[pid] = labels;
        for (auto id : kAllCriteria) {
            Verdict v;
            v.patient_id = pid;
            v.criterion = id;
            verdicts.push_back(v);
        }
    }
    const double keto = score_run(verdicts, gold).criteria[index_of(CriterionId::Keto1Yr)].criterion_f1;
    const auto detail = "macro(RAG-top10) " + fmt("%.5f", rag) + ", macro(NER-512) " + fmt("%.5f", ner) +
                        ", zero-positive criterion F1 " + fmt("%.4f", keto);
    const bool ok = std::abs(rag - 0.7896) <= kMacroTolerance && std::abs(ner - 0.4859) <= kMacroTolerance && keto == 0.5;
    return ok ? pass(detail) : fail(detail);
}

Outcome ac3_harness_soundness() {
    tstest::TempDir dir;
    const auto start = Clock::now();
    const auto corpus = load_corpus(tstest::golden_dir() / "corpus");
    const auto config = config_for(tstest::golden_dir() / "corpus", dir / "out", "generator_backend = label_replay\n");
    cmd_index(config, corpus);
    ScreenOptions options;
    options.split = SplitSelector::All;
    const auto screen = cmd_screen(config, corpus, options);
    const auto eval = cmd_eval(screen.manifest_path, corpus);
    const double elapsed = seconds_since(start);
    const auto& r = eval.report;
    const auto detail = "micro_f1 " + fmt("%.4f", r.micro_f1) + ", macro_f1 " + fmt("%.4f", r.macro_f1) + ", " +
                        std::to_string(screen.verdicts) + " verdicts, " + std::to_string(r.anomaly_count) +
                        " anomalies, " + fmt("%.2f s", elapsed);
    const bool ok = r.micro_f1 == 1.0 && r.macro_f1 == 1.0 && screen.verdicts == 260 && r.anomaly_count == 0 &&
                    screen.complete && elapsed < kHarnessSeconds;
    return ok ? pass(detail) : fail(detail);
}

struct SyntheticRun {
    tstest::TempDir dir;
    SyntheticCorpus synth;
    Corpus corpus;
    fs::path corpus_dir;
};

SyntheticRun& synthetic_run() {
    static SyntheticRun run;
    if (run.corpus.empty()) {
        run.synth = generate_synthetic_corpus(kSyntheticSeed, kSyntheticPatients);
        run.corpus_dir = run.dir / "corpus";
        write_corpus_xml(run.synth.records, run.corpus_dir);
        run.corpus = load_corpus(run.corpus_dir);
    }
    return run;
}

Outcome ac4_evidence_localization() {
    auto& run = synthetic_run();
    const auto config = config_for(run.corpus_dir, run.dir / "rag", "generator_backend = keyword_oracle\n");
    cmd_index(config, run.corpus);
    ScreenOptions options;
    options.split = SplitSelector::All;
    const auto screen = cmd_screen(config, run.corpus, options);
    const auto manifest = read_manifest(screen.manifest_path);
    const ChunkStore store(run.corpus, config.chunk);

    std::map<std::string, const VerdictRecord*> by_pair;
    for (const auto& r : manifest.records) by_pair[r.key()] = &r;
    std::size_t localized = 0;
    for (const auto& row : run.synth.manifest) {
        const auto* rec = by_pair.at(pair_key(row.patient_id, row.criterion));
        for (const auto& [chunk_id, score] : rec->evidence) {
            const auto* chunk = store.find(chunk_id);
            if (chunk && chunk->note_index == row.note_index && chunk->text.find(row.sentence) != std::string::npos) {
                ++localized;
                break;
            }
        }
    }
    const double rate = static_cast<double>(localized) / static_cast<double>(run.synth.manifest.size());
    const auto eval = cmd_eval(screen.manifest_path, run.corpus);
    const auto detail = std::to_string(localized) + "/" + std::to_string(run.synth.manifest.size()) +
                        " planted pairs localized (" + fmt("%.4f", rate) + "), keyword-oracle micro_f1 " +
                        fmt("%.4f", eval.report.micro_f1);
    return rate >= kLocalizationRate && eval.report.micro_f1 >= kOracleMicroF1 ? pass(detail) : fail(detail);
}

Outcome ac5_token_budget_ordering() {
    auto& run = synthetic_run();
    cmd_index(config_for(run.corpus_dir, run.dir / "rag"), run.corpus);
    ScreenOptions options;
    options.split = SplitSelector::All;
    std::size_t over_limit = 0;
    std::size_t contexts = 0;
    double rag_mean = 0.0;
    for (const std::string strategy : {"rag", "ner", "ori"}) {
        std::vector<std::string> limits = strategy == "ner" ? std::vector<std::string>{"512", "2048", "8192"}
                                                            : std::vector<std::string>{""};
        for (const auto& limit : limits) {
            std::string extra = "strategy = " + strategy + "\n";
            if (!limit.empty()) extra += "ner_token_limit = " + limit + "\n";
            const auto config = config_for(run.corpus_dir, run.dir / "rag", extra);
            options.manifest_path = run.dir / ("tokens-" + strategy + limit + ".jsonl");
            const auto screen = cmd_screen(config, run.corpus, options);
            double sum = 0.0;
            for (const auto& r : read_manifest(screen.manifest_path).records) {
                over_limit += r.context_tokens > r.token_limit;
                ++contexts;
                sum += static_cast<double>(r.context_tokens);
            }
            if (strategy == "rag") rag_mean = sum / static_cast<double>(screen.verdicts);
        }
    }
    const auto config = config_for(run.corpus_dir, run.dir / "rag");
    const auto ner = token_stats(InputType::NerProblem, per_patient_tokens(config, run.corpus, InputType::NerProblem));
    const auto ori = token_stats(InputType::Original, per_patient_tokens(config, run.corpus, InputType::Original));
    const auto detail = "mean RAG context " + fmt("%.1f", rag_mean) + " < NER summary " + fmt("%.1f", ner.mean) +
                        " < original " + fmt("%.1f", ori.mean) + "; " + std::to_string(over_limit) + " of " +
                        std::to_string(contexts) + " contexts over their limit";
    return rag_mean < ner.mean && ner.mean < ori.mean && over_limit == 0 ? pass(detail) : fail(detail);
}

Outcome ac6_determinism() {
    const auto corpus = load_corpus(tstest::golden_dir() / "corpus");
    tstest::TempDir dir;
    ScreenOptions options;
    options.split = SplitSelector::All;
    std::vector<std::string> manifests;
    for (const char* name : {"first", "second"}) {
        const auto config = config_for(tstest::golden_dir() / "corpus", dir / name, "generator_backend = keyword_oracle\n");
        cmd_index(config, corpus);
        manifests.push_back(tstest::read_file(cmd_screen(config, corpus, options).manifest_path));
    }
    const bool identical = manifests[0] == manifests[1];

    const auto config = config_for(tstest::golden_dir() / "corpus", dir / "first", "generator_backend = keyword_oracle\n");
    options.manifest_path = dir / "resumed.jsonl";
    options.stop_after = 101;
    cmd_screen(config, corpus, options);
    {
        std::ofstream torn(options.manifest_path, std::ios::binary | std::ios::app);
        torn << "{\"anomaly\":null,\"backend_fail";
    }
    options.stop_after.reset();
    const auto resumed = cmd_screen(config, corpus, options);
    const bool resumed_equal = tstest::read_file(options.manifest_path) == manifests[0];
    const auto detail = std::string("independent runs ") + (identical ? "byte-identical" : "DIFFER") +
                        "; interrupted after 101 records and resumed (" + std::to_string(resumed.resumed) +
                        " kept): " + (resumed_equal ? "equal" : "DIFFERENT");
    return identical && resumed_equal && resumed.resumed == 101 ? pass(detail) : fail(detail);
}

Outcome ac7_official_corpus() {
    const char* root = std::getenv("TRIALSCREEN_N2C2_DIR");
    if (!root || !*root || !fs::exists(root)) return skip("official corpus not mounted (set TRIALSCREEN_N2C2_DIR)");
    const auto corpus = load_corpus(root);
    std::vector<std::string> problems;
    if (corpus.size() != 288) problems.push_back("corpus size " + std::to_string(corpus.size()));
    const auto split = make_split(corpus, kDefaultSplitSeed);
    if (split.train.size() != 161 || split.validation.size() != 41 || split.test.size() != 86) {
        problems.push_back("split " + std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) +
                           "/" + std::to_string(split.test.size()));
    }
    const auto& t1 = builtin_fixture("table1_label_distribution");
    for (const auto& row : label_distribution(corpus)) {
        const std::string name(to_string(row.criterion));
        if (static_cast<double>(row.met) != t1.value(name, "met") || static_cast<double>(row.not_met) != t1.value(name, "not_met")) {
            problems.push_back(name + " " + std::to_string(row.met) + "/" + std::to_string(row.not_met));
        }
    }
    const auto config = config_for(root, fs::temp_directory_path());
    const auto ori = token_stats(InputType::Original, per_patient_tokens(config, corpus, InputType::Original));
    const auto& t2 = builtin_fixture("table2_token_stats");
    auto within = [](double got, double want) { return std::abs(got - want) <= kTokenStatsTolerance * want; };
    if (!within(ori.mean, t2.value("Original", "mean")) || !within(static_cast<double>(ori.min), t2.value("Original", "min")) ||
        !within(static_cast<double>(ori.max), t2.value("Original", "max"))) {
        problems.push_back("Original tokens mean " + fmt("%.0f", ori.mean) + " min " + std::to_string(ori.min) + " max " +
                           std::to_string(ori.max));
    }
    if (problems.empty()) return pass("288 patients, 161/41/86 split, label counts and token statistics match");
    std::string detail;
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
    return fail(detail);
}

Outcome ac8_non_reproducibility_statement() {
    const auto readme = tstest::read_file(TRIALSCREEN_README);
    std::string lower = readme;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const bool states = lower.find("not desk-reproducible") != std::string::npos &&
                        lower.find("f1") != std::string::npos && lower.find("auc") != std::string::npos;
    return states ? pass("README states that published F1/AUC values are not desk-reproducible")
                  : fail("README lacks the non-reproducibility statement");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1 retrieval exactness", ac1_retrieval_exactness},
        {"AC2 metric anchors", ac2_metric_anchors},
        {"AC3 harness soundness", ac3_harness_soundness},
        {"AC4 evidence localization", ac4_evidence_localization},
        {"AC5 token-budget ordering", ac5_token_budget_ordering},
        {"AC6 determinism and resumability", ac6_determinism},
        {"AC7 official corpus statistics", ac7_official_corpus},
        {"AC8 non-reproducibility statement", ac8_non_reproducibility_statement},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = fail(std::string("exception: ") + e.what());
        }
        const char* tag = outcome.status == Outcome::Status::Pass ? "PASS"
                          : outcome.status == Outcome::Status::Skip ? "SKIP"
                                                                    : "FAIL";
        failures += outcome.status == Outcome::Status::Fail;
        std::printf("%s %s: %s\n", tag, name.c_str(), outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
