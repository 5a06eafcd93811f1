#include "trialscreen/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"

namespace trialscreen {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string chunks_fingerprint(const std::vector<Chunk>& chunks) {
    std::uint64_t h = kFnvOffset;
    for (const auto& c : chunks) {
        h = fnv1a64(c.chunk_id, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(c.text, h);
        h = fnv1a64(std::string_view("\x1e", 1), h);
    }
    return hex64(h);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const PatientRecord& find_record(const Corpus& corpus, std::string_view id) {
    const auto it = std::lower_bound(corpus.begin(), corpus.end(), id,
                                     [](const PatientRecord& r, std::string_view v) { return r.patient_id < v; });
    if (it == corpus.end() || it->patient_id != id) throw ValidationError("patient " + std::string(id) + " is not in the corpus");
    return *it;
}

/// Everything build_context needs, loaded once per run.
struct StrategyResources {
    std::unique_ptr<Embedder> embedder;
    std::optional<ChunkStore> chunks;
    std::optional<VectorIndex> index;
    std::vector<EmbeddingVector> queries;
    std::shared_ptr<const NerBackend> ner;
    std::map<std::string, std::string> fingerprints;

    ContextDeps deps() const {
        ContextDeps d;
        d.embedder = embedder.get();
        d.index = index ? &*index : nullptr;
        d.chunks = chunks ? &*chunks : nullptr;
        d.ner = ner.get();
        d.criterion_queries = queries.empty() ? nullptr : &queries;
        return d;
    }
};

StrategyResources load_resources(const PipelineConfig& config, const Corpus& corpus, Strategy strategy) {
    StrategyResources res;
    if (strategy == Strategy::Rag) {
        res.embedder = make_embedder(config.embedder);
        res.chunks.emplace(corpus, config.chunk);
        const auto path = config.resolved_index_path();
        if (!fs::exists(path)) throw ValidationError("no index at " + path.string() + "; run the index command first");
        res.index = load_index(path, IndexExpectation{res.embedder->fingerprint(), config.chunk.fingerprint()});
        if (res.index->metadata().corpus_fingerprint != chunks_fingerprint(res.chunks->chunks())) {
            throw StaleIndexError("index " + path.string() + " was built from a different corpus; rerun the index command");
        }
        std::vector<std::string> descriptions;
        for (auto id : kAllCriteria) descriptions.push_back(criterion(id).description);
        res.queries = res.embedder->embed(descriptions);
        res.fingerprints["embedder"] = res.embedder->fingerprint();
        res.fingerprints["chunk_policy"] = config.chunk.fingerprint();
        res.fingerprints["index_corpus"] = res.index->metadata().corpus_fingerprint;
    } else if (strategy == Strategy::Ner) {
        res.ner = make_ner_backend(config.ner);
        res.fingerprints["ner"] = res.ner->fingerprint();
    }
    return res;
}

std::string corpus_fingerprint(const Corpus& corpus, const std::vector<std::string>& patients) {
    std::uint64_t h = kFnvOffset;
    for (const auto& id : patients) {
        const auto& r = find_record(corpus, id);
        h = fnv1a64(r.patient_id, h);
        for (const auto& n : r.notes) {
            h = fnv1a64(std::string_view("\x1e", 1), h);
            h = fnv1a64(n.text, h);
        }
        h = fnv1a64(std::string_view("\x1d", 1), h);
    }
    return hex64(h);
}

void write_all(std::ofstream& out, const std::string& text, const fs::path& path) {
    out << text;
    out.flush();
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

IndexSummary cmd_index(const PipelineConfig& config, const Corpus& corpus) {
    const auto start = Clock::now();
    config.chunk.validate();
    config.embedder.validate();
    IndexSummary summary;
    summary.path = config.resolved_index_path();

    const ChunkStore store(corpus, config.chunk);
    const auto embedder = make_embedder(config.embedder);
    const auto corpus_fp = chunks_fingerprint(store.chunks());

    if (fs::exists(summary.path)) {
        try {
            const auto existing = load_index(summary.path);
            const auto& m = existing.metadata();
            if (m.embedder_fingerprint == embedder->fingerprint() &&
                m.chunk_policy_fingerprint == config.chunk.fingerprint() && m.corpus_fingerprint == corpus_fp) {
                summary.cache_hit = true;
                summary.chunks = existing.size();
                summary.dims = existing.dims();
                summary.build_seconds = seconds_since(start);
                return summary;
            }
        } catch (const FormatError&) {
            // Unreadable index: rebuild over it.
        }
    }

    std::vector<std::string> texts;
    texts.reserve(store.size());
    for (const auto& c : store.chunks()) texts.push_back(c.text);
    const auto vectors = embedder->embed(texts);
    const std::size_t dims = vectors.empty() ? std::max<std::size_t>(config.embedder.dims, 1) : vectors.front().dims();
    auto index = VectorIndex::build(store.chunks(), vectors, dims,
                                    {embedder->fingerprint(), config.chunk.fingerprint(), utc_timestamp(), corpus_fp});
    save_index(index, summary.path);
    summary.chunks = index.size();
    summary.dims = index.dims();
    summary.build_seconds = seconds_since(start);
    return summary;
}

std::string_view to_string(SplitSelector selector) noexcept {
    switch (selector) {
        case SplitSelector::Train: return "train";
        case SplitSelector::Validation: return "validation";
        case SplitSelector::Test: return "test";
        case SplitSelector::All: return "all";
    }
    return "?";
}

std::optional<SplitSelector> split_selector_from_string(std::string_view text) noexcept {
    for (auto s : {SplitSelector::Train, SplitSelector::Validation, SplitSelector::Test, SplitSelector::All}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

std::vector<std::string> select_patients(const PipelineConfig& config, const Corpus& corpus, SplitSelector selector) {
    std::vector<std::string> ids;
    if (selector == SplitSelector::All) {
        for (const auto& r : corpus) ids.push_back(r.patient_id);
    } else {
        DatasetSplit split;
        if (!config.split_file.empty()) {
            split = split_from_json(read_text(config.split_file));
            check_split(split, corpus);
        } else {
            split = make_split(corpus, config.split_seed);
        }
        ids = selector == SplitSelector::Train        ? split.train
              : selector == SplitSelector::Validation ? split.validation
                                                      : split.test;
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

ScreenSummary cmd_screen(const PipelineConfig& config, const Corpus& corpus, const ScreenOptions& options) {
    const auto start = Clock::now();
    config.validate();
    ScreenSummary summary;

    const auto patients = select_patients(config, corpus, options.split);
    if (patients.empty()) throw ValidationError("the selected split holds no patients");
    const auto resources = load_resources(config, corpus, config.strategy.strategy);
    const auto generator = make_generator(config.generator, &corpus);

    ManifestHeader header;
    header.strategy = std::string(to_string(config.strategy.strategy));
    header.split = std::string(to_string(options.split));
    header.config = config.snapshot();
    // Where outputs go does not change what a run computes.
    for (const char* key : {"output_dir", "index_path", "workers"}) header.config.erase(key);
    header.fingerprints = resources.fingerprints;
    header.fingerprints["generator"] = generator->fingerprint();
    header.fingerprints["corpus"] = corpus_fingerprint(corpus, patients);
    header.patients = patients;
    header.label_replay = config.generator.backend == GeneratorBackend::LabelReplay;
    header.decoding = config.generator.backend == GeneratorBackend::Remote
                          ? "server defaults; max_new_tokens=" + std::to_string(config.generator.max_new_tokens)
                          : "not applicable";
    header.run_id = hex64(fnv1a64(header_line(header)));

    summary.manifest_path = options.manifest_path.empty()
                                ? config.output_dir / ("manifest-" + header.strategy + "-" + header.split + ".jsonl")
                                : options.manifest_path;
    if (summary.manifest_path.has_parent_path()) fs::create_directories(summary.manifest_path.parent_path());

    std::vector<VerdictRecord> records;
    if (fs::exists(summary.manifest_path)) {
        auto existing = read_manifest(summary.manifest_path);
        if (existing.header != header) {
            throw ValidationError("manifest " + summary.manifest_path.string() +
                                  " belongs to a different run; remove it or choose another path");
        }
        records = std::move(existing.records);
        fs::resize_file(summary.manifest_path, existing.valid_prefix_bytes);
    } else {
        std::ofstream out(summary.manifest_path, std::ios::binary | std::ios::trunc);
        write_all(out, header_line(header) + "\n", summary.manifest_path);
    }
    summary.resumed = records.size();

    struct Task {
        std::string patient_id;
        CriterionId criterion;
    };
    std::set<std::string> done;
    for (const auto& r : records) done.insert(r.key());
    std::vector<Task> pending;
    for (const auto& p : patients) {
        for (auto id : kAllCriteria) {
            if (!done.count(pair_key(p, id))) pending.push_back({p, id});
        }
    }

    const std::size_t total = patients.size() * kCriterionCount;
    const auto allowed_failures = static_cast<std::size_t>(std::floor(config.failure_threshold * static_cast<double>(total)));
    std::size_t failures = 0;
    for (const auto& r : records) failures += r.backend_failure ? 1 : 0;

    std::ofstream out(summary.manifest_path, std::ios::binary | std::ios::app);
    std::mutex commit_mutex;
    std::vector<std::optional<VerdictRecord>> ready(pending.size());
    std::size_t next_commit = 0;
    std::size_t appended = 0;
    std::atomic<bool> stop{false};
    bool aborted = false;
    const auto deps = resources.deps();

    const std::size_t workers = std::max<std::size_t>(
        1, config.workers == 0 ? generator->parallelism() : std::min(config.workers, generator->parallelism()));
    detail::parallel_for(pending.size(), workers, [&](std::size_t i) {
        if (stop) return;
        const auto& task = pending[i];
        const auto& record = find_record(corpus, task.patient_id);
        const auto bundle = build_context(record, task.criterion, config.strategy, deps);
        VerdictRecord rec;
        rec.patient_id = task.patient_id;
        rec.criterion = task.criterion;
        rec.context_tokens = bundle.token_count;
        rec.pre_limit_tokens = bundle.pre_limit_tokens;
        rec.token_limit = bundle.token_limit;
        rec.truncated = bundle.truncated;
        for (const auto& e : bundle.evidence) rec.evidence.emplace_back(e.chunk_id, e.score);
        try {
            const auto verdict = generator->classify(render_prompt(bundle, task.criterion), bundle, task.criterion);
            rec.predicted = verdict.predicted;
            rec.met_score = verdict.met_score;
            rec.raw_text_hash = hex64(fnv1a64(verdict.raw_text));
            rec.anomaly = verdict.anomaly;
        } catch (const BackendError& e) {
            rec.backend_failure = true;
            rec.anomaly = std::string("backend failure: ") + e.what();
        } catch (const ProtocolError& e) {
            rec.backend_failure = true;
            rec.anomaly = std::string("backend failure: ") + e.what();
        }
        if (rec.backend_failure) {
            rec.predicted = kDefaultLabel;
            rec.met_score = kDefaultLabel == EligibilityLabel::Met ? 1.0 : 0.0;
            rec.raw_text_hash = hex64(fnv1a64(""));
        }
        if (bundle.unknown_patient && !rec.anomaly) rec.anomaly = "patient has no chunks in the index";

        std::lock_guard lock(commit_mutex);
        if (stop) return;
        if (rec.backend_failure && ++failures > allowed_failures) {
            aborted = true;
            stop = true;
            return;
        }
        ready[i] = std::move(rec);
        while (next_commit < ready.size() && ready[next_commit]) {
            if (options.stop_after && appended >= *options.stop_after) {
                stop = true;
                return;
            }
            write_all(out, record_line(*ready[next_commit]) + "\n", summary.manifest_path);
            records.push_back(std::move(*ready[next_commit]));
            ready[next_commit].reset();
            ++next_commit;
            ++appended;
        }
        if (options.stop_after && appended >= *options.stop_after) stop = true;
    });

    for (const auto& r : records) {
        (r.predicted == EligibilityLabel::Met ? summary.met : summary.not_met)++;
        summary.anomalies += r.anomaly ? 1 : 0;
        summary.backend_failures += r.backend_failure ? 1 : 0;
    }
    summary.verdicts = records.size();
    summary.backend_failures = std::max(summary.backend_failures, failures);

    const bool interrupted = options.stop_after && records.size() < total && !aborted;
    if (!interrupted) {
        ManifestFooter footer;
        footer.complete = !aborted && records.size() == total;
        footer.verdicts = records.size();
        footer.anomalies = summary.anomalies;
        if (aborted) {
            footer.reason = "aborted: backend failures exceeded " + std::to_string(allowed_failures) + " of " +
                            std::to_string(total) + " tasks";
        }
        write_all(out, footer_line(footer) + "\n", summary.manifest_path);
        summary.complete = footer.complete;
    }
    summary.seconds = seconds_since(start);

    json timing = {{"run_id", header.run_id},
                   {"finished_at", utc_timestamp()},
                   {"seconds", summary.seconds},
                   {"new_verdicts", appended},
                   {"resumed_verdicts", summary.resumed}};
    std::ofstream(summary.manifest_path.string() + ".timing.json", std::ios::trunc) << timing.dump(2) << "\n";
    return summary;
}

GoldLabels gold_labels(const Corpus& corpus) {
    GoldLabels gold;
    for (const auto& r : corpus) {
        if (!r.labels) throw ValidationError("patient " + r.patient_id + " has no gold labels");
        gold.emplace(r.patient_id, *r.labels);
    }
    return gold;
}

namespace {

MetricsReport score_manifest(const Manifest& m, const Corpus& gold_corpus) {
    const auto missing = m.missing_pairs();
    if (!missing.empty() || !m.footer || !m.footer->complete) {
        std::string what = "manifest is incomplete";
        if (!missing.empty()) what += ": " + std::to_string(missing.size()) + " pairs lack a verdict";
        else if (m.footer) what += ": " + m.footer->reason;
        else what += ": no footer (interrupted run)";
        throw IncompleteRunError(what, missing);
    }
    GoldLabels gold;
    for (const auto& id : m.header.patients) {
        const auto& r = find_record(gold_corpus, id);
        if (!r.labels) throw ValidationError("patient " + id + " has no gold labels");
        gold.emplace(id, *r.labels);
    }
    std::vector<Verdict> verdicts;
    verdicts.reserve(m.records.size());
    for (const auto& r : m.records) verdicts.push_back(r.to_verdict());
    return score_run(verdicts, gold);
}

}  // namespace

EvalResult cmd_eval(const fs::path& manifest_path, const Corpus& gold,
                    const std::optional<fs::path>& baseline_manifest) {
    const auto manifest = read_manifest(manifest_path);
    EvalResult result;
    result.report = score_manifest(manifest, gold);
    if (baseline_manifest) result.baseline = score_manifest(read_manifest(*baseline_manifest), gold);
    const MetricsReport* base = result.baseline ? &*result.baseline : nullptr;
    result.markdown = "# Screening report: " + manifest.header.strategy + " on " + manifest.header.split + " split\n\n" +
                      "Run " + manifest.header.run_id + ", generator " + manifest.header.fingerprints.at("generator") +
                      ".\n\n";
    if (manifest.header.label_replay) {
        result.markdown += "**Label replay run.** Verdicts are copied from the gold labels; these scores check the "
                           "harness and say nothing about any model.\n\n";
    }
    result.markdown += render_report(result.report, ReportFormat::Markdown, base);
    result.csv = render_report(result.report, ReportFormat::Csv, base);
    result.json = render_report(result.report, ReportFormat::Json, base);
    return result;
}

std::vector<std::size_t> per_patient_tokens(const PipelineConfig& config, const Corpus& corpus, InputType type) {
    std::vector<std::size_t> out(corpus.size(), 0);
    if (type == InputType::Original) {
        detail::parallel_for(corpus.size(), config.workers,
                             [&](std::size_t i) { out[i] = count_tokens(concatenate_notes(corpus[i])); });
        return out;
    }
    if (type == InputType::NerProblem) {
        const auto ner = make_ner_backend(config.ner);
        detail::parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
            out[i] = condense(corpus[i], *ner, std::numeric_limits<std::size_t>::max()).token_count;
        });
        return out;
    }
    const auto resources = load_resources(config, corpus, Strategy::Rag);
    const auto deps = resources.deps();
    StrategyConfig rag = config.strategy;
    rag.strategy = Strategy::Rag;
    rag.token_limit = StrategyConfig::defaults(Strategy::Rag).token_limit;
    detail::parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
        std::size_t sum = 0;
        for (auto id : kAllCriteria) sum += build_context(corpus[i], id, rag, deps).pre_limit_tokens;
        out[i] = static_cast<std::size_t>(std::llround(static_cast<double>(sum) / static_cast<double>(kCriterionCount)));
    });
    return out;
}

}  // namespace trialscreen
