// trialscreen: command-line front end for ingesting a corpus, building the
// retrieval index, screening patients and scoring runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "trialscreen/config.hpp"
#include "trialscreen/corpus.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/fixtures.hpp"
#include "trialscreen/pipeline.hpp"
#include "trialscreen/synthetic.hpp"

namespace fs = std::filesystem;
using namespace trialscreen;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string corpus;
    bool quiet = false;
};

void info(const Globals& g, const std::string& line) {
    if (!g.quiet) std::cout << line << "\n";
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

PipelineConfig make_config(const Globals& g) {
    PipelineConfig c = g.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(g.config_path);
    if (!g.corpus.empty()) c.corpus_path = g.corpus;
    if (g.seed) c.split_seed = *g.seed;
    if (!g.out_dir.empty()) c.output_dir = g.out_dir;
    return c;
}

Corpus load_configured_corpus(const PipelineConfig& c) {
    if (c.corpus_path.empty()) throw ValidationError("no corpus: pass --corpus or set corpus_path in the config");
    return load_corpus(c.corpus_path);
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Eligibility screening of longitudinal clinical notes"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Pipeline config file (key = value lines)");
    app.add_option("--seed", g.seed, "Split seed (synth: generator seed)");
    app.add_option("--out", g.out_dir, "Output directory (overrides output_dir)");
    app.add_option("--corpus", g.corpus, "Corpus directory or JSON file (overrides corpus_path)");
    app.add_flag("--quiet", g.quiet, "Only print errors");

    auto* ingest = app.add_subcommand("ingest", "Parse a corpus and report its shape");
    std::string ingest_json;
    ingest->add_option("--json", ingest_json, "Also write the corpus in the JSON fallback format");

    auto* split = app.add_subcommand("split", "Write the train/validation/test split");

    auto* stats = app.add_subcommand("stats", "Label distribution and per-input token statistics");
    bool stats_rag = false;
    stats->add_flag("--rag", stats_rag, "Include retrieved top-k contexts (needs the index)");

    auto* index = app.add_subcommand("index", "Chunk, embed and index every patient");

    auto* screen = app.add_subcommand("screen", "Screen every (patient, criterion) pair of a split");
    std::string screen_split = "test";
    std::string screen_manifest;
    screen->add_option("--split", screen_split, "train, validation, test or all")->capture_default_str();
    screen->add_option("--manifest", screen_manifest, "Manifest path (default <out>/manifest-<strategy>-<split>.jsonl)");

    auto* eval = app.add_subcommand("eval", "Score a complete manifest against the gold labels");
    std::string eval_manifest, eval_baseline;
    eval->add_option("--manifest", eval_manifest, "Manifest to score")->required();
    eval->add_option("--baseline", eval_baseline, "Baseline manifest for the delta column");

    auto* synth = app.add_subcommand("synth", "Generate the planted synthetic corpus");
    std::size_t synth_patients = 20;
    std::string synth_format = "xml";
    synth->add_option("--patients", synth_patients, "Number of patients")->capture_default_str();
    synth->add_option("--format", synth_format, "xml or json")->capture_default_str();

    auto* report = app.add_subcommand("report", "Render saved metrics JSON as markdown, csv or json");
    std::string report_metrics, report_baseline, report_format = "markdown";
    report->add_option("--metrics", report_metrics, "metrics.json written by eval")->required();
    report->add_option("--baseline", report_baseline, "Baseline metrics.json");
    report->add_option("--format", report_format, "markdown, csv or json")->capture_default_str();

    auto* fixtures = app.add_subcommand("fixtures", "Check the identities of the bundled published tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::Validation);
    }

    try {
        auto config = make_config(g);

        if (*ingest) {
            const auto corpus = load_configured_corpus(config);
            std::size_t notes = 0, labeled = 0, train = 0, test = 0;
            for (const auto& r : corpus) {
                notes += r.notes.size();
                labeled += r.labels ? 1 : 0;
                if (r.partition) (*r.partition == Partition::Train ? train : test)++;
            }
            info(g, "patients " + std::to_string(corpus.size()) + ", notes " + std::to_string(notes) + ", labeled " +
                        std::to_string(labeled) + ", train " + std::to_string(train) + ", test " + std::to_string(test));
            if (!ingest_json.empty()) write_file(ingest_json, corpus_to_json(corpus));
        } else if (*split) {
            const auto corpus = load_configured_corpus(config);
            DatasetSplit s;
            if (!config.split_file.empty()) {
                s = split_from_json(read_file(config.split_file));
                check_split(s, corpus);
            } else {
                s = make_split(corpus, config.split_seed);
            }
            const auto path = config.output_dir / "split.json";
            write_file(path, split_to_json(s));
            info(g, "train " + std::to_string(s.train.size()) + ", validation " + std::to_string(s.validation.size()) +
                        ", test " + std::to_string(s.test.size()) + " -> " + path.string());
        } else if (*stats) {
            const auto corpus = load_configured_corpus(config);
            bool labeled = !corpus.empty();
            for (const auto& r : corpus) labeled = labeled && r.labels.has_value();
            if (labeled) {
                const auto csv = label_distribution_csv(label_distribution(corpus));
                write_file(config.output_dir / "label_distribution.csv", csv);
                info(g, csv);
            }
            std::vector<TokenStats> rows;
            rows.push_back(token_stats(InputType::Original, per_patient_tokens(config, corpus, InputType::Original)));
            rows.push_back(token_stats(InputType::NerProblem, per_patient_tokens(config, corpus, InputType::NerProblem)));
            if (stats_rag) {
                rows.push_back(token_stats(InputType::RagTopK, per_patient_tokens(config, corpus, InputType::RagTopK)));
            }
            const auto csv = token_stats_csv(rows);
            write_file(config.output_dir / "token_stats.csv", csv);
            info(g, csv);
        } else if (*index) {
            const auto corpus = load_configured_corpus(config);
            const auto s = cmd_index(config, corpus);
            info(g, std::string(s.cache_hit ? "index up to date" : "index built") + ": " + std::to_string(s.chunks) +
                        " chunks, " + std::to_string(s.dims) + " dims, " + fmt("%.2f s", s.build_seconds) + " -> " +
                        s.path.string());
        } else if (*screen) {
            const auto corpus = load_configured_corpus(config);
            const auto selector = split_selector_from_string(screen_split);
            if (!selector) throw ValidationError("--split must be train, validation, test or all");
            ScreenOptions options;
            options.split = *selector;
            options.manifest_path = screen_manifest;
            const auto s = cmd_screen(config, corpus, options);
            info(g, std::to_string(s.verdicts) + " verdicts (" + std::to_string(s.resumed) + " resumed): met " +
                        std::to_string(s.met) + ", not met " + std::to_string(s.not_met) + ", anomalies " +
                        std::to_string(s.anomalies) + ", backend failures " + std::to_string(s.backend_failures) +
                        ", " + fmt("%.2f s", s.seconds) + " -> " + s.manifest_path.string());
            if (!s.complete) {
                std::cerr << "run incomplete: too many backend failures; rerun screen to resume\n";
                return static_cast<int>(ExitCode::Incomplete);
            }
        } else if (*eval) {
            const auto corpus = load_configured_corpus(config);
            const auto r = cmd_eval(eval_manifest,
                                    corpus, eval_baseline.empty() ? std::nullopt : std::optional<fs::path>(eval_baseline));
            write_file(config.output_dir / "report.md", r.markdown);
            write_file(config.output_dir / "metrics.csv", r.csv);
            write_file(config.output_dir / "metrics.json", r.json);
            info(g, r.markdown);
        } else if (*synth) {
            const auto seed = g.seed.value_or(7);
            const auto s = generate_synthetic_corpus(seed, synth_patients);
            if (synth_format == "json") {
                write_file(config.output_dir / "corpus.json", corpus_to_json(s.records));
            } else if (synth_format == "xml") {
                write_corpus_xml(s.records, config.output_dir / "corpus");
            } else {
                throw ValidationError("--format must be xml or json");
            }
            write_file(config.output_dir / "planting_manifest.tsv", planting_manifest_tsv(s.manifest));
            info(g, std::to_string(s.records.size()) + " patients, " + std::to_string(s.manifest.size()) +
                        " planted sentences -> " + config.output_dir.string());
        } else if (*report) {
            const auto format = report_format_from_string(report_format);
            if (!format) throw ValidationError("--format must be markdown, csv or json");
            const auto metrics = report_from_json(read_file(report_metrics));
            std::optional<MetricsReport> baseline;
            if (!report_baseline.empty()) baseline = report_from_json(read_file(report_baseline));
            std::cout << render_report(metrics, *format, baseline ? &*baseline : nullptr);
        } else if (*fixtures) {
            const auto r = verify_fixtures(builtin_fixtures());
            info(g, render_fixture_report(r));
            if (!r.passed()) return static_cast<int>(ExitCode::Validation);
        }
        return static_cast<int>(ExitCode::Ok);
    } catch (const IncompleteRunError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (std::size_t i = 0; i < e.missing().size() && i < 20; ++i) std::cerr << "  missing " << e.missing()[i] << "\n";
        if (e.missing().size() > 20) std::cerr << "  ... " << e.missing().size() - 20 << " more\n";
        return static_cast<int>(ExitCode::Incomplete);
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Backend);
    } catch (const ProtocolError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Backend);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Validation);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Validation);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Internal);
    }
}
