#include <gtest/gtest.h>

#include "test_support.hpp"
#include "trialscreen/config.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/manifest.hpp"

using namespace trialscreen;
namespace fs = std::filesystem;

TEST(PipelineConfig, ParsesKeysAndResolvesPaths) {
    const auto c = PipelineConfig::parse(
        "# comment\n"
        "corpus_path = data/corpus\n"
        "strategy = ner\n"
        "ner_token_limit = 512\n"
        "max_chunk_tokens = 200\n"
        "overlap_tokens = 20\n"
        "sentence_aligned = false\n"
        "generator_backend = keyword_oracle\n"
        "generator_constant_label = not met\n"
        "output_dir = /abs/out\n"
        "failure_threshold = 0.25\n",
        "/base");
    EXPECT_EQ(c.corpus_path, fs::path("/base/data/corpus"));
    EXPECT_EQ(c.output_dir, fs::path("/abs/out"));
    EXPECT_EQ(c.strategy.strategy, Strategy::Ner);
    EXPECT_EQ(c.strategy.token_limit, 512u);  // follows ner_token_limit
    EXPECT_EQ(c.chunk.max_chunk_tokens, 200u);
    EXPECT_FALSE(c.chunk.sentence_aligned);
    EXPECT_EQ(c.generator.backend, GeneratorBackend::KeywordOracle);
    EXPECT_DOUBLE_EQ(c.failure_threshold, 0.25);
    EXPECT_EQ(c.resolved_index_path(), fs::path("/abs/out/index.tsix"));
}

TEST(PipelineConfig, DefaultsPerStrategy) {
    EXPECT_EQ(PipelineConfig::parse("strategy = rag\n").strategy.token_limit, 2048u);
    EXPECT_EQ(PipelineConfig::parse("strategy = ori\n").strategy.token_limit, 8192u);
    EXPECT_EQ(PipelineConfig::parse("embedder_backend = remote\n").embedder.dims, 0u);
    EXPECT_EQ(PipelineConfig::parse("").embedder.dims, 256u);
}

TEST(PipelineConfig, RejectsBadInput) {
    EXPECT_THROW(PipelineConfig::parse("nonsense_key = 1\n"), ValidationError);
    EXPECT_THROW(PipelineConfig::parse("rag_k = 3\nrag_k = 4\n"), ValidationError);
    EXPECT_THROW(PipelineConfig::parse("rag_k = -3\n"), ValidationError);
    EXPECT_THROW(PipelineConfig::parse("strategy = long\n"), ValidationError);
    EXPECT_THROW(PipelineConfig::parse("sentence_aligned = maybe\n"), ValidationError);
    EXPECT_THROW(PipelineConfig::parse("just a line\n"), ValidationError);
}

TEST(PipelineConfig, ValidateChecksValuesAndFiles) {
    tstest::TempDir dir;
    tstest::write_file(dir / "c.json", "{}");
    auto c = PipelineConfig::parse("corpus_path = c.json\n", dir.path());
    EXPECT_NO_THROW(c.validate());
    c.chunk.overlap_tokens = c.chunk.max_chunk_tokens;
    EXPECT_THROW(c.validate(), ValidationError);

    auto missing = PipelineConfig::parse("corpus_path = nope.json\n", dir.path());
    EXPECT_THROW(missing.validate(), ValidationError);
    auto no_corpus = PipelineConfig::parse("");
    EXPECT_THROW(no_corpus.validate(), ValidationError);
    auto mismatch = PipelineConfig::parse("corpus_path = c.json\nstrategy = ner\nner_token_limit = 512\n"
                                          "strategy_token_limit = 2048\n",
                                          dir.path());
    EXPECT_THROW(mismatch.validate(), ValidationError);
    auto threshold = PipelineConfig::parse("corpus_path = c.json\nfailure_threshold = 1.5\n", dir.path());
    EXPECT_THROW(threshold.validate(), ValidationError);
}

TEST(PipelineConfig, SnapshotRoundTrip) {
    const auto c = PipelineConfig::parse(
        "corpus_path = /x/corpus\nstrategy = ner\nner_token_limit = 2048\nrag_k = 7\n"
        "embedder_backend = remote\nembedder_endpoint_url = http://e\nembedder_model_id = m\n"
        "generator_backend = remote\ngenerator_adapter = chat\ngenerator_model_id = g\n"
        "generator_endpoint_url = http://g\nfailure_threshold = 0.1\nworkers = 3\n");
    const auto back = PipelineConfig::parse(c.to_text());
    EXPECT_EQ(back.snapshot(), c.snapshot());
    EXPECT_EQ(c.snapshot().at("rag_k"), "7");
    EXPECT_EQ(c.snapshot().at("generator_adapter"), "chat");
    tstest::TempDir dir;
    tstest::write_file(dir / "run.conf", c.to_text());
    auto loaded = PipelineConfig::load(dir / "run.conf").snapshot();
    EXPECT_EQ(loaded.at("output_dir"), (dir / "out").generic_string());  // relative to the config file
    loaded["output_dir"] = "out";
    EXPECT_EQ(loaded, c.snapshot());
    EXPECT_THROW(PipelineConfig::load(dir / "missing.conf"), ValidationError);
}

namespace {

ManifestHeader header() {
    ManifestHeader h;
    h.run_id = "abc";
    h.strategy = "rag";
    h.split = "test";
    h.config = {{"rag_k", "10"}};
    h.fingerprints = {{"embedder", "e"}};
    h.patients = {"p1", "p2"};
    return h;
}

VerdictRecord record(const std::string& pid, CriterionId id) {
    VerdictRecord r;
    r.patient_id = pid;
    r.criterion = id;
    r.predicted = EligibilityLabel::Met;
    r.met_score = 0.75;
    r.evidence = {{"p1:0:0", 0.5}};
    r.raw_text_hash = "h";
    r.anomaly = "odd";
    r.context_tokens = 10;
    r.pre_limit_tokens = 12;
    r.token_limit = 2048;
    r.truncated = true;
    return r;
}

}  // namespace

TEST(Manifest, RoundTripAndMissingPairs) {
    std::string text = header_line(header()) + "\n";
    text += record_line(record("p1", CriterionId::English)) + "\n";
    text += record_line(record("p2", CriterionId::Hba1c)) + "\n";
    const auto prefix = text.size();
    text += footer_line({true, 2, 2, ""}) + "\n";
    const auto m = parse_manifest(text);
    EXPECT_EQ(m.header, header());
    ASSERT_EQ(m.records.size(), 2u);
    EXPECT_EQ(m.records[0].evidence, record("p1", CriterionId::English).evidence);
    EXPECT_EQ(m.records[1].anomaly, "odd");
    EXPECT_TRUE(m.records[1].truncated);
    ASSERT_TRUE(m.footer);
    EXPECT_TRUE(m.footer->complete);
    EXPECT_EQ(m.valid_prefix_bytes, prefix);
    EXPECT_EQ(m.missing_pairs().size(), 24u);
    EXPECT_EQ(m.records[0].key(), pair_key("p1", CriterionId::English));
    const auto v = m.records[0].to_verdict();
    EXPECT_EQ(v.met_score, 0.75);
    EXPECT_EQ(v.evidence, (std::vector<std::string>{"p1:0:0"}));
}

TEST(Manifest, PartialTrailingLineIsIgnored) {
    const std::string full = header_line(header()) + "\n" + record_line(record("p1", CriterionId::English)) + "\n";
    const auto line = record_line(record("p2", CriterionId::English));
    for (std::size_t cut = 0; cut < line.size(); cut += 7) {
        const auto m = parse_manifest(full + line.substr(0, cut));
        ASSERT_EQ(m.records.size(), 1u);
        ASSERT_EQ(m.valid_prefix_bytes, full.size());
        ASSERT_FALSE(m.footer);
    }
}

TEST(Manifest, FormatErrors) {
    EXPECT_THROW(parse_manifest(""), FormatError);
    EXPECT_THROW(parse_manifest(record_line(record("p", CriterionId::English)) + "\n"), FormatError);
    EXPECT_THROW(parse_manifest(header_line(header()) + "\n{not json}\n"), FormatError);
    EXPECT_THROW(parse_manifest(header_line(header()) + "\n" + footer_line({true, 0, 0, ""}) + "\n" +
                                record_line(record("p", CriterionId::English)) + "\n"),
                 FormatError);
    EXPECT_THROW(read_manifest("/nonexistent/m.jsonl"), ValidationError);
}
