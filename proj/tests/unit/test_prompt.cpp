#include <gtest/gtest.h>

#include "test_support.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/prompt.hpp"

using namespace trialscreen;

namespace {

PatientRecord record_of(std::vector<std::string> notes, std::string id = "p") {
    PatientRecord r;
    r.patient_id = std::move(id);
    for (std::size_t i = 0; i < notes.size(); ++i) r.notes.push_back({i, std::nullopt, notes[i]});
    return r;
}

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += stem + std::to_string(i) + " ";
    return out;
}

struct RagSetup {
    Corpus corpus;
    ChunkStore store;
    HashedNGramEmbedder embedder{64};
    VectorIndex index;

    explicit RagSetup(Corpus c, ChunkPolicy policy = {300, 50, true}) : corpus(std::move(c)), store(corpus, policy) {
        std::vector<std::string> texts;
        for (const auto& ch : store.chunks()) texts.push_back(ch.text);
        index = VectorIndex::build(store.chunks(), embedder.embed(texts), 64,
                                   {embedder.fingerprint(), policy.fingerprint(), "t", "c"});
    }
    ContextDeps deps() const { return {&embedder, &index, &store, nullptr, nullptr}; }
};

}  // namespace

TEST(Prompt, ExactTemplate) {
    EXPECT_EQ(render_prompt("CTX", CriterionId::English),
              "Context:\n\nCTX\n\nQuestion:\n\nBased on the patient's medical records provided, assess if the patient "
              "meets the criteria for ENGLISH: Patient must speak English\n\nOnly respond with 'met' if the criteria "
              "are met or 'not met' if they are not.");
}

TEST(Prompt, EvidenceHeader) { EXPECT_EQ(evidence_header(2, 5, 0.81234), "[note 2 | chunk 5 | score 0.8123]"); }

TEST(ParseVerdict, Examples) {
    EXPECT_EQ(parse_verdict("Met"), EligibilityLabel::Met);
    EXPECT_EQ(parse_verdict("  NOT MET.\n"), EligibilityLabel::NotMet);
    EXPECT_EQ(parse_verdict("The criteria are met, not met otherwise"), EligibilityLabel::NotMet);
    EXPECT_EQ(parse_verdict("unclear"), std::nullopt);
    EXPECT_EQ(parse_verdict(""), std::nullopt);
}

TEST(ParseVerdict, Property) {
    std::mt19937_64 rng(71);
    for (int i = 0; i < 2000; ++i) {
        auto text = tstest::random_text(rng, 40);
        const auto r = rng() % 4;
        if (r == 0) text.insert(rng() % (text.size() + 1), "NoT mEt");
        if (r == 1) text.insert(rng() % (text.size() + 1), "mEt");
        std::string lower = text;
        for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const auto got = parse_verdict(text);
        if (lower.find("not met") != std::string::npos) {
            ASSERT_EQ(got, EligibilityLabel::NotMet);
        } else if (lower.find("met") != std::string::npos) {
            ASSERT_EQ(got, EligibilityLabel::Met);
        } else {
            ASSERT_EQ(got, std::nullopt);
        }
    }
}

TEST(StrategyConfig, StrictLimits) {
    EXPECT_NO_THROW(StrategyConfig::defaults(Strategy::Ori).validate());
    EXPECT_NO_THROW(StrategyConfig::defaults(Strategy::Ner).validate());
    EXPECT_NO_THROW(StrategyConfig::defaults(Strategy::Rag).validate());
    EXPECT_THROW((StrategyConfig{Strategy::Ori, 4096, 10}.validate()), ValidationError);
    EXPECT_THROW((StrategyConfig{Strategy::Ner, 1000, 10}.validate()), ValidationError);
    EXPECT_NO_THROW((StrategyConfig{Strategy::Ner, 512, 10}.validate()));
    EXPECT_THROW((StrategyConfig{Strategy::Rag, 2048, 0}.validate()), ValidationError);
    EXPECT_THROW((StrategyConfig{Strategy::Rag, 8192, 10}.validate()), ValidationError);
    EXPECT_EQ(strategy_from_string(to_string(Strategy::Ner)), Strategy::Ner);
    EXPECT_FALSE(strategy_from_string("NER").has_value());
}

TEST(BuildContext, OriKeepsTheTail) {
    const auto r = record_of({words(5000, "a"), words(5000, "b")});
    const auto b = build_context(r, CriterionId::Hba1c, StrategyConfig::defaults(Strategy::Ori), {});
    EXPECT_EQ(b.pre_limit_tokens, 10000u);
    EXPECT_EQ(b.token_count, 8192u);
    EXPECT_TRUE(b.truncated);
    EXPECT_EQ(b.context_text.substr(b.context_text.size() - 6), " b4999");

    const auto small = build_context(record_of({"one", "two"}), CriterionId::Hba1c,
                                     StrategyConfig::defaults(Strategy::Ori), {});
    EXPECT_EQ(small.context_text, "one\n\ntwo");
    EXPECT_FALSE(small.truncated);
}

TEST(BuildContext, NerUsesCondenser) {
    const auto ner = LexiconNer::from_tsv("angina\tproblem\n");
    ContextDeps deps;
    deps.ner = &ner;
    const auto b = build_context(record_of({"Fine. Has angina. Fine again."}), CriterionId::AdvancedCad,
                                 {Strategy::Ner, 512, 10}, deps);
    EXPECT_EQ(b.context_text, "Has angina.");
    EXPECT_EQ(b.token_limit, 512u);
    EXPECT_THROW(build_context(record_of({"x"}), CriterionId::AdvancedCad, {Strategy::Ner, 512, 10}, {}),
                 std::invalid_argument);
}

TEST(BuildContext, RagRetrievesOwnPatientWithHeaders) {
    RagSetup s({record_of({"Patient speaks English fluently. Unrelated filler about gardening."}, "a"),
                record_of({"Patient speaks English too."}, "b")});
    const auto b = build_context(s.corpus[0], CriterionId::English, StrategyConfig::defaults(Strategy::Rag), s.deps());
    ASSERT_EQ(b.evidence.size(), 1u);
    EXPECT_EQ(b.evidence[0].chunk_id, "a:0:0");
    EXPECT_EQ(b.context_text.rfind("[note 0 | chunk 0 | score ", 0), 0u);
    EXPECT_NE(b.context_text.find("speaks English fluently"), std::string::npos);
    EXPECT_FALSE(b.unknown_patient);

    const auto unknown = build_context(record_of({"x"}, "zzz"), CriterionId::English,
                                       StrategyConfig::defaults(Strategy::Rag), s.deps());
    EXPECT_TRUE(unknown.unknown_patient);
    EXPECT_TRUE(unknown.context_text.empty());
}

TEST(BuildContext, RagDropsLowestSnippetsToFitBudget) {
    std::vector<std::string> notes;
    for (int i = 0; i < 12; ++i) notes.push_back(words(290, "n" + std::to_string(i) + "x"));
    RagSetup s({record_of(notes, "a")});
    const auto b = build_context(s.corpus[0], CriterionId::English, {Strategy::Rag, 2048, 10}, s.deps());
    EXPECT_TRUE(b.truncated);
    EXPECT_LE(b.token_count, 2048u);
    EXPECT_GT(b.pre_limit_tokens, 2048u);
    EXPECT_EQ(b.evidence.size(), 6u);  // 6 snippets of ~300 tokens fit, 7 do not
    for (std::size_t i = 1; i < b.evidence.size(); ++i) EXPECT_GE(b.evidence[i - 1].score, b.evidence[i].score);
}

TEST(BuildContext, RagPrecomputedQueriesMatchEmbedder) {
    RagSetup s({record_of({"Dietary supplement taken daily. Abdominal surgery history."}, "a")});
    std::vector<EmbeddingVector> queries;
    for (auto id : kAllCriteria) queries.push_back(s.embedder.embed_one(criterion(id).description));
    auto deps = s.deps();
    deps.criterion_queries = &queries;
    for (auto id : kAllCriteria) {
        const auto with = build_context(s.corpus[0], id, StrategyConfig::defaults(Strategy::Rag), deps);
        const auto without = build_context(s.corpus[0], id, StrategyConfig::defaults(Strategy::Rag), s.deps());
        EXPECT_EQ(with.context_text, without.context_text);
    }
}
