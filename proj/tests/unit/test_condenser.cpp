#include <gtest/gtest.h>

#include "test_support.hpp"
#include "trialscreen/condenser.hpp"
#include "trialscreen/errors.hpp"

using namespace trialscreen;

namespace {

std::vector<std::string> surfaces(const EntityList& list) {
    std::vector<std::string> out;
    for (const auto& e : list.spans) out.push_back(e.surface);
    return out;
}

const char* kLexicon =
    "# test lexicon\n"
    "heart attack\tproblem\n"
    "heart\tproblem\n"
    "attack\tproblem\n"
    "aspirin\ttreatment\n"
    "hba1c\ttest\n"
    "chest pain\tproblem\n";

PatientRecord record_of(std::vector<std::string> notes) {
    PatientRecord r;
    r.patient_id = "p";
    for (std::size_t i = 0; i < notes.size(); ++i) r.notes.push_back({i, std::nullopt, notes[i]});
    return r;
}

}  // namespace

TEST(LexiconNer, LongestWholeWordCaseInsensitive) {
    const auto ner = LexiconNer::from_tsv(kLexicon);
    EXPECT_EQ(ner.term_count(), 6u);
    const std::string text = "Had a HEART  ATTACK; took aspirin. Heartburn, hba1c ok, attacked.";
    const auto list = ner.extract(text);
    EXPECT_EQ(surfaces(list), (std::vector<std::string>{"HEART  ATTACK", "aspirin", "hba1c"}));
    EXPECT_EQ(list.spans[0].label, EntityLabel::Problem);
    EXPECT_EQ(list.spans[1].label, EntityLabel::Treatment);
    EXPECT_EQ(list.spans[2].label, EntityLabel::Test);
    for (const auto& e : list.spans) EXPECT_EQ(text.substr(e.span.begin, e.span.size()), e.surface);
}

TEST(LexiconNer, ParseErrorsAndFingerprint) {
    EXPECT_THROW(LexiconNer::from_tsv("term without tab\n"), SchemaError);
    EXPECT_THROW(LexiconNer::from_tsv("term\tdisease\n"), SchemaError);
    EXPECT_NE(LexiconNer::from_tsv(kLexicon).fingerprint(), LexiconNer::from_tsv("heart\tproblem\n").fingerprint());
    EXPECT_EQ(LexiconNer::from_tsv(kLexicon).fingerprint().rfind("lexicon:", 0), 0u);
    EXPECT_GT(LexiconNer::builtin().term_count(), 50u);
}

TEST(ResolveOverlaps, LongestWinsTiesGoEarlier) {
    std::vector<EntitySpan> c{{{0, 5}, EntityLabel::Problem, "a"},
                              {{2, 12}, EntityLabel::Problem, "b"},
                              {{10, 14}, EntityLabel::Test, "c"},
                              {{14, 18}, EntityLabel::Test, "d"},
                              {{16, 20}, EntityLabel::Test, "e"}};
    const auto r = resolve_overlaps(c);
    std::vector<std::string> names;
    for (const auto& e : r.spans) names.push_back(e.surface);
    EXPECT_EQ(names, (std::vector<std::string>{"b", "d"}));
    EXPECT_EQ(r.overlaps_dropped, 3u);
}

TEST(ResolveOverlaps, OutputIsSortedAndDisjointProperty) {
    std::mt19937_64 rng(61);
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<EntitySpan> c;
        const auto n = rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t b = rng() % 100;
            c.push_back({{b, b + 1 + rng() % 15}, EntityLabel::Problem, std::to_string(i)});
        }
        const auto r = resolve_overlaps(c);
        ASSERT_EQ(r.spans.size() + r.overlaps_dropped, c.size());
        for (std::size_t i = 1; i < r.spans.size(); ++i) {
            ASSERT_LE(r.spans[i - 1].span.end, r.spans[i].span.begin);
        }
        // Every dropped candidate overlaps a kept span at least as long.
        for (const auto& cand : c) {
            bool covered = false;
            for (const auto& k : r.spans) {
                if (k.span == cand.span || (k.span.overlaps(cand.span) && k.span.size() >= cand.span.size())) covered = true;
            }
            ASSERT_TRUE(covered);
        }
    }
}

TEST(Condense, KeepsProblemSentencesAcrossNotes) {
    const auto ner = LexiconNer::from_tsv(kLexicon);
    const auto r = record_of({"Routine visit. Reports chest pain on exertion.  Took aspirin.",
                              "Nothing notable.", "Prior heart attack.\nStable."});
    const auto c = condense(r, ner, 8192);
    EXPECT_EQ(c.text, "Reports chest pain on exertion.\n\nPrior heart attack.");
    EXPECT_EQ(c.kept_sentences, 2u);
    EXPECT_EQ(c.dropped_tokens, 0u);
    EXPECT_EQ(c.token_count, count_tokens(c.text));
    EXPECT_FALSE(c.empty_summary);
}

TEST(Condense, TruncatesFromTheFront) {
    const auto ner = LexiconNer::from_tsv(kLexicon);
    const auto r = record_of({"First chest pain episode. Second chest pain episode."});
    const auto c = condense(r, ner, 5);
    EXPECT_EQ(c.token_count, 5u);
    EXPECT_EQ(c.dropped_tokens, 5u);
    EXPECT_EQ(c.pre_truncation_tokens(), 10u);
    EXPECT_EQ(c.text, "Second chest pain episode.");
}

TEST(Condense, EmptySummaryWhenNoProblems) {
    const auto c = condense(record_of({"Took aspirin daily."}), LexiconNer::from_tsv(kLexicon), 512);
    EXPECT_TRUE(c.empty_summary);
    EXPECT_EQ(c.text, "");
}

TEST(NerConfig, TokenLimitValues) {
    NerConfig c;
    for (std::size_t ok : {512u, 2048u, 8192u}) {
        c.token_limit = ok;
        EXPECT_NO_THROW(c.validate());
    }
    c.token_limit = 1000;
    EXPECT_THROW(c.validate(), ValidationError);
    c.token_limit = 512;
    c.backend = NerBackendKind::Remote;
    EXPECT_THROW(c.validate(), ValidationError);
    EXPECT_EQ(make_ner_backend(NerConfig{})->fingerprint(), LexiconNer::builtin().fingerprint());
}
