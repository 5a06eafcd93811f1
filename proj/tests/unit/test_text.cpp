#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "trialscreen/text.hpp"

using namespace trialscreen;

namespace {

std::vector<std::string> token_strings(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& s : tokenize(text)) out.emplace_back(text.substr(s.begin, s.size()));
    return out;
}

std::vector<std::string> sentence_strings(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& s : split_sentences(text)) out.emplace_back(s.text);
    return out;
}

}  // namespace

TEST(Tokenize, PeelsLeadingAndTrailingPunctuation) {
    EXPECT_EQ(token_strings("Hello, world."), (std::vector<std::string>{"Hello", ",", "world", "."}));
    EXPECT_EQ(token_strings("(BP 120/80)"), (std::vector<std::string>{"(", "BP", "120/80", ")"}));
    EXPECT_EQ(token_strings("  \"e.g.\"  "), (std::vector<std::string>{"\"", "e.g", ".", "\""}));
    EXPECT_EQ(token_strings("..."), (std::vector<std::string>{".", ".", "."}));
    EXPECT_TRUE(token_strings(" \n\t ").empty());
}

TEST(Tokenize, CountMatchesIndependentOracle) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto text = tstest::random_text(rng, 200);
        ASSERT_EQ(count_tokens(text), tstest::oracle_token_count(text)) << "text: [" << text << "]";
        ASSERT_EQ(tokenize(text).size(), count_tokens(text));
    }
}

TEST(Tokenize, SpansAreOrderedAndNonBlank) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 500; ++i) {
        const auto text = tstest::random_text(rng, 200);
        std::size_t prev_end = 0;
        for (const auto& s : tokenize(text)) {
            ASSERT_GE(s.begin, prev_end);
            ASSERT_LT(s.begin, s.end);
            for (auto k = s.begin; k < s.end; ++k) ASSERT_FALSE(std::isspace(static_cast<unsigned char>(text[k])));
            prev_end = s.end;
        }
    }
}

TEST(SplitSentences, BasicBoundaries) {
    EXPECT_EQ(sentence_strings("One two. Three four! Five?"),
              (std::vector<std::string>{"One two. ", "Three four! ", "Five?"}));
}

TEST(SplitSentences, AbbreviationsAndDecimalsDoNotSplit) {
    EXPECT_EQ(sentence_strings("Seen by Dr. Smith today. Took 1.5 mg. daily."),
              (std::vector<std::string>{"Seen by Dr. Smith today. ", "Took 1.5 mg. daily."}));
    EXPECT_EQ(sentence_strings("Use e.g. rest. Done."), (std::vector<std::string>{"Use e.g. rest. ", "Done."}));
}

TEST(SplitSentences, NewlinesAreBoundaries) {
    EXPECT_EQ(sentence_strings("Header line\n\nBody text here"),
              (std::vector<std::string>{"Header line\n\n", "Body text here"}));
}

TEST(SplitSentences, ClosersStayWithTheSentence) {
    EXPECT_EQ(sentence_strings("He said \"stop.\" Then left."),
              (std::vector<std::string>{"He said \"stop.\" ", "Then left."}));
}

TEST(SplitSentences, SpansTileTheInput) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 2000; ++i) {
        const auto text = tstest::random_text(rng, 300);
        std::string joined;
        std::size_t expected_begin = 0;
        for (const auto& s : split_sentences(text)) {
            ASSERT_EQ(s.span.begin, expected_begin);
            joined += s.text;
            expected_begin = s.span.end;
        }
        ASSERT_EQ(joined, text);
    }
}

TEST(Trim, StripsAsciiWhitespace) {
    EXPECT_EQ(trim("  a b \n"), "a b");
    EXPECT_EQ(trim(" \t\n"), "");
    EXPECT_EQ(trim(""), "");
}

TEST(DropLeadingTokens, RemovesExactlyNTokens) {
    EXPECT_EQ(drop_leading_tokens("one, two three", 2), "two three");
    EXPECT_EQ(drop_leading_tokens("one two", 5), "");
    EXPECT_EQ(drop_leading_tokens("one two", 0), "one two");
    std::mt19937_64 rng(14);
    for (int i = 0; i < 1000; ++i) {
        const auto text = tstest::random_text(rng, 200);
        const auto total = count_tokens(text);
        const std::size_t n = rng() % (total + 3);
        ASSERT_EQ(count_tokens(drop_leading_tokens(text, n)), n >= total ? 0 : total - n) << text;
    }
}
