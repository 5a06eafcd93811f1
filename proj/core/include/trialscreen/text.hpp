#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace trialscreen {

/// Half-open byte range [begin, end) into some owning string.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool overlaps(const Span& other) const noexcept { return begin < other.end && other.begin < end; }
    friend bool operator==(const Span&, const Span&) = default;
};

/// Approximate model tokenization: whitespace split, then every leading and
/// trailing ASCII punctuation character of a piece becomes its own token.
std::vector<Span> tokenize(std::string_view text);

/// Same rule as tokenize() without materializing spans.
std::size_t count_tokens(std::string_view text) noexcept;

struct Sentence {
    Span span;
    std::string_view text;
};

struct SentenceSplitOptions {
    /// Compared case-insensitively against the word before a period.
    std::vector<std::string> abbreviations = {"Dr", "Mr", "Mrs", "vs", "mg", "e.g", "i.e"};
};

/// Splits at '.', '!', '?' (when followed by whitespace or end of text) and at
/// newline runs. Periods after a known abbreviation or inside a decimal number
/// do not split. Whitespace following a boundary belongs to the sentence it
/// ends, so the spans tile the input exactly.
std::vector<Sentence> split_sentences(std::string_view text, const SentenceSplitOptions& options = {});

/// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view text) noexcept;

/// Text with the first `n` tokens removed (starts exactly at token n).
/// Returns an empty view when n >= token count.
std::string_view drop_leading_tokens(std::string_view text, std::size_t n);

}  // namespace trialscreen
