#include "trialscreen/text.hpp"

#include <algorithm>
#include <cctype>

namespace trialscreen {

namespace {

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_punct(char c) noexcept {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

bool is_terminator(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char c) noexcept { return c == ')' || c == ']' || c == '"' || c == '\''; }

bool iequals(std::string_view a, std::string_view b) noexcept {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

// Calls emit(begin, end) for every token of text, in order.
template <typename Emit>
void for_each_token(std::string_view text, Emit&& emit) {
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        if (i == n) break;
        std::size_t a = i;
        while (i < n && !is_space(text[i])) ++i;
        const std::size_t b = i;

        while (a < b && is_punct(text[a])) {
            emit(a, a + 1);
            ++a;
        }
        std::size_t t = b;
        while (t > a && is_punct(text[t - 1])) --t;
        if (a < t) emit(a, t);
        for (std::size_t j = t; j < b; ++j) emit(j, j + 1);
    }
}

}  // namespace

std::vector<Span> tokenize(std::string_view text) {
    std::vector<Span> out;
    for_each_token(text, [&](std::size_t b, std::size_t e) { out.push_back({b, e}); });
    return out;
}

std::size_t count_tokens(std::string_view text) noexcept {
    std::size_t n = 0;
    for_each_token(text, [&](std::size_t, std::size_t) { ++n; });
    return n;
}

std::string_view trim(std::string_view text) noexcept {
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string_view drop_leading_tokens(std::string_view text, std::size_t n) {
    if (n == 0) return text;
    std::size_t seen = 0;
    std::size_t cut = text.size();
    for_each_token(text, [&](std::size_t b, std::size_t) {
        if (seen == n && cut == text.size()) cut = b;
        ++seen;
    });
    return text.substr(cut);
}

std::vector<Sentence> split_sentences(std::string_view text, const SentenceSplitOptions& options) {
    std::vector<Sentence> out;
    const std::size_t n = text.size();
    if (n == 0) return out;

    auto emit = [&](std::size_t b, std::size_t e) { out.push_back({{b, e}, text.substr(b, e - b)}); };

    // A single period ending a known abbreviation or sitting between digits is not a boundary.
    auto suppressed = [&](std::size_t dot) {
        if (dot > 0 && dot + 1 < n && std::isdigit(static_cast<unsigned char>(text[dot - 1])) &&
            std::isdigit(static_cast<unsigned char>(text[dot + 1]))) {
            return true;
        }
        std::size_t w = dot;
        while (w > 0 && !is_space(text[w - 1])) --w;
        std::string_view word = text.substr(w, dot - w);
        while (!word.empty() && (word.front() == '(' || word.front() == '[' || word.front() == '"')) {
            word.remove_prefix(1);
        }
        return std::any_of(options.abbreviations.begin(), options.abbreviations.end(),
                           [&](const std::string& abbr) { return iequals(word, abbr); });
    };

    std::size_t start = 0;
    bool has_content = false;
    std::size_t i = 0;
    while (i < n) {
        const char c = text[i];
        if (c == '\n') {
            if (has_content) {
                std::size_t j = i;
                while (j < n && is_space(text[j])) ++j;
                emit(start, j);
                start = j;
                has_content = false;
                i = j;
                continue;
            }
            ++i;
            continue;
        }
        if (is_terminator(c)) {
            std::size_t j = i;
            while (j < n && is_terminator(text[j])) ++j;
            std::size_t k = j;
            while (k < n && is_closer(text[k])) ++k;
            const bool at_break = k == n || is_space(text[k]);
            const bool single_period = c == '.' && j == i + 1;
            if (at_break && !(single_period && suppressed(i))) {
                while (k < n && is_space(text[k])) ++k;
                emit(start, k);
                start = k;
                has_content = false;
                i = k;
                continue;
            }
            has_content = true;
            i = j;
            continue;
        }
        if (!is_space(c)) has_content = true;
        ++i;
    }
    if (start < n) {
        if (has_content || out.empty()) {
            emit(start, n);
        } else {
            auto& last = out.back();
            last.span.end = n;
            last.text = text.substr(last.span.begin, n - last.span.begin);
        }
    }
    return out;
}

}  // namespace trialscreen
