#pragma once

#include <cstddef>
#include <filesystem>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trialscreen/corpus.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

enum class EntityLabel { Problem, Treatment, Test };

std::string_view to_string(EntityLabel label) noexcept;
std::optional<EntityLabel> entity_label_from_string(std::string_view text) noexcept;

struct EntitySpan {
    Span span;
    EntityLabel label = EntityLabel::Problem;
    std::string surface;
};

struct EntityList {
    std::vector<EntitySpan> spans;  // sorted by start, non-overlapping
    std::size_t overlaps_dropped = 0;
};

/// Keeps the longest of any overlapping spans (ties: earlier start), then sorts by start.
EntityList resolve_overlaps(std::vector<EntitySpan> candidates);

class NerBackend {
public:
    virtual ~NerBackend() = default;
    virtual EntityList extract(std::string_view text) const = 0;
    virtual std::string fingerprint() const = 0;
};

/// Case-insensitive whole-word dictionary matcher. Whitespace inside a
/// multi-word term matches any whitespace run in the text.
class LexiconNer final : public NerBackend {
public:
    /// Parses "term<TAB>label" lines; '#' starts a comment line.
    static LexiconNer from_tsv(std::string_view tsv);
    static LexiconNer from_file(const std::filesystem::path& path);
    /// The lexicon compiled into the library.
    static const LexiconNer& builtin();

    EntityList extract(std::string_view text) const override;
    std::string fingerprint() const override;
    std::size_t term_count() const noexcept { return term_count_; }

private:
    struct Node {
        std::vector<std::pair<unsigned char, std::size_t>> next;
        int label = -1;  // EntityLabel when a term ends here
    };
    std::size_t child(std::size_t node, unsigned char c) const;
    void insert(std::string_view term, EntityLabel label);

    std::vector<Node> nodes_{Node{}};
    std::size_t term_count_ = 0;
    std::uint64_t content_hash_ = 0;
};

/// POST {url}/ner {"text"} -> {"entities":[{"start","end","label"}]}.
class RemoteNer final : public NerBackend {
public:
    RemoteNer(std::string endpoint_url, int timeout_ms = 30000, int max_retries = 3, int initial_backoff_ms = 200);
    EntityList extract(std::string_view text) const override;
    std::string fingerprint() const override;

private:
    std::string endpoint_url_;
    int timeout_ms_;
    int max_retries_;
    int initial_backoff_ms_;
};

enum class NerBackendKind { Remote, Lexicon };

struct NerConfig {
    NerBackendKind backend = NerBackendKind::Lexicon;
    std::string endpoint_url;
    std::filesystem::path lexicon_path;  // empty: built-in lexicon
    std::size_t token_limit = 8192;
    int timeout_ms = 30000;
    int max_retries = 3;

    /// token_limit must be one of 512, 2048, 8192.
    void validate() const;
};

std::shared_ptr<const NerBackend> make_ner_backend(const NerConfig& config);

EntityList extract_entities(const NerBackend& backend, std::string_view note_text);

struct CondensedText {
    std::string text;
    std::size_t token_count = 0;
    std::size_t dropped_tokens = 0;   // removed from the front to meet the limit
    std::size_t kept_sentences = 0;
    bool empty_summary = false;

    std::size_t pre_truncation_tokens() const noexcept { return token_count + dropped_tokens; }
};

/// Keeps each sentence that overlaps a Problem entity, joins kept sentences
/// with one space and notes with a blank line, then drops tokens from the
/// front until the summary fits `token_limit`.
CondensedText condense(const PatientRecord& record, const NerBackend& backend, std::size_t token_limit);

}  // namespace trialscreen
