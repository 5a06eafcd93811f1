#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trialscreen/corpus.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

struct ChunkPolicy {
    std::size_t max_chunk_tokens = 300;
    std::size_t overlap_tokens = 50;
    bool sentence_aligned = true;

    /// Throws ValidationError unless 0 <= overlap < max and max > 0.
    void validate() const;
    std::string fingerprint() const;
};

struct Chunk {
    std::string chunk_id;  // "{patient_id}:{note_index}:{ordinal}"
    std::string patient_id;
    std::size_t note_index = 0;
    std::size_t ordinal = 0;
    Span char_span;
    std::string text;
    std::size_t token_count = 0;
};

std::string make_chunk_id(std::string_view patient_id, std::size_t note_index, std::size_t ordinal);

/// Greedy packing of whole sentences up to the token budget; a sentence over
/// budget may be cut at any token. Consecutive chunks share at least
/// `overlap_tokens` of trailing context whenever sentence granularity allows
/// it (always, in token-aligned mode).
std::vector<Chunk> chunk_note(std::string_view patient_id, const NoteDocument& note, const ChunkPolicy& policy);

std::vector<Chunk> chunk_record(const PatientRecord& record, const ChunkPolicy& policy);

/// All chunks of a corpus with lookup by chunk id.
class ChunkStore {
public:
    ChunkStore() = default;
    ChunkStore(const Corpus& corpus, const ChunkPolicy& policy);

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const Chunk* find(std::string_view chunk_id) const;
    std::size_t size() const noexcept { return chunks_.size(); }

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace trialscreen
