#include "trialscreen/chunker.hpp"

#include <algorithm>

#include "trialscreen/errors.hpp"

namespace trialscreen {

void ChunkPolicy::validate() const {
    if (max_chunk_tokens == 0) throw ValidationError("max_chunk_tokens must be positive");
    if (overlap_tokens >= max_chunk_tokens) throw ValidationError("overlap_tokens must be smaller than max_chunk_tokens");
}

std::string ChunkPolicy::fingerprint() const {
    return "chunk/v1;max=" + std::to_string(max_chunk_tokens) + ";overlap=" + std::to_string(overlap_tokens) +
           ";sentence_aligned=" + (sentence_aligned ? "1" : "0");
}

std::string make_chunk_id(std::string_view patient_id, std::size_t note_index, std::size_t ordinal) {
    return std::string(patient_id) + ":" + std::to_string(note_index) + ":" + std::to_string(ordinal);
}

namespace {

// Token indices where a chunk may begin or end, always including the end.
std::vector<std::size_t> cut_points(std::string_view text, const std::vector<Span>& tokens, const ChunkPolicy& policy) {
    const std::size_t n = tokens.size();
    std::vector<std::size_t> cuts;
    if (!policy.sentence_aligned) {
        cuts.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) cuts[i] = i;
        return cuts;
    }
    std::size_t t = 0;
    for (const auto& sentence : split_sentences(text)) {
        while (t < n && tokens[t].begin < sentence.span.begin) ++t;
        const std::size_t first = t;
        std::size_t last = first;
        while (last < n && tokens[last].begin < sentence.span.end) ++last;
        if (first == last) continue;
        cuts.push_back(first);
        if (last - first > policy.max_chunk_tokens) {
            for (std::size_t i = first + 1; i < last; ++i) cuts.push_back(i);
        }
        t = last;
    }
    cuts.push_back(n);
    return cuts;
}

}  // namespace

std::vector<Chunk> chunk_note(std::string_view patient_id, const NoteDocument& note, const ChunkPolicy& policy) {
    policy.validate();
    const std::string_view text = note.text;
    const auto tokens = tokenize(text);
    const std::size_t n = tokens.size();
    std::vector<Chunk> chunks;
    if (n == 0) return chunks;
    const auto cuts = cut_points(text, tokens, policy);
    const std::size_t max = policy.max_chunk_tokens;

    std::size_t start = 0;
    while (true) {
        // Largest cut within budget. Gaps between cuts never exceed the budget.
        auto it = std::upper_bound(cuts.begin(), cuts.end(), start + max);
        const std::size_t end = *std::prev(it);

        Chunk chunk;
        chunk.patient_id = std::string(patient_id);
        chunk.note_index = note.note_index;
        chunk.ordinal = chunks.size();
        chunk.chunk_id = make_chunk_id(patient_id, note.note_index, chunk.ordinal);
        chunk.char_span = {tokens[start].begin, tokens[end - 1].end};
        chunk.text = std::string(text.substr(chunk.char_span.begin, chunk.char_span.size()));
        chunk.token_count = end - start;
        chunks.push_back(std::move(chunk));
        if (end == n) break;

        // The next chunk must start after `start`, no later than `end`, and
        // close enough to reach the first cut past `end`.
        const std::size_t following = *std::upper_bound(cuts.begin(), cuts.end(), end);
        const std::size_t lowest = std::max(start + 1, following > max ? following - max : 0);
        const auto lo = std::lower_bound(cuts.begin(), cuts.end(), lowest);
        const auto hi = std::upper_bound(cuts.begin(), cuts.end(), end);
        std::size_t next = *lo;
        if (end >= policy.overlap_tokens) {
            const auto preferred = std::upper_bound(lo, hi, end - policy.overlap_tokens);
            if (preferred != lo) next = *std::prev(preferred);
        }
        start = next;
    }
    return chunks;
}

std::vector<Chunk> chunk_record(const PatientRecord& record, const ChunkPolicy& policy) {
    std::vector<Chunk> out;
    for (const auto& note : record.notes) {
        auto chunks = chunk_note(record.patient_id, note, policy);
        std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
    }
    return out;
}

ChunkStore::ChunkStore(const Corpus& corpus, const ChunkPolicy& policy) {
    for (const auto& record : corpus) {
        auto chunks = chunk_record(record, policy);
        std::move(chunks.begin(), chunks.end(), std::back_inserter(chunks_));
    }
    by_id_.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) by_id_.emplace(chunks_[i].chunk_id, i);
}

const Chunk* ChunkStore::find(std::string_view chunk_id) const {
    const auto it = by_id_.find(std::string(chunk_id));
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

}  // namespace trialscreen
