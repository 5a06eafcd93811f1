#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trialscreen/chunker.hpp"
#include "trialscreen/embed.hpp"

namespace trialscreen {

struct IndexMetadata {
    std::string embedder_fingerprint;
    std::string chunk_policy_fingerprint;
    std::string build_timestamp;
    /// Hash over chunk ids and texts; lets callers detect a changed corpus.
    std::string corpus_fingerprint;

    friend bool operator==(const IndexMetadata&, const IndexMetadata&) = default;
};

struct RetrievalHit {
    std::string chunk_id;
    std::string patient_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

struct RetrievalResult {
    std::vector<RetrievalHit> hits;
    bool unknown_patient = false;
};

/// Exact flat index. Entries are stored grouped by patient so a query scans
/// only the requesting patient's slice. Immutable once built.
class VectorIndex {
public:
    struct Entry {
        std::string chunk_id;
        std::string patient_id;
        friend bool operator==(const Entry&, const Entry&) = default;
    };
    struct Range {
        std::size_t begin = 0;
        std::size_t end = 0;
        friend bool operator==(const Range&, const Range&) = default;
    };

    /// Throws ValidationError on duplicate chunk ids, mismatched dims or
    /// empty fingerprints; std::invalid_argument if sizes differ.
    static VectorIndex build(std::span<const Chunk> chunks, std::span<const EmbeddingVector> vectors,
                             std::size_t dims, IndexMetadata metadata);

    /// Top-k by (score desc, chunk_id asc) among the patient's entries.
    RetrievalResult retrieve(const EmbeddingVector& query, std::string_view patient_id, std::size_t k) const;

    std::size_t dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::span<const float> vector(std::size_t i) const noexcept {
        return {values_.data() + i * dims_, dims_};
    }
    const std::map<std::string, Range, std::less<>>& patient_offsets() const noexcept { return offsets_; }
    const IndexMetadata& metadata() const noexcept { return metadata_; }

    friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

private:
    friend VectorIndex read_index(std::string_view bytes);
    std::size_t dims_ = 0;
    std::vector<Entry> entries_;
    std::vector<float> values_;
    std::map<std::string, Range, std::less<>> offsets_;
    IndexMetadata metadata_;
};

/// Binary layout: "TSIX1", u32 dims, u64 entry count, u32 metadata length,
/// metadata JSON, then per entry u32-prefixed chunk_id, u32-prefixed
/// patient_id and dims little-endian f32; closed by a u64 FNV-1a checksum of
/// everything before it. All integers little-endian.
std::string write_index(const VectorIndex& index);
VectorIndex read_index(std::string_view bytes);

void save_index(const VectorIndex& index, const std::filesystem::path& path);

struct IndexExpectation {
    std::string embedder_fingerprint;
    std::string chunk_policy_fingerprint;
};

/// Throws FormatError on truncation or corruption and StaleIndexError when
/// the stored fingerprints differ from `expected` (unless allow_stale).
VectorIndex load_index(const std::filesystem::path& path,
                       const std::optional<IndexExpectation>& expected = std::nullopt,
                       bool allow_stale = false);

}  // namespace trialscreen
