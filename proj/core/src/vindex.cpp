#include "trialscreen/vindex.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"

namespace trialscreen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "TSIX1";

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_string(std::string& out, std::string_view s) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw FormatError("index file is truncated");
        const auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    template <typename T>
    T get_le() {
        const auto raw = take(sizeof(T));
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<unsigned char>(raw[i])) << (8 * i);
        return value;
    }
    std::string get_string() { return std::string(take(get_le<std::uint32_t>())); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string metadata_json(const IndexMetadata& m) {
    return json{{"embedder", m.embedder_fingerprint},
                {"chunk_policy", m.chunk_policy_fingerprint},
                {"build_timestamp", m.build_timestamp},
                {"corpus", m.corpus_fingerprint}}
        .dump();
}

std::map<std::string, VectorIndex::Range, std::less<>> group_offsets(const std::vector<VectorIndex::Entry>& entries) {
    std::map<std::string, VectorIndex::Range, std::less<>> offsets;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        while (j < entries.size() && entries[j].patient_id == entries[i].patient_id) ++j;
        if (!offsets.emplace(entries[i].patient_id, VectorIndex::Range{i, j}).second) {
            throw FormatError("index entries for patient " + entries[i].patient_id + " are not contiguous");
        }
        i = j;
    }
    return offsets;
}

}  // namespace

VectorIndex VectorIndex::build(std::span<const Chunk> chunks, std::span<const EmbeddingVector> vectors, std::size_t dims,
                               IndexMetadata metadata) {
    if (chunks.size() != vectors.size()) throw std::invalid_argument("chunks and vectors differ in length");
    if (dims == 0) throw ValidationError("index dims must be positive");
    if (metadata.embedder_fingerprint.empty() || metadata.chunk_policy_fingerprint.empty()) {
        throw ValidationError("index metadata needs embedder and chunk policy fingerprints");
    }
    std::set<std::string_view> ids;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!ids.insert(chunks[i].chunk_id).second) throw ValidationError("duplicate chunk id " + chunks[i].chunk_id);
        if (vectors[i].dims() != dims) {
            throw ValidationError("chunk " + chunks[i].chunk_id + " has " + std::to_string(vectors[i].dims()) +
                                  " dims, index expects " + std::to_string(dims));
        }
    }

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return chunks[a].patient_id < chunks[b].patient_id; });

    VectorIndex index;
    index.dims_ = dims;
    index.metadata_ = std::move(metadata);
    index.entries_.reserve(chunks.size());
    index.values_.reserve(chunks.size() * dims);
    for (auto i : order) {
        index.entries_.push_back({chunks[i].chunk_id, chunks[i].patient_id});
        const auto v = vectors[i].values();
        index.values_.insert(index.values_.end(), v.begin(), v.end());
    }
    index.offsets_ = group_offsets(index.entries_);
    return index;
}

RetrievalResult VectorIndex::retrieve(const EmbeddingVector& query, std::string_view patient_id, std::size_t k) const {
    if (query.dims() != dims_) throw std::invalid_argument("query dims differ from index dims");
    RetrievalResult result;
    const auto it = offsets_.find(patient_id);
    if (it == offsets_.end()) {
        result.unknown_patient = true;
        return result;
    }
    const auto [begin, end] = it->second;
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        scored.emplace_back(std::clamp(dot(query.values(), vector(i)), -1.0, 1.0), i);
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [&](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return entries_[a.second].chunk_id < entries_[b.second].chunk_id;
                      });
    for (std::size_t r = 0; r < take; ++r) {
        const auto& e = entries_[scored[r].second];
        result.hits.push_back({e.chunk_id, e.patient_id, scored[r].first, r + 1});
    }
    return result;
}

std::string write_index(const VectorIndex& index) {
    std::string out(kMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dims()));
    put_le<std::uint64_t>(out, index.size());
    put_string(out, metadata_json(index.metadata()));
    for (std::size_t i = 0; i < index.size(); ++i) {
        put_string(out, index.entries()[i].chunk_id);
        put_string(out, index.entries()[i].patient_id);
        for (float f : index.vector(i)) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    put_le<std::uint64_t>(out, fnv1a64(out));
    return out;
}

VectorIndex read_index(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw FormatError("not a trialscreen index file");
    }
    Reader trailer(bytes.substr(bytes.size() - 8));
    if (trailer.get_le<std::uint64_t>() != fnv1a64(bytes.substr(0, bytes.size() - 8))) {
        throw FormatError("index file checksum mismatch (truncated or corrupted)");
    }

    Reader in(bytes.substr(0, bytes.size() - 8));
    in.take(kMagic.size());
    VectorIndex index;
    index.dims_ = in.get_le<std::uint32_t>();
    const auto count = in.get_le<std::uint64_t>();
    if (index.dims_ == 0) throw FormatError("index file declares zero dims");
    try {
        const auto meta = json::parse(in.get_string());
        index.metadata_ = {meta.at("embedder").get<std::string>(), meta.at("chunk_policy").get<std::string>(),
                           meta.at("build_timestamp").get<std::string>(), meta.at("corpus").get<std::string>()};
    } catch (const json::exception& e) {
        throw FormatError(std::string("index metadata is malformed: ") + e.what());
    }
    // Each entry needs at least its two length prefixes and the vector.
    if (count > in.remaining() / (8 + 4 * static_cast<std::uint64_t>(index.dims_))) {
        throw FormatError("index file is truncated");
    }
    index.entries_.reserve(count);
    index.values_.reserve(count * index.dims_);
    std::vector<float> v(index.dims_);
    for (std::uint64_t i = 0; i < count; ++i) {
        VectorIndex::Entry entry;
        entry.chunk_id = in.get_string();
        entry.patient_id = in.get_string();
        for (auto& f : v) f = std::bit_cast<float>(in.get_le<std::uint32_t>());
        try {
            (void)EmbeddingVector::from_unit(v);
        } catch (const std::invalid_argument& e) {
            throw FormatError("index entry " + entry.chunk_id + ": " + e.what());
        }
        index.values_.insert(index.values_.end(), v.begin(), v.end());
        index.entries_.push_back(std::move(entry));
    }
    if (in.remaining() != 0) throw FormatError("index file has trailing bytes");
    index.offsets_ = group_offsets(index.entries_);
    return index;
}

void save_index(const VectorIndex& index, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        const auto bytes = write_index(index);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("cannot write index to " + tmp.string());
    }
    fs::rename(tmp, path);
}

VectorIndex load_index(const fs::path& path, const std::optional<IndexExpectation>& expected, bool allow_stale) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read index " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto index = read_index(ss.str());
    if (expected && !allow_stale) {
        const auto& m = index.metadata();
        std::string diff;
        if (m.embedder_fingerprint != expected->embedder_fingerprint) {
            diff += " embedder: stored \"" + m.embedder_fingerprint + "\", configured \"" +
                    expected->embedder_fingerprint + "\";";
        }
        if (m.chunk_policy_fingerprint != expected->chunk_policy_fingerprint) {
            diff += " chunk policy: stored \"" + m.chunk_policy_fingerprint + "\", configured \"" +
                    expected->chunk_policy_fingerprint + "\";";
        }
        if (!diff.empty()) throw StaleIndexError("index " + path.string() + " is stale;" + diff);
    }
    return index;
}

}  // namespace trialscreen
