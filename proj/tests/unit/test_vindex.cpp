#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/vindex.hpp"

using namespace trialscreen;

namespace {

struct Fixture {
    std::vector<Chunk> chunks;
    std::vector<EmbeddingVector> vectors;
    std::size_t dims = 0;
};

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> g;
    std::vector<double> raw(dims);
    for (auto& x : raw) x = g(rng);
    return EmbeddingVector::normalized(raw);
}

Fixture random_fixture(std::mt19937_64& rng, std::size_t n, std::size_t patients, std::size_t dims) {
    Fixture f;
    f.dims = dims;
    for (std::size_t i = 0; i < n; ++i) {
        Chunk c;
        c.patient_id = "p" + std::to_string(rng() % patients);
        c.note_index = 0;
        c.ordinal = i;
        c.chunk_id = make_chunk_id(c.patient_id, 0, i);
        c.text = "chunk " + std::to_string(i);
        f.chunks.push_back(c);
        f.vectors.push_back(random_unit(rng, dims));
    }
    return f;
}

IndexMetadata meta() { return {"emb-fp", "chunk-fp", "2026-01-01T00:00:00Z", "corpus-fp"}; }

// Brute-force oracle: score every chunk of the patient in double precision.
std::vector<std::pair<double, std::string>> oracle(const Fixture& f, const EmbeddingVector& q, const std::string& pid,
                                                   std::size_t k) {
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < f.chunks.size(); ++i) {
        if (f.chunks[i].patient_id != pid) continue;
        double s = 0.0;
        for (std::size_t d = 0; d < f.dims; ++d) s += static_cast<double>(q.values()[d]) * f.vectors[i].values()[d];
        all.emplace_back(s, f.chunks[i].chunk_id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace

TEST(VectorIndex, MatchesBruteForceOracle) {
    std::mt19937_64 rng(51);
    for (int iter = 0; iter < 20; ++iter) {
        const auto f = random_fixture(rng, 50 + rng() % 300, 1 + rng() % 12, 4 + rng() % 40);
        const auto index = VectorIndex::build(f.chunks, f.vectors, f.dims, meta());
        for (int q = 0; q < 10; ++q) {
            const auto query = random_unit(rng, f.dims);
            const auto pid = "p" + std::to_string(rng() % 13);
            const std::size_t k = 1 + rng() % 15;
            const auto expected = oracle(f, query, pid, k);
            const auto got = index.retrieve(query, pid, k);
            ASSERT_EQ(got.hits.size(), expected.size());
            ASSERT_EQ(got.unknown_patient, !index.patient_offsets().count(pid));
            for (std::size_t i = 0; i < expected.size(); ++i) {
                ASSERT_EQ(got.hits[i].rank, i + 1);
                ASSERT_EQ(got.hits[i].patient_id, pid);
                ASSERT_NEAR(got.hits[i].score, expected[i].first, 1e-9);
                // Ids agree except where float ties make the order ambiguous.
                if (got.hits[i].chunk_id != expected[i].second) {
                    ASSERT_NEAR(got.hits[i].score, expected[i].first, 1e-12);
                }
            }
        }
    }
}

TEST(VectorIndex, TiesBreakByChunkIdAscending) {
    std::vector<Chunk> chunks;
    std::vector<EmbeddingVector> vectors;
    for (const char* id : {"p:0:3", "p:0:1", "p:0:2"}) {
        Chunk c;
        c.chunk_id = id;
        c.patient_id = "p";
        chunks.push_back(c);
        vectors.push_back(EmbeddingVector::normalized(std::vector<double>{1, 1}));
    }
    const auto index = VectorIndex::build(chunks, vectors, 2, meta());
    const auto r = index.retrieve(EmbeddingVector::normalized(std::vector<double>{1, 0}), "p", 10);
    ASSERT_EQ(r.hits.size(), 3u);
    EXPECT_EQ(r.hits[0].chunk_id, "p:0:1");
    EXPECT_EQ(r.hits[1].chunk_id, "p:0:2");
    EXPECT_EQ(r.hits[2].chunk_id, "p:0:3");
}

TEST(VectorIndex, UnknownPatientAndBuildErrors) {
    std::mt19937_64 rng(52);
    auto f = random_fixture(rng, 10, 2, 8);
    const auto index = VectorIndex::build(f.chunks, f.vectors, f.dims, meta());
    const auto r = index.retrieve(random_unit(rng, 8), "nobody", 5);
    EXPECT_TRUE(r.unknown_patient);
    EXPECT_TRUE(r.hits.empty());

    auto dup = f;
    dup.chunks[1].chunk_id = dup.chunks[0].chunk_id;
    EXPECT_THROW(VectorIndex::build(dup.chunks, dup.vectors, dup.dims, meta()), ValidationError);
    EXPECT_THROW(VectorIndex::build(f.chunks, f.vectors, 9, meta()), ValidationError);
    f.vectors.pop_back();
    EXPECT_THROW(VectorIndex::build(f.chunks, f.vectors, f.dims, meta()), std::invalid_argument);
}

TEST(IndexFile, RoundTripProperty) {
    std::mt19937_64 rng(53);
    for (int iter = 0; iter < 20; ++iter) {
        const auto f = random_fixture(rng, rng() % 60, 1 + rng() % 5, 1 + rng() % 16);
        const auto index = VectorIndex::build(f.chunks, f.vectors, f.dims, meta());
        const auto back = read_index(write_index(index));
        ASSERT_EQ(back, index);
    }
}

TEST(IndexFile, CorruptionAndTruncationAreFormatErrors) {
    std::mt19937_64 rng(54);
    const auto f = random_fixture(rng, 30, 3, 8);
    const auto bytes = write_index(VectorIndex::build(f.chunks, f.vectors, f.dims, meta()));
    for (std::size_t pos : {std::size_t{0}, std::size_t{7}, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
        EXPECT_THROW(read_index(bad), FormatError) << pos;
    }
    for (std::size_t len : {std::size_t{0}, std::size_t{4}, bytes.size() / 3, bytes.size() - 8}) {
        EXPECT_THROW(read_index(bytes.substr(0, len)), FormatError) << len;
    }
}

TEST(IndexFile, SaveLoadAndStaleness) {
    tstest::TempDir dir;
    std::mt19937_64 rng(55);
    const auto f = random_fixture(rng, 20, 3, 8);
    const auto index = VectorIndex::build(f.chunks, f.vectors, f.dims, meta());
    const auto path = dir / "sub" / "index.tsix";
    save_index(index, path);
    EXPECT_EQ(load_index(path), index);
    EXPECT_EQ(load_index(path, IndexExpectation{"emb-fp", "chunk-fp"}), index);
    EXPECT_THROW(load_index(path, IndexExpectation{"other", "chunk-fp"}), StaleIndexError);
    EXPECT_THROW(load_index(path, IndexExpectation{"emb-fp", "other"}), StaleIndexError);
    EXPECT_NO_THROW(load_index(path, IndexExpectation{"other", "other"}, true));
    EXPECT_THROW(load_index(dir / "missing.tsix"), FormatError);
}
