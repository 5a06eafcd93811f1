#include <benchmark/benchmark.h>

#include <random>

#include "trialscreen/chunker.hpp"
#include "trialscreen/condenser.hpp"
#include "trialscreen/embed.hpp"
#include "trialscreen/synthetic.hpp"
#include "trialscreen/vindex.hpp"

using namespace trialscreen;

namespace {

const SyntheticCorpus& corpus() {
    static const auto synth = generate_synthetic_corpus(7, 288);
    return synth;
}

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> g;
    std::vector<double> raw(dims);
    for (auto& x : raw) x = g(rng);
    return EmbeddingVector::normalized(raw);
}

void BM_Retrieve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    constexpr std::size_t kDims = 384, kPatients = 20;
    std::mt19937_64 rng(1);
    std::vector<Chunk> chunks(n);
    std::vector<EmbeddingVector> vectors;
    for (std::size_t i = 0; i < n; ++i) {
        chunks[i].patient_id = "p" + std::to_string(i % kPatients);
        chunks[i].chunk_id = make_chunk_id(chunks[i].patient_id, 0, i);
        vectors.push_back(random_unit(rng, kDims));
    }
    const auto index = VectorIndex::build(chunks, vectors, kDims, {"e", "c", "t", "x"});
    const auto query = random_unit(rng, kDims);
    for (auto _ : state) benchmark::DoNotOptimize(index.retrieve(query, "p3", 10));
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ChunkCorpus(benchmark::State& state) {
    const ChunkPolicy policy;
    for (auto _ : state) {
        const ChunkStore store(corpus().records, policy);
        benchmark::DoNotOptimize(store.size());
    }
}
BENCHMARK(BM_ChunkCorpus)->Unit(benchmark::kMillisecond);

void BM_HashedNGramEmbed(benchmark::State& state) {
    const ChunkStore store(corpus().records, ChunkPolicy{});
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < 256 && i < store.size(); ++i) texts.push_back(store.chunks()[i].text);
    const HashedNGramEmbedder embedder(256);
    for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(texts));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}
BENCHMARK(BM_HashedNGramEmbed)->Unit(benchmark::kMillisecond);

void BM_Condense(benchmark::State& state) {
    const auto& ner = LexiconNer::builtin();
    const auto& record = corpus().records.front();
    for (auto _ : state) benchmark::DoNotOptimize(condense(record, ner, 8192));
}
BENCHMARK(BM_Condense);

}  // namespace

BENCHMARK_MAIN();
