#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "trialscreen/chunker.hpp"
#include "trialscreen/condenser.hpp"
#include "trialscreen/embed.hpp"
#include "trialscreen/generator.hpp"
#include "trialscreen/prompt.hpp"

namespace trialscreen {

/// Everything a run needs. Read from a flat "key = value" file; see
/// README for the key list. Unknown keys are rejected.
struct PipelineConfig {
    std::filesystem::path corpus_path;
    std::uint64_t split_seed = 42;
    std::filesystem::path split_file;
    ChunkPolicy chunk;
    EmbedderConfig embedder;
    NerConfig ner;
    StrategyConfig strategy = StrategyConfig::defaults(Strategy::Rag);
    GeneratorConfig generator;
    std::filesystem::path output_dir = "out";
    std::filesystem::path index_path;  // empty: <output_dir>/index.tsix
    double failure_threshold = 0.10;
    std::size_t workers = 0;           // 0: hardware concurrency

    /// Relative paths are resolved against `base_dir`.
    static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);

    /// Value checks plus existence of every referenced input file.
    void validate() const;

    /// Canonical key/value view. Rendering it back through parse() yields an equal config.
    std::map<std::string, std::string> snapshot() const;
    std::string to_text() const;

    std::filesystem::path resolved_index_path() const;
};

}  // namespace trialscreen
