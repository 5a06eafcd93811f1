#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trialscreen/chunker.hpp"
#include "trialscreen/condenser.hpp"
#include "trialscreen/corpus.hpp"
#include "trialscreen/criteria.hpp"
#include "trialscreen/embed.hpp"
#include "trialscreen/vindex.hpp"

namespace trialscreen {

enum class Strategy { Ori, Ner, Rag };

std::string_view to_string(Strategy strategy) noexcept;
std::optional<Strategy> strategy_from_string(std::string_view text) noexcept;

struct StrategyConfig {
    Strategy strategy = Strategy::Rag;
    std::size_t token_limit = 2048;
    std::size_t k = 10;

    /// Default limit per strategy: Ori 8192, Ner 8192, Rag 2048.
    static StrategyConfig defaults(Strategy strategy);
    /// Ori: 8192; Ner: 512, 2048 or 8192; Rag: 2048 with k >= 1.
    void validate() const;
};

struct EvidenceRef {
    std::string chunk_id;
    double score = 0.0;
    std::size_t note_index = 0;
    std::size_t ordinal = 0;
};

struct ContextBundle {
    Strategy strategy = Strategy::Ori;
    std::string patient_id;
    CriterionId criterion = CriterionId::Abdominal;
    std::string context_text;
    std::size_t token_count = 0;
    std::size_t token_limit = 0;
    /// Token count of the context as assembled, before the limit was applied.
    std::size_t pre_limit_tokens = 0;
    std::vector<EvidenceRef> evidence;  // Rag only, in descending score order
    bool truncated = false;
    bool unknown_patient = false;
    bool empty_summary = false;
};

/// What each strategy needs; unused members may stay null.
struct ContextDeps {
    const Embedder* embedder = nullptr;
    const VectorIndex* index = nullptr;
    const ChunkStore* chunks = nullptr;
    const NerBackend* ner = nullptr;
    /// Optional precomputed query vectors, one per criterion in catalog order.
    const std::vector<EmbeddingVector>* criterion_queries = nullptr;
};

ContextBundle build_context(const PatientRecord& record, CriterionId criterion, const StrategyConfig& config,
                            const ContextDeps& deps);

/// Provenance line placed above each retrieved snippet.
std::string evidence_header(std::size_t note_index, std::size_t ordinal, double score);

/// Renders the unified screening prompt around the bundle's context.
std::string render_prompt(const ContextBundle& bundle, CriterionId criterion);
std::string render_prompt(std::string_view context_text, CriterionId criterion);

/// Lowercase + trim; "not met" wins over "met"; nullopt when neither occurs.
std::optional<EligibilityLabel> parse_verdict(std::string_view generated_text);

}  // namespace trialscreen
