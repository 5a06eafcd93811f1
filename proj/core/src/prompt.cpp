#include "trialscreen/prompt.hpp"

#include <cstdio>
#include <stdexcept>

#include "trialscreen/errors.hpp"

namespace trialscreen {

std::string_view to_string(Strategy strategy) noexcept {
    switch (strategy) {
        case Strategy::Ori: return "ori";
        case Strategy::Ner: return "ner";
        case Strategy::Rag: return "rag";
    }
    return "?";
}

std::optional<Strategy> strategy_from_string(std::string_view text) noexcept {
    if (text == "ori") return Strategy::Ori;
    if (text == "ner") return Strategy::Ner;
    if (text == "rag") return Strategy::Rag;
    return std::nullopt;
}

StrategyConfig StrategyConfig::defaults(Strategy strategy) {
    switch (strategy) {
        case Strategy::Ori: return {Strategy::Ori, 8192, 10};
        case Strategy::Ner: return {Strategy::Ner, 8192, 10};
        case Strategy::Rag: return {Strategy::Rag, 2048, 10};
    }
    throw std::invalid_argument("unknown strategy");
}

void StrategyConfig::validate() const {
    switch (strategy) {
        case Strategy::Ori:
            if (token_limit != 8192) throw ValidationError("ori strategy token limit must be 8192");
            break;
        case Strategy::Ner:
            if (token_limit != 512 && token_limit != 2048 && token_limit != 8192) {
                throw ValidationError("ner strategy token limit must be 512, 2048 or 8192");
            }
            break;
        case Strategy::Rag:
            if (token_limit != 2048) throw ValidationError("rag strategy token limit must be 2048");
            if (k == 0) throw ValidationError("rag_k must be at least 1");
            break;
    }
}

std::string evidence_header(std::size_t note_index, std::size_t ordinal, double score) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "[note %zu | chunk %zu | score %.4f]", note_index, ordinal, score);
    return buf;
}

namespace {

void build_rag(ContextBundle& bundle, const PatientRecord& record, CriterionId criterion, const StrategyConfig& config,
               const ContextDeps& deps) {
    if (!deps.index || !deps.chunks || (!deps.embedder && !deps.criterion_queries)) {
        throw std::invalid_argument("rag strategy needs an embedder, an index and a chunk store");
    }
    std::optional<EmbeddingVector> computed;
    const EmbeddingVector* query = nullptr;
    if (deps.criterion_queries) {
        query = &deps.criterion_queries->at(index_of(criterion));
    } else {
        const std::string description = trialscreen::criterion(criterion).description;
        computed = deps.embedder->embed(std::span<const std::string>(&description, 1)).at(0);
        query = &*computed;
    }
    const auto result = deps.index->retrieve(*query, record.patient_id, config.k);
    bundle.unknown_patient = result.unknown_patient;

    std::vector<std::string> snippets;
    std::vector<std::size_t> snippet_tokens;
    for (const auto& hit : result.hits) {
        const Chunk* chunk = deps.chunks->find(hit.chunk_id);
        if (!chunk) throw FormatError("index refers to chunk " + hit.chunk_id + " missing from the chunk store");
        snippets.push_back(evidence_header(chunk->note_index, chunk->ordinal, hit.score) + "\n" + chunk->text);
        snippet_tokens.push_back(count_tokens(snippets.back()));
        bundle.evidence.push_back({hit.chunk_id, hit.score, chunk->note_index, chunk->ordinal});
    }
    // Snippets are joined by a blank line, which adds no tokens.
    std::size_t total = 0;
    for (auto t : snippet_tokens) total += t;
    bundle.pre_limit_tokens = total;
    while (total > config.token_limit && !snippets.empty()) {
        total -= snippet_tokens.back();
        snippets.pop_back();
        snippet_tokens.pop_back();
        bundle.evidence.pop_back();
        bundle.truncated = true;
    }
    for (std::size_t i = 0; i < snippets.size(); ++i) {
        if (i > 0) bundle.context_text += "\n\n";
        bundle.context_text += snippets[i];
    }
}

}  // namespace

ContextBundle build_context(const PatientRecord& record, CriterionId criterion, const StrategyConfig& config,
                            const ContextDeps& deps) {
    config.validate();
    ContextBundle bundle;
    bundle.strategy = config.strategy;
    bundle.patient_id = record.patient_id;
    bundle.criterion = criterion;
    bundle.token_limit = config.token_limit;
    switch (config.strategy) {
        case Strategy::Ori: {
            const auto full = concatenate_notes(record);
            bundle.pre_limit_tokens = count_tokens(full);
            if (bundle.pre_limit_tokens > config.token_limit) {
                bundle.context_text = std::string(drop_leading_tokens(full, bundle.pre_limit_tokens - config.token_limit));
                bundle.truncated = true;
            } else {
                bundle.context_text = full;
            }
            break;
        }
        case Strategy::Ner: {
            if (!deps.ner) throw std::invalid_argument("ner strategy needs a NER backend");
            auto condensed = condense(record, *deps.ner, config.token_limit);
            bundle.context_text = std::move(condensed.text);
            bundle.pre_limit_tokens = condensed.pre_truncation_tokens();
            bundle.truncated = condensed.dropped_tokens > 0;
            bundle.empty_summary = condensed.empty_summary;
            break;
        }
        case Strategy::Rag: build_rag(bundle, record, criterion, config, deps); break;
    }
    bundle.token_count = count_tokens(bundle.context_text);
    return bundle;
}

std::string render_prompt(std::string_view context_text, CriterionId criterion) {
    const auto& spec = trialscreen::criterion(criterion);
    std::string out = "Context:\n\n";
    out += context_text;
    out += "\n\nQuestion:\n\nBased on the patient's medical records provided, assess if the patient meets the criteria for ";
    out += spec.name;
    out += ": ";
    out += spec.description;
    out += "\n\nOnly respond with 'met' if the criteria are met or 'not met' if they are not.";
    return out;
}

std::string render_prompt(const ContextBundle& bundle, CriterionId criterion) {
    return render_prompt(bundle.context_text, criterion);
}

std::optional<EligibilityLabel> parse_verdict(std::string_view generated_text) {
    std::string text(trim(generated_text));
    for (auto& c : text) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    if (text.find("not met") != std::string::npos) return EligibilityLabel::NotMet;
    if (text.find("met") != std::string::npos) return EligibilityLabel::Met;
    return std::nullopt;
}

}  // namespace trialscreen
