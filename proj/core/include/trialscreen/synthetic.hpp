#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trialscreen/corpus.hpp"

namespace trialscreen {

/// One planted evidence sentence.
struct PlantingRow {
    std::string patient_id;
    CriterionId criterion;
    std::size_t note_index = 0;
    std::string sentence;
};

struct SyntheticCorpus {
    Corpus records;
    std::vector<PlantingRow> manifest;
};

/// Met prevalence per criterion used for planting (counts out of 288).
double planting_prevalence(CriterionId id) noexcept;

/// Deterministic filler-text corpus. Each patient gets 2-5 notes; every
/// criterion is independently planted with its prevalence, and a planted
/// criterion is labeled Met. Roughly 70% of patients are marked Train.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_patients);

std::string planting_manifest_tsv(const std::vector<PlantingRow>& rows);

}  // namespace trialscreen
