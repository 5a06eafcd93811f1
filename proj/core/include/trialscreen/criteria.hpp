#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace trialscreen {

enum class CriterionId : std::size_t {
    Abdominal,
    AdvancedCad,
    AlcoholAbuse,
    AspForMi,
    Creatinine,
    DietSupp2Mos,
    DrugAbuse,
    English,
    Hba1c,
    Keto1Yr,
    MajorDiabetes,
    MakesDecisions,
    Mi6Mos,
};

inline constexpr std::size_t kCriterionCount = 13;

inline constexpr std::array<CriterionId, kCriterionCount> kAllCriteria = {
    CriterionId::Abdominal,    CriterionId::AdvancedCad,   CriterionId::AlcoholAbuse,
    CriterionId::AspForMi,     CriterionId::Creatinine,    CriterionId::DietSupp2Mos,
    CriterionId::DrugAbuse,    CriterionId::English,       CriterionId::Hba1c,
    CriterionId::Keto1Yr,      CriterionId::MajorDiabetes, CriterionId::MakesDecisions,
    CriterionId::Mi6Mos,
};

constexpr std::size_t index_of(CriterionId id) noexcept { return static_cast<std::size_t>(id); }

/// Canonical tag name, e.g. "ADVANCED-CAD".
std::string_view to_string(CriterionId id) noexcept;
std::optional<CriterionId> criterion_from_string(std::string_view name) noexcept;

enum class EligibilityLabel { NotMet, Met };

/// "met" / "not met"
std::string_view to_string(EligibilityLabel label) noexcept;
/// Exact match on the two serialized forms; anything else is nullopt.
std::optional<EligibilityLabel> label_from_string(std::string_view text) noexcept;

/// Labels for one patient, one slot per criterion.
using CriterionLabels = std::array<EligibilityLabel, kCriterionCount>;

struct CriterionSpec {
    CriterionId id;
    std::string_view name;
    std::string description;
};

using CriterionCatalog = std::array<CriterionSpec, kCriterionCount>;

/// Parses a catalog file ("ID<TAB>description" lines, '#' comments) and checks
/// every description against the pinned checksums. Throws SchemaError on any
/// missing, duplicate, unknown or altered entry.
CriterionCatalog parse_criterion_catalog(std::string_view tsv);

/// The catalog compiled into the library, validated once on first use.
const CriterionCatalog& criterion_catalog();

inline const CriterionSpec& criterion(CriterionId id) { return criterion_catalog()[index_of(id)]; }

}  // namespace trialscreen
