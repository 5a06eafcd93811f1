#include "trialscreen/criteria.hpp"

#include <string>

#include "embedded_data.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

namespace {

constexpr std::array<std::string_view, kCriterionCount> kNames = {
    "ABDOMINAL",  "ADVANCED-CAD", "ALCOHOL-ABUSE",  "ASP-FOR-MI",      "CREATININE",
    "DIETSUPP-2MOS", "DRUG-ABUSE", "ENGLISH",       "HBA1C",           "KETO-1YR",
    "MAJOR-DIABETES", "MAKES-DECISIONS", "MI-6MOS",
};

// FNV-1a 64 of each verbatim description. Editing the catalog text without
// updating these is a startup error.
constexpr std::array<std::uint64_t, kCriterionCount> kDescriptionChecksums = {
    0x137110994f054191ULL, 0xe096addce1fc1eb0ULL, 0xc11894a9a83de3dfULL, 0xe0e0b33a1c06aaa0ULL,
    0x0168e8829f98d0c0ULL, 0x6fdc337bed89705eULL, 0x8ef90d564bad1a7dULL, 0x70789fcf53d5f529ULL,
    0x4ab4a04cff30a029ULL, 0xff535f60e1267868ULL, 0xf6c85b9fa4c5adc7ULL, 0xc44a3d918948cf4bULL,
    0x24509fb085066130ULL,
};

}  // namespace

std::string_view to_string(CriterionId id) noexcept { return kNames[index_of(id)]; }

std::optional<CriterionId> criterion_from_string(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return static_cast<CriterionId>(i);
    }
    return std::nullopt;
}

std::string_view to_string(EligibilityLabel label) noexcept {
    return label == EligibilityLabel::Met ? "met" : "not met";
}

std::optional<EligibilityLabel> label_from_string(std::string_view text) noexcept {
    if (text == "met") return EligibilityLabel::Met;
    if (text == "not met") return EligibilityLabel::NotMet;
    return std::nullopt;
}

CriterionCatalog parse_criterion_catalog(std::string_view tsv) {
    std::array<std::optional<std::string>, kCriterionCount> found;
    std::size_t line_no = 0;
    while (!tsv.empty()) {
        const auto eol = tsv.find('\n');
        std::string_view line = tsv.substr(0, eol);
        tsv = eol == std::string_view::npos ? std::string_view{} : tsv.substr(eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty() || line.front() == '#') continue;

        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw SchemaError("criterion catalog line " + std::to_string(line_no) + ": expected ID<TAB>description");
        }
        const auto name = line.substr(0, tab);
        const auto description = line.substr(tab + 1);
        const auto id = criterion_from_string(name);
        if (!id) throw SchemaError("criterion catalog: unknown criterion " + std::string(name));
        auto& slot = found[index_of(*id)];
        if (slot) throw SchemaError("criterion catalog: duplicate criterion " + std::string(name));
        if (fnv1a64(description) != kDescriptionChecksums[index_of(*id)]) {
            throw SchemaError("criterion catalog: description of " + std::string(name) +
                              " does not match its pinned checksum");
        }
        slot = std::string(description);
    }

    CriterionCatalog catalog;
    for (std::size_t i = 0; i < kCriterionCount; ++i) {
        if (!found[i]) throw SchemaError("criterion catalog: missing criterion " + std::string(kNames[i]));
        catalog[i] = CriterionSpec{static_cast<CriterionId>(i), kNames[i], std::move(*found[i])};
    }
    return catalog;
}

const CriterionCatalog& criterion_catalog() {
    static const CriterionCatalog catalog = parse_criterion_catalog(data::criteria_tsv());
    return catalog;
}

}  // namespace trialscreen
