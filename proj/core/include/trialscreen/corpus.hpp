#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trialscreen/criteria.hpp"

namespace trialscreen {

struct NoteDocument {
    std::size_t note_index = 0;
    std::optional<std::string> record_date;
    std::string text;

    friend bool operator==(const NoteDocument&, const NoteDocument&) = default;
};

/// Official partition a record came from, when the source says so.
enum class Partition { Train, Test };

struct PatientRecord {
    std::string patient_id;
    std::vector<NoteDocument> notes;               // oldest first
    std::optional<CriterionLabels> labels;         // absent for unlabeled inputs
    std::optional<Partition> partition;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

using Corpus = std::vector<PatientRecord>;

/// Notes are separated by lines of at least this many '*' characters.
inline constexpr std::size_t kSeparatorMinStars = 20;

/// Parses one n2c2-style patient document: a TEXT element holding every note
/// and a TAGS element with one `<CRITERION met="met|not met"/>` per criterion.
/// A missing TAGS element yields an unlabeled record.
PatientRecord parse_patient_xml(std::string_view bytes, std::string patient_id);

/// Splits raw TEXT content into notes at separator lines. A leading
/// "Record date:" line sets the note date. Whitespace-only segments are dropped.
std::vector<NoteDocument> split_notes(std::string_view text);

/// Inverse of parse_patient_xml for records produced by this library:
/// notes joined by 100-star separator lines inside a CDATA TEXT block.
std::string serialize_patient_xml(const PatientRecord& record);

/// Loads a directory of .xml files (optionally under train/ and test/
/// subdirectories, which set the partition) or a single JSON corpus file.
/// Records come back sorted by patient_id.
Corpus load_corpus(const std::filesystem::path& source);

/// JSON fallback format, see README. Optional "partition" per patient.
Corpus parse_corpus_json(std::string_view json_text);
std::string corpus_to_json(const Corpus& corpus);

/// Writes train/ and test/ subdirectories of per-patient XML files
/// (unpartitioned records go to the top level).
void write_corpus_xml(const Corpus& corpus, const std::filesystem::path& directory);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

inline constexpr double kValidationFraction = 41.0 / 202.0;
inline constexpr std::uint64_t kDefaultSplitSeed = 42;

/// Keeps the official test partition, shuffles the official train partition
/// with `seed` and moves round(n_train * validation_fraction) ids to validation.
DatasetSplit make_split(const Corpus& corpus, std::uint64_t seed,
                        double validation_fraction = kValidationFraction);

/// Throws ValidationError unless the split partitions exactly the corpus ids.
void check_split(const DatasetSplit& split, const Corpus& corpus);

std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(std::string_view json_text);

struct LabelCount {
    CriterionId criterion;
    std::size_t met = 0;
    std::size_t not_met = 0;
};

std::vector<LabelCount> label_distribution(const Corpus& corpus);
std::string label_distribution_csv(const std::vector<LabelCount>& rows);

enum class InputType { Original, NerProblem, RagTopK };
std::string_view to_string(InputType type) noexcept;

struct TokenStats {
    InputType input_type = InputType::Original;
    double mean = 0.0;
    std::size_t min = 0;
    std::size_t max = 0;
    std::size_t n_patients = 0;
};

/// Summary over one token count per patient. Throws std::invalid_argument on empty input.
TokenStats token_stats(InputType type, const std::vector<std::size_t>& per_patient_tokens);

/// Notes trimmed and joined with a blank line, as submitted under the
/// long-context strategy before truncation.
std::string concatenate_notes(const PatientRecord& record);

std::string token_stats_csv(const std::vector<TokenStats>& rows);

}  // namespace trialscreen
