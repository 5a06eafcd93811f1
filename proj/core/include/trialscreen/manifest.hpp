#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trialscreen/criteria.hpp"
#include "trialscreen/generator.hpp"
#include "trialscreen/prompt.hpp"

namespace trialscreen {

struct ManifestHeader {
    std::string run_id;
    std::string strategy;
    std::string split;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> fingerprints;
    std::vector<std::string> patients;
    bool label_replay = false;
    std::string decoding = "server defaults";

    friend bool operator==(const ManifestHeader&, const ManifestHeader&) = default;
};

struct VerdictRecord {
    std::string patient_id;
    CriterionId criterion = CriterionId::Abdominal;
    EligibilityLabel predicted = EligibilityLabel::NotMet;
    double met_score = 0.0;
    std::vector<std::pair<std::string, double>> evidence;  // chunk id, retrieval score
    std::string raw_text_hash;
    std::optional<std::string> anomaly;
    bool backend_failure = false;
    std::size_t context_tokens = 0;
    std::size_t pre_limit_tokens = 0;
    std::size_t token_limit = 0;
    bool truncated = false;

    Verdict to_verdict() const;
    std::string key() const;
};

struct ManifestFooter {
    bool complete = false;
    std::size_t verdicts = 0;
    std::size_t anomalies = 0;
    std::string reason;
};

struct Manifest {
    ManifestHeader header;
    std::vector<VerdictRecord> records;
    std::optional<ManifestFooter> footer;
    /// Bytes of the file up to the end of the last complete record line.
    std::size_t valid_prefix_bytes = 0;

    /// Pairs of header.patients x criteria without a record, as "patient/CRITERION".
    std::vector<std::string> missing_pairs() const;
};

std::string pair_key(std::string_view patient_id, CriterionId criterion);

/// One JSON object per line, no trailing newline.
std::string header_line(const ManifestHeader& header);
std::string record_line(const VerdictRecord& record);
std::string footer_line(const ManifestFooter& footer);

/// A trailing partial line (interrupted write) is ignored. Throws FormatError
/// when the first line is not a header or a complete line fails to parse.
Manifest parse_manifest(std::string_view text);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace trialscreen
