#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trialscreen {

/// A published table kept as CSV. The file must carry a "# source:" line;
/// an optional "# tolerance:" line sets the comparison tolerance.
struct TableFixture {
    std::string name;
    std::string source;
    double tolerance = 0.0;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    /// Numeric cell by row label (first column) and column name.
    double value(std::string_view row_label, std::string_view column) const;
    /// All numeric cells of a column for rows whose label satisfies `keep`.
    std::vector<double> column_values(std::string_view column, bool (*keep)(std::string_view) = nullptr) const;
};

/// Throws FormatError when the source line or header row is missing, or rows are ragged.
TableFixture parse_fixture_csv(std::string name, std::string_view csv);

/// Fixtures compiled into the library: "table1_label_distribution",
/// "table2_token_stats", "table4_per_criterion_f1".
const std::vector<TableFixture>& builtin_fixtures();
const TableFixture& builtin_fixture(std::string_view name);

/// True for the 13 criterion rows of a per-criterion table (not "Micro avg"/"Macro avg").
bool is_criterion_row(std::string_view label);

struct FixtureCheck {
    std::string fixture;
    std::string check;
    bool passed = false;
    std::string detail;
};

struct FixtureReport {
    std::vector<FixtureCheck> checks;
    std::vector<std::string> warnings;

    bool passed() const noexcept;
    std::size_t failures() const noexcept;
};

/// Recomputes every identity the tables imply: column means against printed
/// macro rows, delta = RAG - NER-512, label counts summing to the corpus size,
/// percentages, and min <= mean <= max for token statistics.
FixtureReport verify_fixtures(std::span<const TableFixture> fixtures);

std::string render_fixture_report(const FixtureReport& report);

}  // namespace trialscreen
