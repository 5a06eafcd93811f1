#include "trialscreen/fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "embedded_data.hpp"
#include "trialscreen/criteria.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

namespace {

std::vector<std::string> split_commas(std::string_view line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.emplace_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double to_number(const std::string& cell, std::string_view where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size()) throw std::invalid_argument("non-numeric cell \"" + cell + "\" at " + std::string(where));
    return v;
}

std::string num(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

double TableFixture::value(std::string_view row_label, std::string_view column) const {
    std::size_t col = columns.size();
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == column) col = c;
    }
    if (col == columns.size()) throw std::invalid_argument(name + ": no column " + std::string(column));
    for (const auto& row : rows) {
        if (row[0] == row_label) return to_number(row[col], name + "/" + std::string(row_label));
    }
    throw std::invalid_argument(name + ": no row " + std::string(row_label));
}

std::vector<double> TableFixture::column_values(std::string_view column, bool (*keep)(std::string_view)) const {
    std::vector<double> out;
    for (const auto& row : rows) {
        if (!keep || keep(row[0])) out.push_back(value(row[0], column));
    }
    return out;
}

TableFixture parse_fixture_csv(std::string name, std::string_view csv) {
    TableFixture f;
    f.name = std::move(name);
    std::size_t pos = 0;
    while (pos < csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        const auto line = trim(csv.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto body = trim(line.substr(1));
            if (body.starts_with("source:")) f.source = std::string(trim(body.substr(7)));
            if (body.starts_with("tolerance:")) {
                try {
                    f.tolerance = std::stod(std::string(trim(body.substr(10))));
                } catch (const std::exception&) {
                    throw FormatError(f.name + ": unreadable tolerance line");
                }
            }
            continue;
        }
        auto cells = split_commas(line);
        if (f.columns.empty()) {
            f.columns = std::move(cells);
        } else {
            if (cells.size() != f.columns.size()) {
                throw FormatError(f.name + ": row \"" + cells[0] + "\" has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(f.columns.size()));
            }
            f.rows.push_back(std::move(cells));
        }
    }
    if (f.source.empty()) throw FormatError(f.name + ": missing \"# source:\" line");
    if (f.columns.empty()) throw FormatError(f.name + ": missing header row");
    return f;
}

const std::vector<TableFixture>& builtin_fixtures() {
    static const std::vector<TableFixture> fixtures = {
        parse_fixture_csv("table1_label_distribution", data::fixture_table1_csv()),
        parse_fixture_csv("table2_token_stats", data::fixture_table2_csv()),
        parse_fixture_csv("table4_per_criterion_f1", data::fixture_table4_csv()),
    };
    return fixtures;
}

const TableFixture& builtin_fixture(std::string_view name) {
    for (const auto& f : builtin_fixtures()) {
        if (f.name == name) return f;
    }
    throw std::invalid_argument("no built-in fixture named " + std::string(name));
}

bool is_criterion_row(std::string_view label) { return criterion_from_string(label).has_value(); }

bool FixtureReport::passed() const noexcept { return failures() == 0; }

std::size_t FixtureReport::failures() const noexcept {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.passed ? 0 : 1;
    return n;
}

namespace {

void check_per_criterion_table(const TableFixture& f, FixtureReport& report) {
    const auto criterion_rows = f.column_values(f.columns[1], is_criterion_row).size();
    report.checks.push_back({f.name, "13 criterion rows", criterion_rows == kCriterionCount,
                             std::to_string(criterion_rows) + " rows"});
    bool has_macro = false;
    for (const auto& row : f.rows) has_macro = has_macro || row[0] == "Macro avg";
    for (std::size_t c = 1; c < f.columns.size() && has_macro && criterion_rows == kCriterionCount; ++c) {
        const auto values = f.column_values(f.columns[c], is_criterion_row);
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        const double printed = f.value("Macro avg", f.columns[c]);
        report.checks.push_back({f.name, f.columns[c] + ": macro row = mean of criterion rows",
                                 std::abs(mean - printed) <= f.tolerance + 1e-12,
                                 "mean " + num(mean, 5) + ", printed " + num(printed)});
    }
    const bool has_delta = [&] {
        for (const auto& c : f.columns) {
            if (c == "Delta") return true;
        }
        return false;
    }();
    if (has_delta) {
        for (const auto& row : f.rows) {
            const double expected = f.value(row[0], "RAG-top10") - f.value(row[0], "NER-512");
            const double printed = f.value(row[0], "Delta");
            report.checks.push_back({f.name, row[0] + ": Delta = RAG-top10 - NER-512",
                                     std::abs(expected - printed) <= f.tolerance + 1e-12,
                                     "computed " + num(expected) + ", printed " + num(printed)});
        }
    }
    for (const auto& row : f.rows) {
        if (row[0] == "Micro avg") {
            report.warnings.push_back(f.name + ": the Micro avg row needs confusion counts and is not recomputed");
        }
    }
}

void check_label_table(const TableFixture& f, FixtureReport& report) {
    std::size_t total = 0;
    bool first = true;
    for (const auto& row : f.rows) {
        const double met = f.value(row[0], "met");
        const double not_met = f.value(row[0], "not_met");
        const double n = met + not_met;
        if (first) total = static_cast<std::size_t>(n);
        first = false;
        report.checks.push_back({f.name, row[0] + ": met + not_met = " + std::to_string(total),
                                 n == static_cast<double>(total), num(n, 0)});
        const double pct = std::round(met / n * 1000.0) / 10.0;
        const double printed = f.value(row[0], "met_pct");
        report.checks.push_back({f.name, row[0] + ": met_pct = met / total", std::abs(pct - printed) < 0.05 + 1e-9,
                                 "computed " + num(pct, 1) + ", printed " + num(printed, 1)});
        const double not_pct = f.value(row[0], "not_met_pct");
        report.checks.push_back({f.name, row[0] + ": percentages sum to 100",
                                 std::abs(printed + not_pct - 100.0) < 0.1 + 1e-9, num(printed + not_pct, 1)});
    }
}

void check_token_table(const TableFixture& f, FixtureReport& report) {
    for (const auto& row : f.rows) {
        const double mean = f.value(row[0], "mean");
        const double mn = f.value(row[0], "min");
        const double mx = f.value(row[0], "max");
        report.checks.push_back({f.name, row[0] + ": min <= mean <= max", mn <= mean && mean <= mx,
                                 num(mn, 0) + " <= " + num(mean, 0) + " <= " + num(mx, 0)});
        // The limit column lists alternatives separated by '/'.
        double largest = 0.0;
        std::size_t pos = 0;
        const std::string& cell = row.back();
        while (pos <= cell.size()) {
            auto slash = cell.find('/', pos);
            if (slash == std::string::npos) slash = cell.size();
            largest = std::max(largest, to_number(cell.substr(pos, slash - pos), f.name + "/" + row[0]));
            pos = slash + 1;
        }
        if (mx > largest) {
            report.warnings.push_back(f.name + ": " + row[0] + " max " + num(mx, 0) + " exceeds the applied limit " +
                                      num(largest, 0) + "; the statistics describe input before the limit is applied");
        }
    }
}

}  // namespace

FixtureReport verify_fixtures(std::span<const TableFixture> fixtures) {
    FixtureReport report;
    if (fixtures.empty()) report.warnings.push_back("no fixtures to verify");
    for (const auto& f : fixtures) {
        report.checks.push_back({f.name, "has source line", !f.source.empty(), f.source});
        if (f.name.find("table4") != std::string::npos) {
            check_per_criterion_table(f, report);
        } else if (f.name.find("table1") != std::string::npos) {
            check_label_table(f, report);
        } else if (f.name.find("table2") != std::string::npos) {
            check_token_table(f, report);
        }
    }
    return report;
}

std::string render_fixture_report(const FixtureReport& report) {
    std::string out;
    for (const auto& c : report.checks) {
        out += std::string(c.passed ? "ok   " : "FAIL ") + c.fixture + " | " + c.check + " | " + c.detail + "\n";
    }
    for (const auto& w : report.warnings) out += "note " + w + "\n";
    out += std::to_string(report.checks.size() - report.failures()) + "/" + std::to_string(report.checks.size()) +
           " checks passed\n";
    return out;
}

}  // namespace trialscreen
