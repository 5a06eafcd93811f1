#pragma once

#include <string_view>

namespace trialscreen::data {

std::string_view criteria_tsv();
std::string_view lexicon_tsv();
std::string_view oracle_rules_tsv();
std::string_view fixture_table1_csv();
std::string_view fixture_table2_csv();
std::string_view fixture_table4_csv();

}  // namespace trialscreen::data
