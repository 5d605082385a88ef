#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dpkit::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Fixed-point formatting with the given number of decimals ("-0.000000" is
// normalized to "0.000000").
std::string format_fixed(double value, int decimals = 6);

// Rounds to the given number of decimals, for JSON reports.
double round_to(double value, int decimals = 6);

std::string csv_escape(std::string_view field);

// Splits one CSV record; handles double-quoted fields.
std::vector<std::string> csv_split(std::string_view line);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace dpkit::io
