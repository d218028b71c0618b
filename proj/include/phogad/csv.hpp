#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phogad::csv {

using Row = std::vector<std::string>;

// RFC 4180 style: quoted fields may contain commas, doubled quotes and newlines.
// Blank lines are skipped. Throws IoError if the file cannot be opened.
std::vector<Row> read_file(const std::filesystem::path& path);
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
std::string join(const Row& fields);

// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

}  // namespace phogad::csv
