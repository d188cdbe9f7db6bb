#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace v2tex::csv {

using Row = std::vector<std::string>;

/// Parses RFC 4180-style CSV (double-quoted fields, "" escapes). Blank lines
/// are skipped. Throws FormatError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Reads and parses a file; throws IoError when it cannot be opened.
std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const Row& row);

/// Writes rows to a file, one per line. Throws IoError on failure.
void write_file(const std::filesystem::path& path, const std::vector<Row>& rows);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Parses a double, throwing FormatError with `what` in the message.
double parse_double(std::string_view text, std::string_view what);

}  // namespace v2tex::csv
