#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace charterseg::io {

/// One parsed CSV record together with its 1-based line number in the file.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRecord> records;
};

/// RFC-4180-ish reader: comma separated, double quotes escape commas and
/// quotes, CR/LF line endings, UTF-8 BOM skipped. Throws ParseError on an
/// unterminated quote.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

/// Fixed-point formatting with `digits` decimals.
std::string format_fixed(double value, int digits);

std::string csv_escape(std::string_view field);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace charterseg::io
