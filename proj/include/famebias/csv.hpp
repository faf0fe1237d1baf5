#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace famebias::csv {

// Splits one record. Fields may be double-quoted; "" inside quotes is a quote.
// Throws ParseError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Reads header + rows, skipping blank lines and stripping a UTF-8 BOM and
// trailing '\r'. Each row must have as many fields as the header.
Table read(std::istream& in);

}  // namespace famebias::csv
