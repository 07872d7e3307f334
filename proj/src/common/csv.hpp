#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gbias::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// newlines and "" escapes. A UTF-8 BOM is skipped. Blank lines are dropped.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::string& path);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

}  // namespace gbias::csv
