#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gbias {

using json = nlohmann::json;

std::string read_text_file(const std::string& path);

// Writes via a sibling temp file and rename(2), so readers never observe a
// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Streaming counterpart of write_file_atomic for large artifacts.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::filesystem::path target);
  ~AtomicFileWriter();
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  std::ostream& stream() { return out_; }
  void write_line(std::string_view line);
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

// Calls `fn(record, line_number)` for every non-blank line of a JSONL file.
void for_each_jsonl(const std::string& path, const std::function<void(const json&, std::size_t)>& fn);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace gbias
