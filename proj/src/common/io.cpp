#include "common/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <system_error>

#include "common/error.hpp"

namespace gbias {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

fs::path temp_sibling(const fs::path& target) {
  auto name = target.filename().string();
  return target.parent_path() / ("." + name + ".tmp");
}

void ensure_parent(const fs::path& target) {
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) fail(ErrorCode::Io, "cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  AtomicFileWriter w(path);
  w.stream() << content;
  w.commit();
}

AtomicFileWriter::AtomicFileWriter(fs::path target) : target_(std::move(target)), temp_(temp_sibling(target_)) {
  ensure_parent(target_);
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorCode::Io, "cannot open '" + temp_.string() + "' for writing");
}

AtomicFileWriter::~AtomicFileWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(temp_, ec);
  }
}

void AtomicFileWriter::write_line(std::string_view line) {
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
}

void AtomicFileWriter::commit() {
  out_.flush();
  if (!out_) fail(ErrorCode::Io, "write to '" + temp_.string() + "' failed");
  out_.close();
  std::error_code ec;
  fs::rename(temp_, target_, ec);
  if (ec) fail(ErrorCode::Io, "cannot rename onto '" + target_.string() + "': " + ec.message());
  committed_ = true;
}

void for_each_jsonl(const std::string& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(record, lineno);
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace gbias
