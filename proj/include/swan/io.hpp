#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "swan/common.hpp"

namespace swan {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '", path, "' for reading");
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

// Write via a temp file in the same directory, then rename into place.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open '", tmp.string(), "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail("short write to '", tmp.string(), "'");
  }
  std::filesystem::rename(tmp, target);
}

// Minimal CSV emitter: header row, UTF-8, LF line endings, fixed numeric
// formatting so identical values always serialize to identical bytes.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) buf_ += ',';
      buf_ += header[i];
    }
    buf_ += '\n';
  }

  CsvWriter& field(const std::string& s) {
    sep();
    buf_ += s;
    return *this;
  }
  CsvWriter& field(int64_t v) {
    sep();
    buf_ += std::to_string(v);
    return *this;
  }
  CsvWriter& field(double v) {
    sep();
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.10g", v);
    buf_ += tmp;
    return *this;
  }
  void endrow() {
    buf_ += '\n';
    first_ = true;
  }

  const std::string& str() const { return buf_; }
  void save(const std::string& path) const { write_file_atomic(path, buf_); }

 private:
  void sep() {
    if (!first_) buf_ += ',';
    first_ = false;
  }
  std::string buf_;
  bool first_ = true;
};

}  // namespace swan
