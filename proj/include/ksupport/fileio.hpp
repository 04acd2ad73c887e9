#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ksupport/errors.hpp"

namespace ksupport {

/// Writes contents to a sibling temporary file and renames it over path, so
/// readers never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ksupport
