#include "koopnav/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "koopnav/types.hpp"

namespace koopnav {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericError("format_double: non-finite value");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError("parse_double: bad number '" + std::string(s) + "'");
  }
  return v;
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash_));
  return std::string(buf, 16);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw IoError("read failed: " + path.string());
  }
  return out.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " +
                        ec.message());
}

}  // namespace koopnav
