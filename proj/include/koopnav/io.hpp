#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace koopnav {

/// Shortest round-trip decimal form of a double. All numeric text written to
/// CSV files goes through this so reruns are byte-identical.
std::string format_double(double v);

double parse_double(std::string_view s);

/// Incremental 64-bit FNV-1a, used to fingerprint artifact bytes for
/// provenance chaining between pipeline stages.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void ensure_dir(const std::filesystem::path& dir);

}  // namespace koopnav
