#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kyleback/grid.hpp"

namespace kyleback {

// FNV-1a 64-bit; a content fingerprint, not a cryptographic hash.
std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t value);

// Shortest text that round-trips every double ("%.17g"); non-finite values print as nan/inf.
std::string format_double(double x);

// Writes via a temporary file in the same directory, then renames over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Column-oriented CSV with an optional leading comment line ("# key=value ...").
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  void add_row(const std::vector<double>& values);
  std::size_t n_rows() const noexcept { return rows_.size(); }
  std::string to_string(std::string_view comment = {}) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

// Long-format exports: one row per node.
CsvTable field_table(const FieldTX& f, const char* value_name);
CsvTable field_table(const FieldTVX& f, const char* value_name);

}  // namespace kyleback
