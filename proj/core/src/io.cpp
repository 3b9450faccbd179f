#include "kyleback/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "kyleback/errors.hpp"

namespace kyleback {

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot move output into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw Error(ErrorKind::invalid_argument, "CSV table needs at least one column");
}

void CsvTable::add_row(const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw Error(ErrorKind::invalid_argument, "CSV row has " + std::to_string(values.size()) + " values for " +
                                                 std::to_string(columns_.size()) + " columns");
  rows_.push_back(values);
}

std::string CsvTable::to_string(std::string_view comment) const {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (c) out += ',';
    out += columns_[c];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

CsvTable field_table(const FieldTX& f, const char* value_name) {
  CsvTable t({"t", "x", value_name});
  for (std::size_t k = 0; k < f.t_axis().n; ++k)
    for (std::size_t i = 0; i < f.x_axis().n; ++i) t.add_row({f.t_axis().at(k), f.x_axis().at(i), f.at(k, i)});
  return t;
}

CsvTable field_table(const FieldTVX& f, const char* value_name) {
  CsvTable t({"t", "v", "x", value_name});
  for (std::size_t k = 0; k < f.t_axis().n; ++k)
    for (std::size_t j = 0; j < f.v_axis().n; ++j)
      for (std::size_t i = 0; i < f.x_axis().n; ++i)
        t.add_row({f.t_axis().at(k), f.v_axis().at(j), f.x_axis().at(i), f.at(k, j, i)});
  return t;
}

}  // namespace kyleback
