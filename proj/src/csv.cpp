#include "sfrbsde/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "sfrbsde/error.hpp"

namespace sfrbsde {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : CsvWriter(path, std::vector<std::string>(header.begin(), header.end())) {}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  out_.open(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  columns_ = header.size();
  for (const auto& h : header) cell(std::string_view(h));
  out_ << '\n';
  first_in_row_ = true;
  cells_in_row_ = 0;
}

void CsvWriter::sep() {
  if (!first_in_row_) out_ << ',';
  first_in_row_ = false;
  ++cells_in_row_;
}

CsvWriter& CsvWriter::cell(double x) {
  sep();
  out_ << format_double(x);
  return *this;
}

CsvWriter& CsvWriter::cell(long long x) {
  sep();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::cell(bool x) {
  sep();
  out_ << (x ? "true" : "false");
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view s) {
  sep();
  out_ << s;
  return *this;
}

void CsvWriter::end_row() {
  if (cells_in_row_ != columns_)
    throw IoError(path_.string() + ": row has " + std::to_string(cells_in_row_) + " cells, header has " +
                  std::to_string(columns_));
  out_ << '\n';
  if (!out_) throw IoError("write failed for " + path_.string());
  first_in_row_ = true;
  cells_in_row_ = 0;
  ++rows_;
}

}  // namespace sfrbsde
