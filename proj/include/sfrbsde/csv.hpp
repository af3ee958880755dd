#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace sfrbsde {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

// Comma-separated writer with a header row. Numeric cells use format_double,
// so identical inputs always produce identical bytes.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(double x);
  CsvWriter& cell(long long x);
  CsvWriter& cell(std::size_t x) { return cell(static_cast<long long>(x)); }
  CsvWriter& cell(int x) { return cell(static_cast<long long>(x)); }
  CsvWriter& cell(bool x);
  CsvWriter& cell(std::string_view s);
  CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
  void end_row();

  const std::filesystem::path& path() const { return path_; }
  std::size_t rows() const { return rows_; }

 private:
  void sep();

  std::filesystem::path path_;
  std::ofstream out_;
  bool first_in_row_ = true;
  std::size_t columns_ = 0;
  std::size_t cells_in_row_ = 0;
  std::size_t rows_ = 0;
};

}  // namespace sfrbsde
