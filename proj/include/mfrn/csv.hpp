#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mfrn::csv {

/// 17 significant digits; parses back to the identical double.
std::string format(double v);

/// Comma-separated table with a one-line header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws if absent.
  std::size_t index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Table& table);
void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows);

}  // namespace mfrn::csv
