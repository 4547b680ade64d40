#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow {

/// Exact header of the panel CSV.
inline constexpr std::string_view kPanelHeader =
    "date,stock_id,buy_for,sell_for,buy_ins,sell_ins,buy_ind,sell_ind,mcap,return";

/// Parses the panel CSV. Throws Error(MalformedRow / UnparseableDate) naming
/// the data row (0-based, header excluded). Does not validate invariants.
std::vector<PanelObservation> read_panel_csv(const std::filesystem::path& path);
std::vector<PanelObservation> parse_panel_csv(std::istream& in);

void write_panel_csv(const std::filesystem::path& path, const std::vector<PanelObservation>& rows);

/// Shortest representation that round-trips through strtod.
std::string format_double(double v);

/// Minimal header-first CSV writer. Fields are not quoted; callers only pass
/// identifiers and numbers.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  CsvWriter& operator<<(std::string_view field);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter& operator<<(std::size_t v) { return *this << static_cast<long long>(v); }
  void end_row();

 private:
  void sep();
  std::ofstream out_;
  bool row_started_ = false;
};

/// Reads a headered CSV into rows of string fields; header returned separately.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws Error(MalformedRow) when absent.
  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace regimeflow
