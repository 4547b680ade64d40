#include "regimeflow/csv.hpp"

#include <charconv>
#include <cmath>

namespace regimeflow {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

namespace {

double parse_number(const std::string& field, std::size_t row, const char* column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw Error(ErrorCode::MalformedRow,
                "row " + std::to_string(row) + ": column '" + column + "' is not a number: '" + field + "'", row);
  }
  return v;
}

}  // namespace

std::vector<PanelObservation> parse_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, "panel CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Tolerate a UTF-8 byte-order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != kPanelHeader) {
    throw Error(ErrorCode::MalformedRow, "unexpected header '" + line + "', expected '" + std::string(kPanelHeader) + "'");
  }
  static constexpr const char* kColumns[] = {"buy_for", "sell_for", "buy_ins", "sell_ins",
                                             "buy_ind", "sell_ind", "mcap",    "return"};
  std::vector<PanelObservation> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 10) {
      throw Error(ErrorCode::MalformedRow,
                  "row " + std::to_string(row) + ": expected 10 fields, got " + std::to_string(f.size()), row);
    }
    PanelObservation obs;
    try {
      obs.date = Date::parse(f[0]);
    } catch (const Error& e) {
      throw Error(ErrorCode::UnparseableDate, "row " + std::to_string(row) + ": " + e.what(), row);
    }
    obs.stock_id = f[1];
    if (obs.stock_id.empty()) throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": empty stock_id", row);
    for (std::size_t i = 0; i < kNumInvestorTypes; ++i) {
      obs.buy_value[i] = parse_number(f[2 + 2 * i], row, kColumns[2 * i]);
      obs.sell_value[i] = parse_number(f[3 + 2 * i], row, kColumns[2 * i + 1]);
    }
    obs.market_cap = parse_number(f[8], row, kColumns[6]);
    obs.close_return = parse_number(f[9], row, kColumns[7]);
    rows.push_back(std::move(obs));
    ++row;
  }
  return rows;
}

std::vector<PanelObservation> read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return parse_panel_csv(in);
}

void write_panel_csv(const std::filesystem::path& path, const std::vector<PanelObservation>& rows) {
  CsvWriter w(path, {kPanelHeader});
  for (const auto& r : rows) {
    w << r.date.iso() << r.stock_id;
    for (std::size_t i = 0; i < kNumInvestorTypes; ++i) w << r.buy_value[i] << r.sell_value[i];
    w << r.market_cap << r.close_return;
    w.end_row();
  }
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  bool first = true;
  for (auto h : header) {
    if (!first) out_ << ',';
    out_ << h;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::sep() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::operator<<(std::string_view field) {
  sep();
  out_ << field;
  return *this;
}

CsvWriter& CsvWriter::operator<<(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  sep();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::MalformedRow, "missing column '" + std::string(name) + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  table.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    table.rows.push_back(split_csv_line(line));
  }
  return table;
}

}  // namespace regimeflow
