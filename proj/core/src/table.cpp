#include "dpofield/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <system_error>

#include <nlohmann/json.hpp>

namespace dpofield {

namespace {

struct CsvCell {
  std::ostream& out;
  void operator()(double v) const { out << format_double(v); }
  void operator()(std::int64_t v) const { out << v; }
  void operator()(const std::string& v) const { out << v; }
};

nlohmann::ordered_json to_json(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          // JSON has no NaN/Inf literals.
          if (!std::isfinite(v)) return nullptr;
        }
        return v;
      },
      cell);
}

void check_shape(const Table& table) {
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("table row width does not match header");
    }
  }
}

}  // namespace

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::Csv;
  if (name == "json") return TableFormat::Json;
  throw std::invalid_argument("unknown table format '" + name + "' (expected csv or json)");
}

std::string to_string(TableFormat f) { return f == TableFormat::Csv ? "csv" : "json"; }

IoError::IoError(const std::filesystem::path& path, const std::string& what)
    : std::runtime_error(path.string() + ": " + what), path_(path) {}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc{}) throw std::runtime_error("float formatting failed");
  return std::string(buf, end);
}

void write_csv(const Table& table, std::ostream& out) {
  check_shape(table);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      std::visit(CsvCell{out}, row[i]);
    }
    out << '\n';
  }
}

void write_json(const Table& table, std::ostream& out) {
  check_shape(table);
  auto array = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) obj[table.header[i]] = to_json(row[i]);
    array.push_back(std::move(obj));
  }
  out << array.dump(1) << '\n';
}

void export_table(const Table& table, TableFormat format,
                  const std::filesystem::path& destination) {
  if (table.rows.empty()) throw std::invalid_argument("refusing to export an empty table");
  check_shape(table);
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(destination, "cannot open for writing");
  if (format == TableFormat::Csv) {
    write_csv(table, out);
  } else {
    write_json(table, out);
  }
  out.flush();
  if (!out) throw IoError(destination, "write failed");
}

}  // namespace dpofield
