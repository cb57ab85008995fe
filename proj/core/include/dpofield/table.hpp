#pragma once

// Column-oriented tables and their CSV / JSON serialization.
//
// Floats are written with 17 significant digits through std::to_chars, so the
// output is locale-independent and round-trips exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dpofield {

enum class TableFormat { Csv, Json };

TableFormat parse_table_format(const std::string& name);
std::string to_string(TableFormat f);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// 17-significant-digit round-trip representation; "nan", "inf", "-inf" for non-finite.
std::string format_double(double v);

void write_csv(const Table& table, std::ostream& out);
void write_json(const Table& table, std::ostream& out);

/// Writes `table` to `destination`. Throws std::invalid_argument on an empty
/// table (no file is created) and IoError when the file cannot be written.
void export_table(const Table& table, TableFormat format,
                  const std::filesystem::path& destination);

}  // namespace dpofield
