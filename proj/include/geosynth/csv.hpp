#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace geosynth {

/// Minimal RFC 4180 reader: comma separator, double-quote quoting, LF or
/// CRLF line ends. Quoted fields may span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`; false at end of input.
  bool next(std::vector<std::string>& fields);
  /// Line number (1-based) on which the last record returned by next() began.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

void write_csv_row(std::ostream& out, std::span<const std::string> fields);

}  // namespace geosynth
