#ifndef SEGZIP_CSV_HPP
#define SEGZIP_CSV_HPP

#include <string>
#include <vector>

namespace segzip {

// Minimal RFC-4180 table: quoted fields, embedded quotes doubled, CRLF or
// LF line ends accepted on read.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string csv_quote(const std::string& field);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

}  // namespace segzip

#endif
