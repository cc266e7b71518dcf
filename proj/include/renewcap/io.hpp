#ifndef RENEWCAP_IO_HPP
#define RENEWCAP_IO_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace renewcap::io {

inline constexpr const char* kSchemaVersion = "1";

// Canonical number formatting: 17 significant digits round-trips every
// double bit-exactly, so regenerated files are byte-stable.
std::string format_double(double value);
std::string format_unsigned(std::uint64_t value);

// One command's machine-readable output: a parameter echo, a rectangular
// payload, and a trailing metadata block.  Cells hold their canonical
// string form; emit/parse round-trips are exact by construction.
struct OutputRecord {
  std::string schema_version = kSchemaVersion;
  std::string command;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  bool operator==(const OutputRecord&) const = default;
};

// CSV layout: "# schema,1" / "# command,name" / "# param,key,value" lines,
// a column-header row, data rows, then trailing "# meta,key,value" lines.
std::string to_csv(const OutputRecord& record);
OutputRecord from_csv(const std::string& text);

std::string to_json(const OutputRecord& record);
OutputRecord from_json(const std::string& text);

}  // namespace renewcap::io

#endif  // RENEWCAP_IO_HPP
