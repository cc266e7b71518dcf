#include "renewcap/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace renewcap::io {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// "key,value" where the value keeps any further commas (dist specs carry
// them).
std::pair<std::string, std::string> split_key_value(const std::string& text,
                                                    const char* context) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw std::invalid_argument(std::string("malformed ") + context +
                                " line in record: " + text);
  }
  return {text.substr(0, comma), text.substr(comma + 1)};
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string format_unsigned(std::uint64_t value) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%" PRIu64, value);
  return buffer;
}

std::string to_csv(const OutputRecord& record) {
  std::ostringstream out;
  out << "# schema," << record.schema_version << '\n';
  out << "# command," << record.command << '\n';
  for (const auto& [key, value] : record.parameters) {
    out << "# param," << key << ',' << value << '\n';
  }
  for (std::size_t i = 0; i < record.columns.size(); ++i) {
    out << (i == 0 ? "" : ",") << record.columns[i];
  }
  out << '\n';
  for (const auto& row : record.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i == 0 ? "" : ",") << row[i];
    }
    out << '\n';
  }
  for (const auto& [key, value] : record.metadata) {
    out << "# meta," << key << ',' << value << '\n';
  }
  return out.str();
}

OutputRecord from_csv(const std::string& text) {
  OutputRecord record;
  record.schema_version.clear();
  std::istringstream in(text);
  std::string line;
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# schema,", 0) == 0) {
      record.schema_version = line.substr(9);
    } else if (line.rfind("# command,", 0) == 0) {
      record.command = line.substr(10);
    } else if (line.rfind("# param,", 0) == 0) {
      record.parameters.push_back(split_key_value(line.substr(8), "param"));
    } else if (line.rfind("# meta,", 0) == 0) {
      record.metadata.push_back(split_key_value(line.substr(7), "meta"));
    } else if (line[0] == '#') {
      throw std::invalid_argument("unrecognized comment line: " + line);
    } else if (!have_columns) {
      record.columns = split_fields(line);
      have_columns = true;
    } else {
      auto row = split_fields(line);
      if (row.size() != record.columns.size()) {
        throw std::invalid_argument("row width does not match columns: " +
                                    line);
      }
      record.rows.push_back(std::move(row));
    }
  }
  if (record.schema_version.empty()) {
    throw std::invalid_argument("record is missing its schema line");
  }
  return record;
}

std::string to_json(const OutputRecord& record) {
  ordered_json doc;
  doc["schema_version"] = record.schema_version;
  doc["command"] = record.command;
  ordered_json params = ordered_json::object();
  for (const auto& [key, value] : record.parameters) params[key] = value;
  doc["parameters"] = std::move(params);
  doc["columns"] = record.columns;
  ordered_json rows = ordered_json::array();
  for (const auto& row : record.rows) rows.push_back(row);
  doc["rows"] = std::move(rows);
  ordered_json meta = ordered_json::object();
  for (const auto& [key, value] : record.metadata) meta[key] = value;
  doc["metadata"] = std::move(meta);
  return doc.dump(2) + "\n";
}

OutputRecord from_json(const std::string& text) {
  const ordered_json doc = ordered_json::parse(text);
  OutputRecord record;
  record.schema_version = doc.at("schema_version").get<std::string>();
  record.command = doc.at("command").get<std::string>();
  for (const auto& [key, value] : doc.at("parameters").items()) {
    record.parameters.emplace_back(key, value.get<std::string>());
  }
  record.columns = doc.at("columns").get<std::vector<std::string>>();
  for (const auto& row : doc.at("rows")) {
    record.rows.push_back(row.get<std::vector<std::string>>());
  }
  for (const auto& [key, value] : doc.at("metadata").items()) {
    record.metadata.emplace_back(key, value.get<std::string>());
  }
  return record;
}

}  // namespace renewcap::io
