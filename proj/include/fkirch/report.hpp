#pragma once
// Report files: a timestamp comment line, then either "key: value" lines or CSV rows.
// Numbers use one fixed format so repeated runs are byte-identical below the first line.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fkirch {

inline std::string timestamp_line() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "# generated %Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(bool x) { return x ? "true" : "false"; }

inline std::string fmt_list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out + "]";
}

class KeyValueReport {
 public:
  void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
  void add(const std::string& key, const char* value) { rows_.emplace_back(key, value); }
  void add(const std::string& key, double v) { add(key, fmt(v)); }
  void add(const std::string& key, int v) { add(key, fmt(v)); }
  void add(const std::string& key, bool v) { add(key, fmt(v)); }
  void add(const std::string& key, const std::vector<double>& v) { add(key, fmt_list(v)); }

  std::string body() const {
    std::string out;
    for (auto& [k, v] : rows_) out += k + ": " + v + "\n";
    return out;
  }
  const std::vector<std::pair<std::string, std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

class CsvReport {
 public:
  explicit CsvReport(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::string>& cells) {
    require(cells.size() == header_.size(), "csv row has " + std::to_string(cells.size()) + " cells, header " +
                                                std::to_string(header_.size()));
    rows_.push_back(cells);
  }
  std::string body() const {
    std::string out = join(header_);
    for (auto& r : rows_) out += join(r);
    return out;
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out + "\n";
  }
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_report(const std::string& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write report file '" + path + "'");
  os << timestamp_line() << "\n" << body;
  if (!os) throw InvalidInput("write failed for '" + path + "'");
}

// ---- reading back (inspect) ---------------------------------------------------

struct ParsedReport {
  bool csv = false;
  std::vector<std::pair<std::string, std::string>> fields;  // key: value files
  std::vector<std::string> header;                          // csv files
  std::vector<std::vector<std::string>> rows;
  std::string timestamp;

  const std::string* find(const std::string& key) const {
    for (auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }
  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline ParsedReport read_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot read report file '" + path + "'");
  ParsedReport r;
  r.csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (r.timestamp.empty()) r.timestamp = line;
      continue;
    }
    if (r.csv) {
      if (r.header.empty()) r.header = split_csv(line);
      else r.rows.push_back(split_csv(line));
    } else {
      auto c = line.find(": ");
      if (c == std::string::npos) throw InvalidInput("malformed report line in '" + path + "': " + line);
      r.fields.emplace_back(line.substr(0, c), line.substr(c + 2));
    }
  }
  return r;
}

}  // namespace fkirch
