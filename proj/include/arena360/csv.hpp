#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arena360/core.hpp"
#include "arena360/navigation.hpp"
#include "arena360/rdmodel.hpp"

namespace arena360 {

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, int line_no, const std::string& field) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e)
    throw data_error("line " + std::to_string(line_no) + ": bad " + field + " value '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, int line_no, const std::string& field) {
  int v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e)
    throw data_error("line " + std::to_string(line_no) + ": bad " + field + " value '" + s + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // row i came from line i+2
};

inline Table read(std::istream& in, const std::string& expected_header) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw data_error("line 1: empty file");
  t.header = split_line(line);
  if (!expected_header.empty()) {
    const auto want = split_line(expected_header);
    if (t.header != want)
      throw data_error("line 1: expected header '" + expected_header + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw data_error("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " fields, got " +
                       std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table read_file(const std::string& path, const std::string& expected_header) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open '" + path + "'");
  return read(f, expected_header);
}

}  // namespace csv

inline constexpr const char* kTraceHeader = "t,yaw,pitch,roll,x,y";
inline constexpr const char* kRdSampleHeader = "tile_x,tile_y,rate_mbps,mse";

inline NavigationTrace parse_trace_csv(std::istream& in, const std::string& user_id = "") {
  const csv::Table t = csv::read(in, kTraceHeader);
  NavigationTrace trace;
  trace.user_id = user_id;
  int line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    TraceSample s;
    s.t = csv::parse_double(row[0], line_no, "t");
    s.pose.yaw = csv::parse_double(row[1], line_no, "yaw");
    s.pose.pitch = csv::parse_double(row[2], line_no, "pitch");
    s.pose.roll = csv::parse_double(row[3], line_no, "roll");
    s.x = csv::parse_double(row[4], line_no, "x");
    s.y = csv::parse_double(row[5], line_no, "y");
    trace.samples.push_back(s);
  }
  trace.validate();
  return trace;
}

inline NavigationTrace load_trace_csv(const std::string& path, const std::string& user_id = "") {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open trace '" + path + "'");
  return parse_trace_csv(f, user_id.empty() ? path : user_id);
}

inline std::string trace_to_csv(const NavigationTrace& trace) {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  out.precision(17);
  for (const TraceSample& s : trace.samples)
    out << s.t << ',' << s.pose.yaw << ',' << s.pose.pitch << ',' << s.pose.roll << ',' << s.x
        << ',' << s.y << '\n';
  return out.str();
}

inline std::vector<RdSample> parse_rd_samples_csv(std::istream& in) {
  const csv::Table t = csv::read(in, kRdSampleHeader);
  std::vector<RdSample> out;
  int line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    RdSample s;
    s.n = csv::parse_int(row[0], line_no, "tile_x");
    s.m = csv::parse_int(row[1], line_no, "tile_y");
    s.rate_mbps = csv::parse_double(row[2], line_no, "rate_mbps");
    s.mse = csv::parse_double(row[3], line_no, "mse");
    if (s.n < 0 || s.m < 0)
      throw data_error("line " + std::to_string(line_no) + ": negative tile index");
    out.push_back(s);
  }
  if (out.empty()) throw data_error("no samples in rd csv");
  return out;
}

inline std::vector<RdSample> load_rd_samples_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open rd samples '" + path + "'");
  return parse_rd_samples_csv(f);
}

}  // namespace arena360
