#ifndef SUBGRAD_TRAJECTORY_IO_HPP
#define SUBGRAD_TRAJECTORY_IO_HPP

// Trajectory CSV: header i,t,eps,f,x0..,v0.., one row per stored iterate,
// 17 significant digits so every double survives the round trip.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "subgrad/dynamics.hpp"

namespace subgrad {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Appends `%.17g` of x to out.
inline void append_g17(std::string& out, double x) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
  out.append(buf, static_cast<std::size_t>(len));
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t n = traj.dimension();
  std::string line = "i,t,eps,f";
  for (std::size_t c = 0; c < n; ++c) line += ",x" + std::to_string(c);
  for (std::size_t c = 0; c < n; ++c) line += ",v" + std::to_string(c);
  line += '\n';
  os << line;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    line = std::to_string(traj.index(k));
    for (double x : {traj.time(k), traj.step(k), traj.value(k)}) {
      line += ',';
      append_g17(line, x);
    }
    for (double x : traj.point(k)) {
      line += ',';
      append_g17(line, x);
    }
    for (double x : traj.velocity(k)) {
      line += ',';
      append_g17(line, x);
    }
    line += '\n';
    os << line;
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory_csv(os, traj);
  if (!os) throw IoError("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("trajectory csv line " + std::to_string(line_no) + ": bad number '" +
                  std::string(s) + "'");
  return value;
}

}  // namespace detail

/// Reads the CSV back. Schedule, policy and oracle id are not part of the
/// file; callers restore `meta` from the run manifest.
inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("trajectory csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_commas(line);
  if (header.size() < 6 || (header.size() - 4) % 2 != 0 || header[0] != "i" ||
      header[1] != "t" || header[2] != "eps" || header[3] != "f")
    throw IoError("trajectory csv: unexpected header '" + line + "'");
  const std::size_t n = (header.size() - 4) / 2;
  Trajectory traj(n);
  Vector x(n), v(n);
  std::size_t line_no = 1;
  std::size_t prev = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = detail::split_commas(line);
    if (cols.size() != header.size())
      throw IoError("trajectory csv line " + std::to_string(line_no) + ": wrong column count");
    const auto i = detail::parse_number<std::size_t>(cols[0], line_no);
    if (!traj.empty() && i <= prev)
      throw IoError("trajectory csv line " + std::to_string(line_no) + ": indices not increasing");
    prev = i;
    const double t = detail::parse_number<double>(cols[1], line_no);
    const double eps = detail::parse_number<double>(cols[2], line_no);
    const double f = detail::parse_number<double>(cols[3], line_no);
    for (std::size_t c = 0; c < n; ++c) {
      x[c] = detail::parse_number<double>(cols[4 + c], line_no);
      v[c] = detail::parse_number<double>(cols[4 + n + c], line_no);
    }
    traj.append(i, x, v, eps, t, f);
  }
  if (traj.empty()) throw IoError("trajectory csv: no rows");
  traj.meta.requested_steps = traj.last_index();
  traj.meta.stride = traj.dense() || traj.size() < 2 ? 1 : traj.index(1) - traj.index(0);
  traj.aggregates.final_time = traj.time(traj.size() - 1);
  return traj;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open trajectory '" + path + "'");
  return read_trajectory_csv(is);
}

}  // namespace subgrad

#endif  // SUBGRAD_TRAJECTORY_IO_HPP
