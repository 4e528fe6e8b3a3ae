#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pdmp/core.hpp"
#include "pdmp/geometry.hpp"

namespace pdmp::io {

/// Shortest decimal that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so a failed run never leaves a truncated output behind.
inline void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

template <std::size_t D>
std::string point_header(std::string_view name) {
  if constexpr (D == 1) {
    return std::string(name);
  } else {
    std::string out;
    for (std::size_t i = 0; i < D; ++i) {
      if (i) out += ',';
      out += std::string(name) + "_" + std::to_string(i + 1);
    }
    return out;
  }
}

template <std::size_t D>
void append_point(std::string& out, const Point<D>& p) {
  for (std::size_t i = 0; i < D; ++i) {
    if (i) out += ',';
    out += format_double(p[i]);
  }
}

}  // namespace detail

/// `# seed=<u64>` line, then `n,T,S,Z_minus,Z,forced` (one column per
/// coordinate when D > 1), one row per jump.
template <std::size_t D>
std::string trajectory_csv(const Trajectory<D>& traj) {
  std::string out = "# seed=" + std::to_string(traj.seed) + "\n";
  if (traj.stream != 0) out += "# stream=" + std::to_string(traj.stream) + "\n";
  out += "# x0=";
  detail::append_point<D>(out, traj.x0);
  out += "\n";
  out += "n,T,S," + detail::point_header<D>("Z_minus") + "," + detail::point_header<D>("Z") + ",forced\n";
  for (const auto& r : traj.records) {
    out += std::to_string(r.index);
    out += ',';
    out += format_double(r.time);
    out += ',';
    out += format_double(r.interval);
    out += ',';
    detail::append_point<D>(out, r.pre);
    out += ',';
    detail::append_point<D>(out, r.post);
    out += r.forced ? ",1\n" : ",0\n";
  }
  return out;
}

template <std::size_t D>
Trajectory<D> parse_trajectory_csv(std::string_view text) {
  Trajectory<D> traj;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      line.remove_prefix(1);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = line.substr(0, eq);
      const auto value = line.substr(eq + 1);
      if (key == "seed") traj.seed = std::stoull(std::string(value));
      if (key == "stream") traj.stream = std::stoull(std::string(value));
      if (key == "x0") {
        const auto parts = split(value, ',');
        if (parts.size() != D) throw std::invalid_argument("x0 has the wrong dimension");
        for (std::size_t i = 0; i < D; ++i) traj.x0[i] = parse_double(parts[i]);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 4 + 2 * D) throw std::invalid_argument("trajectory row has the wrong column count");
    JumpRecord<D> r;
    r.index = std::stoull(std::string(cells[0]));
    r.time = parse_double(cells[1]);
    r.interval = parse_double(cells[2]);
    for (std::size_t i = 0; i < D; ++i) r.pre[i] = parse_double(cells[3 + i]);
    for (std::size_t i = 0; i < D; ++i) r.post[i] = parse_double(cells[3 + D + i]);
    r.forced = cells[3 + 2 * D] == "1";
    traj.records.push_back(r);
  }
  return traj;
}

struct EstimateRow {
  double x;
  double y;
  double q_hat;
  double p_hat;
  double h_hat;
  std::size_t n;
};

inline std::string estimates_csv(std::span<const EstimateRow> rows) {
  std::string out = "x,y,q_hat,p_hat,h_hat,n\n";
  for (const auto& r : rows) {
    out += format_double(r.x) + ',' + format_double(r.y) + ',' + format_double(r.q_hat) + ',' +
           format_double(r.p_hat) + ',' + format_double(r.h_hat) + ',' + std::to_string(r.n) + '\n';
  }
  return out;
}

inline std::string curve_csv(double x, std::size_t n, std::span<const double> ys, std::span<const double> q_hats) {
  if (ys.size() != q_hats.size()) throw std::invalid_argument("curve: grid and values differ in length");
  std::string out = "# x=" + format_double(x) + " n=" + std::to_string(n) + "\ny,q_hat\n";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    out += format_double(ys[i]) + ',' + format_double(q_hats[i]) + '\n';
  }
  return out;
}

/// Oracle dump of z -> r(y, z).
inline std::string r_density_csv(double y, double horizon, double tail_bound, std::span<const double> zs,
                                 std::span<const double> rs) {
  if (zs.size() != rs.size()) throw std::invalid_argument("r dump: grid and values differ in length");
  std::string out = "# y=" + format_double(y) + " H=" + format_double(horizon) +
                    " tail_bound=" + format_double(tail_bound) + "\nz,r\n";
  for (std::size_t i = 0; i < zs.size(); ++i) out += format_double(zs[i]) + ',' + format_double(rs[i]) + '\n';
  return out;
}

}  // namespace pdmp::io
