#ifndef GRADFIELD_IO_HPP
#define GRADFIELD_IO_HPP

// File formats: CSV with shortest round-trip numeric formatting, a flat
// `key = value` config format with dotted section prefixes, JSON sidecars,
// and binary P6 heatmaps.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradfield/gradient.hpp"
#include "gradfield/lgcp.hpp"
#include "gradfield/model.hpp"
#include "gradfield/surface.hpp"

namespace gradfield {

// Shortest representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  while (ptr < e && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc() || ptr != e)
    throw std::runtime_error("parse_double: cannot parse '" + s + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

}  // namespace detail

// --- Dataset / point pattern CSV ---------------------------------------

inline void write_dataset_csv(const Dataset& data, const std::string& path) {
  auto f = detail::open_out(path);
  f << "s1,s2,x,y\n";
  for (std::size_t i = 0; i < data.locations.size(); ++i) {
    f << format_double(data.locations[i].s1) << ',' << format_double(data.locations[i].s2) << ','
      << format_double(data.x[i]) << ',' << format_double(data.y[i]) << '\n';
  }
}

inline Dataset read_dataset_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  Dataset out;
  bool header = true;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      throw std::runtime_error("read_dataset_csv: expected 4 columns in " + path);
    out.locations.push_back({parse_double(fields[0]), parse_double(fields[1])});
    out.x.push_back(parse_double(fields[2]));
    out.y.push_back(parse_double(fields[3]));
  }
  return out;
}

inline void write_point_pattern_csv(const PointPattern& pattern, const std::string& path) {
  auto f = detail::open_out(path);
  f << "s1,s2\n";
  for (const auto& e : pattern.events)
    f << format_double(e.s1) << ',' << format_double(e.s2) << '\n';
}

inline std::vector<Location> read_locations_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  std::vector<Location> out;
  bool header = true;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() < 2)
      throw std::runtime_error("read_locations_csv: expected at least 2 columns in " + path);
    out.push_back({parse_double(fields[0]), parse_double(fields[1])});
  }
  return out;
}

// --- Posterior chain CSV + JSON sidecar --------------------------------

inline void write_chain_csv(const PosteriorChain& chain, const std::string& path) {
  auto f = detail::open_out(path);
  f << "iter,alpha0,beta0,beta1,sigma2_x,sigma2_y,phi_x,phi_y\n";
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    const ThetaSample& t = chain.samples[i];
    f << i << ',' << format_double(t.alpha0) << ',' << format_double(t.beta0) << ','
      << format_double(t.beta1) << ',' << format_double(t.sigma2_x) << ','
      << format_double(t.sigma2_y) << ',' << format_double(t.phi_x) << ','
      << format_double(t.phi_y) << '\n';
  }
}

inline PosteriorChain read_chain_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  PosteriorChain out;
  bool header = true;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 8)
      throw std::runtime_error("read_chain_csv: expected 8 columns in " + path);
    ThetaSample t;
    t.alpha0 = parse_double(fields[1]);
    t.beta0 = parse_double(fields[2]);
    t.beta1 = parse_double(fields[3]);
    t.sigma2_x = parse_double(fields[4]);
    t.sigma2_y = parse_double(fields[5]);
    t.phi_x = parse_double(fields[6]);
    t.phi_y = parse_double(fields[7]);
    out.samples.push_back(t);
  }
  return out;
}

inline void write_chain_sidecar(const PosteriorChain& chain, const std::string& path) {
  nlohmann::json j;
  j["seed"] = chain.config.seed;
  j["iterations"] = chain.config.iterations;
  j["burn_in"] = chain.config.burn_in;
  j["thin"] = chain.config.thin;
  j["retained"] = chain.samples.size();
  j["acceptance"] = {{"x_block", chain.acceptance[0]},
                     {"y_block", chain.acceptance[1]},
                     {"regression_block", chain.acceptance[2]}};
  auto f = detail::open_out(path);
  f << j.dump(2) << '\n';
}

inline void write_lgcp_chain_csv(const LgcpChain& chain, const std::string& path,
                                 const std::string& w_path = "", int w_thin = 1) {
  auto f = detail::open_out(path);
  f << "iter,beta0,beta1,sigma2_z\n";
  for (std::size_t i = 0; i < chain.samples.size(); ++i) {
    const LgcpSample& s = chain.samples[i];
    f << i << ',' << format_double(s.beta0) << ',' << format_double(s.beta1) << ','
      << format_double(s.sigma2_z) << '\n';
  }
  if (!w_path.empty()) {
    auto wf = detail::open_out(w_path);
    wf << "iter,cell,w\n";
    for (std::size_t i = 0; i < chain.samples.size(); i += static_cast<std::size_t>(w_thin)) {
      const Eigen::VectorXd& w = chain.samples[i].w;
      for (Eigen::Index c = 0; c < w.size(); ++c)
        wf << i << ',' << c << ',' << format_double(w(c)) << '\n';
    }
  }
}

// --- Gradient draw CSV --------------------------------------------------

inline void write_gradient_draws_csv(const CompositionResult& result, const std::string& path) {
  auto f = detail::open_out(path);
  f << "theta_index,s1,s2,y,x,dy1,dy2,dx1,dx2\n";
  for (const auto& per_theta : result.draws) {
    for (const auto& g : per_theta) {
      f << g.theta_index << ',' << format_double(g.target.s1) << ','
        << format_double(g.target.s2) << ',';
      if (g.y) f << format_double(*g.y);
      f << ',';
      if (g.x) f << format_double(*g.x);
      f << ',' << format_double(g.grad_y(0)) << ',' << format_double(g.grad_y(1)) << ','
        << format_double(g.grad_x(0)) << ',' << format_double(g.grad_x(1)) << '\n';
    }
  }
}

// --- Surface CSV --------------------------------------------------------

inline void write_surface_csv(const SurfaceGrid& grid, const std::string& path) {
  auto f = detail::open_out(path);
  f << "# grid origin=(" << format_double(grid.origin_s1) << ',' << format_double(grid.origin_s2)
    << ") cell=(" << format_double(grid.cell_size_s1) << ',' << format_double(grid.cell_size_s2)
    << ") nx=" << grid.nx << " ny=" << grid.ny << " statistic=" << grid.statistic << '\n';
  f << "s1,s2,value\n";
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Location c = grid.centroid(ix, iy);
      const std::size_t idx = grid.index(ix, iy);
      f << format_double(c.s1) << ',' << format_double(c.s2) << ',';
      if (grid.missing[idx])
        f << "NA";
      else
        f << format_double(grid.values[idx]);
      f << '\n';
    }
  }
}

inline SurfaceGrid read_surface_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  double o1 = 0, o2 = 0, c1 = 0, c2 = 0;
  int nx = 0, ny = 0;
  std::string stat;
  bool got_header_meta = false;
  std::vector<std::pair<bool, double>> vals;
  bool col_header = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      // "# grid origin=(a,b) cell=(c,d) nx=N ny=M statistic=..."
      auto grab = [&](const std::string& key) {
        const auto pos = line.find(key);
        if (pos == std::string::npos) throw std::runtime_error("read_surface_csv: bad header");
        std::string rest = line.substr(pos + key.size());
        const auto end = rest.find_first_of(",) ");
        return end == std::string::npos ? rest : rest.substr(0, end);
      };
      auto grab_pair = [&](const std::string& key, double& a, double& b) {
        const auto pos = line.find(key);
        if (pos == std::string::npos) throw std::runtime_error("read_surface_csv: bad header");
        const std::string rest = line.substr(pos + key.size());
        const auto comma = rest.find(',');
        const auto close = rest.find(')');
        if (comma == std::string::npos || close == std::string::npos || close < comma)
          throw std::runtime_error("read_surface_csv: bad header");
        a = parse_double(rest.substr(0, comma));
        b = parse_double(rest.substr(comma + 1, close - comma - 1));
      };
      grab_pair("origin=(", o1, o2);
      grab_pair("cell=(", c1, c2);
      nx = static_cast<int>(parse_double(grab("nx=")));
      ny = static_cast<int>(parse_double(grab("ny=")));
      stat = grab("statistic=");
      got_header_meta = true;
      continue;
    }
    if (col_header) {
      col_header = false;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3)
      throw std::runtime_error("read_surface_csv: expected 3 columns in " + path);
    if (fields[2] == "NA")
      vals.emplace_back(false, 0.0);
    else
      vals.emplace_back(true, parse_double(fields[2]));
  }
  if (!got_header_meta) throw std::runtime_error("read_surface_csv: missing grid header in " + path);
  SurfaceGrid g = SurfaceGrid::empty(o1, o2, c1, c2, nx, ny, stat);
  if (vals.size() != g.size())
    throw std::runtime_error("read_surface_csv: cell count mismatch in " + path);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    g.missing[i] = vals[i].first ? 0 : 1;
    g.values[i] = vals[i].first ? vals[i].second : std::numeric_limits<double>::quiet_NaN();
  }
  return g;
}

// --- Config: flat `key = value` with dotted section prefixes ------------

struct RunConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
      throw std::runtime_error("config: missing required key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& def) const {
    auto it = values.find(key);
    return it == values.end() ? def : it->second;
  }

  double get_double(const std::string& key) const { return parse_double(get(key)); }
  double get_double_or(const std::string& key, double def) const {
    return has(key) ? get_double(key) : def;
  }
  long get_int(const std::string& key) const { return static_cast<long>(get_double(key)); }
  long get_int_or(const std::string& key, long def) const {
    return has(key) ? get_int(key) : def;
  }
};

inline RunConfig read_config(const std::string& path) {
  auto f = detail::open_in(path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto h = line.find('#');
    if (h != std::string::npos) line = line.substr(0, h);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config " + path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    cfg.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

// --- Heatmaps: binary P6 portable pixmaps -------------------------------

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Diverging blue-white-red ramp for signed surfaces centered at zero.
inline Rgb diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  auto lerp = [](double a, double b, double u) {
    return static_cast<std::uint8_t>(a + (b - a) * u + 0.5);
  };
  if (t < 0.0) {
    const double u = t + 1.0;  // 0 at -1, 1 at 0
    return {lerp(33, 255, u), lerp(102, 255, u), lerp(172, 255, u)};
  }
  return {lerp(255, 178, t), lerp(255, 24, t), lerp(255, 43, t)};
}

// Sequential dark-to-yellow ramp for nonnegative surfaces.
inline Rgb sequential_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto ch = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
  };
  return {ch(68 + (253 - 68) * t), ch(1 + (231 - 1) * t), ch(84 + (37 - 84) * std::sqrt(t))};
}

enum class ColorRamp { diverging, sequential };

// Renders a surface as P6 with integer pixel scaling; missing cells in gray.
// Diverging ramps are centered at zero with symmetric limits; sequential
// ramps map [min, max] (or the fixed range when given).
inline void write_heatmap_ppm(const SurfaceGrid& grid, const std::string& path, ColorRamp ramp,
                              int scale = 8, double fixed_lo = 0.0, double fixed_hi = -1.0) {
  if (scale < 1) throw std::invalid_argument("write_heatmap_ppm: scale must be >= 1");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.missing[i] || !std::isfinite(grid.values[i])) continue;
    lo = std::min(lo, grid.values[i]);
    hi = std::max(hi, grid.values[i]);
  }
  if (fixed_hi > fixed_lo) {
    lo = fixed_lo;
    hi = fixed_hi;
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double abs_max = std::max(std::abs(lo), std::abs(hi));

  const int w = grid.nx * scale, h = grid.ny * scale;
  auto f = detail::open_out(path);
  f << "P6\n# range [" << format_double(lo) << ", " << format_double(hi) << "] statistic="
    << grid.statistic << "\n" << w << ' ' << h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int py = h - 1; py >= 0; --py) {  // top row of the image = max s2
    const int iy = py / scale;
    for (int px = 0; px < w; ++px) {
      const int ix = px / scale;
      const std::size_t idx = grid.index(ix, iy);
      Rgb c{128, 128, 128};
      if (!grid.missing[idx] && std::isfinite(grid.values[idx])) {
        const double v = grid.values[idx];
        c = ramp == ColorRamp::diverging
                ? diverging_color(abs_max > 0 ? v / abs_max : 0.0)
                : sequential_color((v - lo) / (hi - lo));
      }
      row[static_cast<std::size_t>(px) * 3] = c.r;
      row[static_cast<std::size_t>(px) * 3 + 1] = c.g;
      row[static_cast<std::size_t>(px) * 3 + 2] = c.b;
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace gradfield

#endif
