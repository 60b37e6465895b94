#ifndef GRADFIELD_SURFACE_HPP
#define GRADFIELD_SURFACE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradfield/geometry.hpp"

namespace gradfield {

// Rectangular lattice of cells with one summary value per cell. Missing
// cells are flagged rather than stored as NaN surprises.
struct SurfaceGrid {
  double origin_s1 = 0.0;
  double origin_s2 = 0.0;
  double cell_size_s1 = 1.0;
  double cell_size_s2 = 1.0;
  int nx = 1;
  int ny = 1;
  std::vector<double> values;   // row-major, index = iy * nx + ix
  std::vector<char> missing;
  std::string statistic;

  static SurfaceGrid empty(double o1, double o2, double c1, double c2, int nx_, int ny_,
                           std::string stat = "") {
    if (nx_ < 1 || ny_ < 1)
      throw std::invalid_argument("SurfaceGrid: nx, ny must be at least 1");
    SurfaceGrid g;
    g.origin_s1 = o1;
    g.origin_s2 = o2;
    g.cell_size_s1 = c1;
    g.cell_size_s2 = c2;
    g.nx = nx_;
    g.ny = ny_;
    g.values.assign(static_cast<std::size_t>(nx_) * ny_, 0.0);
    g.missing.assign(static_cast<std::size_t>(nx_) * ny_, 0);
    g.statistic = std::move(stat);
    return g;
  }

  std::size_t size() const { return values.size(); }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }

  Location centroid(int ix, int iy) const {
    return {origin_s1 + (ix + 0.5) * cell_size_s1, origin_s2 + (iy + 0.5) * cell_size_s2};
  }
};

// Grid tiling a window exactly; used for LGCP likelihood approximation.
struct GridSpec {
  Window window;
  int nx = 1;
  int ny = 1;

  void validate() const {
    window.validate();
    if (nx < 1 || ny < 1) throw std::invalid_argument("GridSpec: nx, ny must be at least 1");
  }

  int cells() const { return nx * ny; }
  double cell_area() const { return window.area() / cells(); }
  double dx() const { return window.width() / nx; }
  double dy() const { return window.height() / ny; }

  Location centroid(int cell) const {
    const int iy = cell / nx, ix = cell % nx;
    return {window.x_min + (ix + 0.5) * dx(), window.y_min + (iy + 0.5) * dy()};
  }

  // Cell containing s; events on the top/right boundary fall into the last cell.
  int cell_of(const Location& s) const {
    if (!window.contains(s))
      throw std::invalid_argument("GridSpec: location outside window");
    int ix = static_cast<int>((s.s1 - window.x_min) / dx());
    int iy = static_cast<int>((s.s2 - window.y_min) / dy());
    ix = std::min(ix, nx - 1);
    iy = std::min(iy, ny - 1);
    return iy * nx + ix;
  }

  SurfaceGrid make_surface(std::string stat = "") const {
    return SurfaceGrid::empty(window.x_min, window.y_min, dx(), dy(), nx, ny, std::move(stat));
  }
};

enum class SummaryStatistic { median, quantile };

// Per-cell summary of sampled values; +/-inf participate as order statistics,
// non-finite NaNs and flagged-missing values are excluded with a count.
inline SurfaceGrid summarize_surface(const SurfaceGrid& layout,
                                     const std::vector<std::vector<double>>& cell_samples,
                                     SummaryStatistic stat = SummaryStatistic::median,
                                     double q = 0.5, std::size_t* excluded_count = nullptr) {
  if (cell_samples.size() != layout.size())
    throw std::invalid_argument("summarize_surface: one sample vector per cell required");
  if (stat == SummaryStatistic::quantile && !(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("summarize_surface: quantile must be in [0, 1]");
  const double prob = stat == SummaryStatistic::median ? 0.5 : q;

  SurfaceGrid out = layout;
  out.statistic = stat == SummaryStatistic::median
                      ? "posterior median"
                      : "posterior quantile " + std::to_string(prob);
  std::size_t excluded = 0;
  for (std::size_t c = 0; c < cell_samples.size(); ++c) {
    std::vector<double> vals;
    vals.reserve(cell_samples[c].size());
    for (double v : cell_samples[c]) {
      if (std::isnan(v)) {
        ++excluded;
        continue;
      }
      vals.push_back(v);
    }
    if (vals.empty()) {
      out.missing[c] = 1;
      out.values[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::sort(vals.begin(), vals.end());
    const double pos = prob * (static_cast<double>(vals.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, vals.size() - 1);
    const double w = pos - static_cast<double>(lo);
    double v;
    if (std::isinf(vals[lo]) || std::isinf(vals[hi]))
      v = w < 0.5 ? vals[lo] : vals[hi];
    else
      v = (1.0 - w) * vals[lo] + w * vals[hi];
    out.values[c] = v;
    out.missing[c] = 0;
  }
  if (excluded_count) *excluded_count = excluded;
  return out;
}

}  // namespace gradfield

#endif
