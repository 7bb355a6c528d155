#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nlos/errors.hpp"

namespace nlos {

/// One node-centered grid axis: `count` nodes from min to max inclusive.
struct Axis {
  double min = 0.0;
  double max = 1.0;
  int count = 2;

  double spacing() const { return (max - min) / (count - 1); }
  double coord(int i) const { return min + i * spacing(); }
  /// Fractional node index of a coordinate (not clamped).
  double frac_index(double x) const { return (x - min) / spacing(); }
  bool valid() const { return count >= 2 && min < max; }
};

inline bool spacing_compatible(const Axis& a, const Axis& b, double tol = 1e-9) {
  return std::abs(a.spacing() - b.spacing()) <= tol * std::abs(a.spacing());
}

/// Grid over (x, y, v). The third axis is v = (c tau/2)^2 in m^2 for LCT
/// cubes and plain z in meters for albedo volumes.
struct GridSpec {
  Axis x, y, v;

  std::size_t cells() const {
    return static_cast<std::size_t>(x.count) * y.count * v.count;
  }
  bool valid() const { return x.valid() && y.valid() && v.valid(); }

  void require_valid(const char* who) const {
    if (!valid()) throw GridMismatch(std::string(who) + ": invalid grid extents/counts");
  }
};

/// Dense cube of values on a GridSpec. Layout is (ix*Ny + iy)*Nv + iv so a
/// per-(x,y) column over v is contiguous.
struct Cube {
  GridSpec grid;
  std::vector<double> values;

  Cube() = default;
  explicit Cube(const GridSpec& g) : grid(g), values(g.cells(), 0.0) {}

  std::size_t index(int ix, int iy, int iv) const {
    return (static_cast<std::size_t>(ix) * grid.y.count + iy) * grid.v.count + iv;
  }
  double& at(int ix, int iy, int iv) { return values[index(ix, iy, iv)]; }
  double at(int ix, int iy, int iv) const { return values[index(ix, iy, iv)]; }

  double* column(int ix, int iy) { return values.data() + index(ix, iy, 0); }
  const double* column(int ix, int iy) const { return values.data() + index(ix, iy, 0); }

  double max_value() const {
    double m = 0.0;
    for (double x : values) m = std::max(m, x);
    return m;
  }
};

using LctCube = Cube;      // (x, y, v) with v in m^2
using AlbedoVolume = Cube; // (x, y, z) with z in meters stored on the v axis

}  // namespace nlos
