#pragma once

#include <cmath>
#include <vector>

#include "nlos/grid.hpp"
#include "nlos/rng.hpp"

namespace nlos::testutil {

/// O(N^6) direct triple-sum convolution, the independent oracle for the
/// FFT-backed convolve3d. Coordinate-aware like the library version.
inline Cube direct_convolve3d(const Cube& a, const Cube& b, const GridSpec& out_grid) {
  auto shift_of = [](const Axis& out, const Axis& aa, const Axis& bb) {
    return std::lround((out.min - aa.min - bb.min) / aa.spacing());
  };
  long sx = shift_of(out_grid.x, a.grid.x, b.grid.x);
  long sy = shift_of(out_grid.y, a.grid.y, b.grid.y);
  long sv = shift_of(out_grid.v, a.grid.v, b.grid.v);

  Cube out(out_grid);
  for (int i = 0; i < out_grid.x.count; ++i)
    for (int j = 0; j < out_grid.y.count; ++j)
      for (int k = 0; k < out_grid.v.count; ++k) {
        double acc = 0.0;
        for (int p = 0; p < a.grid.x.count; ++p) {
          long qx = i + sx - p;
          if (qx < 0 || qx >= b.grid.x.count) continue;
          for (int q = 0; q < a.grid.y.count; ++q) {
            long qy = j + sy - q;
            if (qy < 0 || qy >= b.grid.y.count) continue;
            for (int r = 0; r < a.grid.v.count; ++r) {
              long qv = k + sv - r;
              if (qv < 0 || qv >= b.grid.v.count) continue;
              acc += a.at(p, q, r) *
                     b.at(static_cast<int>(qx), static_cast<int>(qy), static_cast<int>(qv));
            }
          }
        }
        out.at(i, j, k) = acc;
      }
  return out;
}

inline Cube random_cube(const GridSpec& grid, std::uint64_t seed) {
  Cube c(grid);
  Rng rng(seed);
  for (double& v : c.values) v = rng.uniform();
  return c;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Cosine similarity of two flattened cubes.
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double na = l2(a), nb = l2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace nlos::testutil
