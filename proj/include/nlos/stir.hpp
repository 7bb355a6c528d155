#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "nlos/geometry.hpp"
#include "nlos/grid.hpp"
#include "nlos/parallel.hpp"
#include "nlos/simulator.hpp"

namespace nlos {

/// Precomputed impulse response of one object in LCT space, anchored with the
/// object centroid at depth `reference_depth`. Immutable after precompute and
/// safe to share read-only across scoring threads.
struct CanonicalSTIR {
  GridSpec grid;               // x,y relative to the object's lateral centroid
  std::vector<double> values;  // (ix*Ny + iy)*Nv + iv
  double reference_depth = 1.0;  // meters; centroid sits at v = reference_depth^2
  double pulse_sigma_v = 0.0;    // Gaussian blur std along v (m^2)
  bool footprint_overflow = false;

  double reference_v() const { return reference_depth * reference_depth; }

  const double* column(int ix, int iy) const {
    return values.data() + (static_cast<std::size_t>(ix) * grid.y.count + iy) * grid.v.count;
  }
  double* column(int ix, int iy) {
    return values.data() + (static_cast<std::size_t>(ix) * grid.y.count + iy) * grid.v.count;
  }

  /// World-position shift for an object centroid at `position`:
  /// (dx, dy, dv) with dv = z^2 - reference_v.
  Vec3 shift_for(const Vec3& position) const {
    return {position.x(), position.y(), position.z() * position.z() - reference_v()};
  }

  /// Depth (meters) encoded by a dv shift.
  double depth_of_shift(double dv) const { return std::sqrt(reference_v() + dv); }

  /// Copy whose anchor is translated by `delta` = (dx, dy, dv): rendering the
  /// copy with shift s equals rendering the original with shift s + delta.
  CanonicalSTIR reanchored(const Vec3& delta) const {
    CanonicalSTIR out = *this;
    out.grid.x.min += delta.x();
    out.grid.x.max += delta.x();
    out.grid.y.min += delta.y();
    out.grid.y.max += delta.y();
    out.grid.v.min += delta.z();
    out.grid.v.max += delta.z();
    return out;
  }
};

/// Rasterizes the object's STIR as a sum of parabolas: point p contributes
/// weight rho_p/(2 sqrt(v_p)) at v = (x-p_x)^2 + (y-p_y)^2 + v_p with
/// v_p = (p_z + reference_depth)^2, split over the two adjacent v-bins. The
/// radiometric 1/(2 sqrt(v_p)) factor is frozen at the canonical position.
/// Columns are then blurred along v with sigma_v = pulse_sigma*c (the z=1
/// narrow-pulse convention).
inline CanonicalSTIR precompute_canonical_stir(const ObjectModel& object,
                                               const GridSpec& grid, double pulse_sigma,
                                               double reference_depth = 1.0,
                                               int workers = 1) {
  grid.require_valid("precompute_canonical_stir");
  CanonicalSTIR stir;
  stir.grid = grid;
  stir.reference_depth = reference_depth;
  stir.pulse_sigma_v = pulse_sigma * kSpeedOfLight;
  stir.values.assign(grid.cells(), 0.0);

  const int nv = grid.v.count;
  const double dv = grid.v.spacing();
  std::vector<double> blur;
  int blur_half = 0;
  if (stir.pulse_sigma_v > 0.0) {
    blur_half = std::max(1, static_cast<int>(std::ceil(4.0 * stir.pulse_sigma_v / dv)));
    blur.resize(2 * blur_half + 1);
    double sum = 0.0;
    for (int k = -blur_half; k <= blur_half; ++k) {
      double g = std::exp(-0.5 * (k * dv) * (k * dv) /
                          (stir.pulse_sigma_v * stir.pulse_sigma_v));
      blur[k + blur_half] = g;
      sum += g;
    }
    for (double& g : blur) g /= sum;
  }

  std::vector<char> overflow(grid.x.count, 0);
  parallel_for(static_cast<std::size_t>(grid.x.count), workers, [&](std::size_t ix) {
    std::vector<double> raw(nv, 0.0);
    double x = grid.x.coord(static_cast<int>(ix));
    for (int iy = 0; iy < grid.y.count; ++iy) {
      double y = grid.y.coord(iy);
      std::fill(raw.begin(), raw.end(), 0.0);
      for (std::size_t q = 0; q < object.points.size(); ++q) {
        const Vec3& p = object.points[q];
        double vp = (p.z() + reference_depth) * (p.z() + reference_depth);
        double dx = x - p.x();
        double dy = y - p.y();
        double v = dx * dx + dy * dy + vp;
        double weight = object.albedo[q] / (2.0 * std::sqrt(vp));
        double fk = grid.v.frac_index(v);
        if (fk < 0.0 || fk > nv - 1) {
          overflow[ix] = 1;
          continue;
        }
        int k0 = std::min(static_cast<int>(fk), nv - 2);
        double f = fk - k0;
        raw[k0] += weight * (1.0 - f);
        raw[k0 + 1] += weight * f;
      }
      double* col = stir.column(static_cast<int>(ix), iy);
      if (blur.empty()) {
        std::copy(raw.begin(), raw.end(), col);
      } else {
        for (int k = 0; k < nv; ++k) {
          double acc = 0.0;
          int lo = std::max(0, k - blur_half);
          int hi = std::min(nv - 1, k + blur_half);
          for (int s = lo; s <= hi; ++s) acc += raw[s] * blur[k - s + blur_half];
          col[k] = acc;
        }
      }
    }
  });
  stir.footprint_overflow =
      std::any_of(overflow.begin(), overflow.end(), [](char c) { return c != 0; });
  return stir;
}

namespace detail {

// Snap tolerance covers float32 quantization of stored wall coordinates so
// node-exact reads stay bit-exact.
inline double snap_index(double q) {
  double r = std::round(q);
  return std::abs(q - r) < 1e-5 ? r : q;
}

}  // namespace detail

/// Renders a MAS measurement by indexing: for every wall point the STIR is
/// read at (wall - (dx, dy)) with bilinear interpolation in (x, y) and the
/// column at v - dv_shift with linear interpolation in v. Coordinates outside
/// the stored extent read as zero. Output column k corresponds to node k of
/// `out_v` (the measurement v-axis); `out` holds n_pixels * out_v.count.
inline void render_mas_into(const CanonicalSTIR& stir, std::span<const float> wall_points,
                            const Vec3& shift, std::span<double> out, const Axis& out_v) {
  const std::size_t n_pix = wall_points.size() / 3;
  const int nx = stir.grid.x.count, ny = stir.grid.y.count, nv = stir.grid.v.count;
  const int nv_out = out_v.count;
  const double dv = stir.grid.v.spacing();
  if (!spacing_compatible(out_v, stir.grid.v))
    throw GridMismatch("render_mas: output v-axis spacing must match the STIR");

  thread_local std::vector<double> tmp;
  tmp.assign(nv, 0.0);

  double s = detail::snap_index((shift.z() + stir.grid.v.min - out_v.min) / dv);
  int k_shift = static_cast<int>(std::floor(s));
  double fv = s - k_shift;

  for (std::size_t px = 0; px < n_pix; ++px) {
    double* dst = out.data() + px * nv_out;
    std::fill(dst, dst + nv_out, 0.0);

    double gx = detail::snap_index(
        stir.grid.x.frac_index(static_cast<double>(wall_points[px * 3]) - shift.x()));
    double gy = detail::snap_index(
        stir.grid.y.frac_index(static_cast<double>(wall_points[px * 3 + 1]) - shift.y()));
    if (gx <= -1.0 || gx >= nx || gy <= -1.0 || gy >= ny) continue;

    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    double fx = gx - ix;
    double fy = gy - iy;

    const double w[4] = {(1.0 - fx) * (1.0 - fy), (1.0 - fx) * fy, fx * (1.0 - fy), fx * fy};
    const int cx[4] = {ix, ix, ix + 1, ix + 1};
    const int cy[4] = {iy, iy + 1, iy, iy + 1};

    bool first = true;
    for (int c = 0; c < 4; ++c) {
      if (w[c] == 0.0 || cx[c] < 0 || cx[c] >= nx || cy[c] < 0 || cy[c] >= ny) continue;
      const double* col = stir.column(cx[c], cy[c]);
      if (first && w[c] == 1.0) {
        std::copy(col, col + nv, tmp.data());
        first = false;
        continue;
      }
      if (first) {
        for (int k = 0; k < nv; ++k) tmp[k] = w[c] * col[k];
        first = false;
      } else {
        for (int k = 0; k < nv; ++k) tmp[k] += w[c] * col[k];
      }
    }
    if (first) continue;  // all corners outside

    // Column shift: dst[k] = tmp interpolated at index k - s.
    if (fv == 0.0) {
      int lo = std::max(0, k_shift);
      int hi = std::min(nv_out, nv + k_shift);
      for (int k = lo; k < hi; ++k) dst[k] = tmp[k - k_shift];
    } else {
      for (int k = 0; k < nv_out; ++k) {
        int q0 = k - k_shift - 1;  // tmp index of the lower neighbor
        double acc = 0.0;
        if (q0 >= 0 && q0 < nv) acc += fv * tmp[q0];
        if (q0 + 1 >= 0 && q0 + 1 < nv) acc += (1.0 - fv) * tmp[q0 + 1];
        dst[k] = acc;
      }
    }
  }
}

inline void render_mas_into(const CanonicalSTIR& stir, std::span<const float> wall_points,
                            const Vec3& shift, std::span<double> out) {
  render_mas_into(stir, wall_points, shift, out, stir.grid.v);
}

inline std::vector<double> render_mas(const CanonicalSTIR& stir,
                                      std::span<const float> wall_points, const Vec3& shift,
                                      const Axis& out_v) {
  std::vector<double> out(wall_points.size() / 3 * out_v.count, 0.0);
  render_mas_into(stir, wall_points, shift, out, out_v);
  return out;
}

inline std::vector<double> render_mas(const CanonicalSTIR& stir,
                                      std::span<const float> wall_points, const Vec3& shift) {
  return render_mas(stir, wall_points, shift, stir.grid.v);
}

}  // namespace nlos
