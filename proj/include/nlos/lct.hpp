#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <span>
#include <vector>

#include "nlos/geometry.hpp"
#include "nlos/grid.hpp"

namespace nlos {

/// Resamples a per-pixel time histogram onto a uniform v-grid, v = (c tau/2)^2,
/// scaling amplitudes by v^{3/2}. Spatial axes of the result are pixel indices.
/// Histogram bin k holds the value at time k*bin_width; sampling is linear.
/// If the target extent maps beyond the recorded time range, samples read 0
/// when `allow_out_of_range` is set and ExtentMismatch is thrown otherwise.
inline Cube resample_time(std::span<const float> histogram, int nx, int ny, int nt,
                          double bin_width, const Axis& v_axis,
                          bool allow_out_of_range = false) {
  if (static_cast<std::size_t>(nx) * ny * nt != histogram.size() || nt < 2)
    throw ShapeMismatch("histogram size does not match nx*ny*nt");
  const double t_max = (nt - 1) * bin_width;
  if (!allow_out_of_range) {
    double tau_hi = 2.0 * std::sqrt(std::max(0.0, v_axis.max)) / kSpeedOfLight;
    if (v_axis.min < -1e-12 || tau_hi > t_max * (1.0 + 1e-9))
      throw ExtentMismatch("target v-extent maps outside the recorded time range");
  }

  GridSpec grid{{0.0, static_cast<double>(nx - 1), nx},
                {0.0, static_cast<double>(ny - 1), ny},
                v_axis};
  Cube out(grid);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const float* col = histogram.data() + (static_cast<std::size_t>(i) * ny + j) * nt;
      double* dst = out.column(i, j);
      for (int k = 0; k < v_axis.count; ++k) {
        double v = v_axis.coord(k);
        if (v < 0.0) continue;
        double tb = 2.0 * std::sqrt(v) / kSpeedOfLight / bin_width;
        if (tb < 0.0 || tb > nt - 1) continue;
        int b0 = std::min(static_cast<int>(tb), nt - 2);
        double f = tb - b0;
        double sample = (1.0 - f) * col[b0] + f * col[b0 + 1];
        dst[k] = sample * v * std::sqrt(v);
      }
    }
  }
  return out;
}

/// Resamples an albedo volume along depth onto a uniform u-grid, u = z^2,
/// scaling by 1/(2 sqrt(u)). Spatial axes are carried over unchanged.
inline Cube resample_depth(const AlbedoVolume& volume, const Axis& u_axis) {
  if (u_axis.min <= 0.0)
    throw SingularDepth("u-grid includes u <= 0");
  if (volume.grid.v.min <= 0.0)
    throw SingularDepth("volume must exclude the z = 0 slice");

  GridSpec grid{volume.grid.x, volume.grid.y, u_axis};
  Cube out(grid);
  const Axis& z = volume.grid.v;
  for (int i = 0; i < grid.x.count; ++i) {
    for (int j = 0; j < grid.y.count; ++j) {
      const double* src = volume.column(i, j);
      double* dst = out.column(i, j);
      for (int k = 0; k < u_axis.count; ++k) {
        double u = u_axis.coord(k);
        double fz = z.frac_index(std::sqrt(u));
        if (fz < 0.0 || fz > z.count - 1) continue;
        int z0 = std::min(static_cast<int>(fz), z.count - 2);
        double f = fz - z0;
        double rho = (1.0 - f) * src[z0] + f * src[z0 + 1];
        dst[k] = rho / (2.0 * std::sqrt(u));
      }
    }
  }
  return out;
}

/// Parabola point-spread function h(x,y,v) = delta(x^2 + y^2 - v) rasterized
/// on `grid`: cells within thickness*dv/2 of the parabola are set and each
/// (x,y) column is normalized to unit sum. Parts of the parabola outside the
/// v-extent are silently cropped.
inline Cube psf_kernel(const GridSpec& grid, int thickness = 1) {
  grid.require_valid("psf_kernel");
  Cube kernel(grid);
  const double dv = grid.v.spacing();
  const double half = thickness * dv / 2.0;
  for (int i = 0; i < grid.x.count; ++i) {
    double x = grid.x.coord(i);
    for (int j = 0; j < grid.y.count; ++j) {
      double y = grid.y.coord(j);
      double target = x * x + y * y;
      double* col = kernel.column(i, j);
      int k_lo = std::max(0, static_cast<int>(std::ceil(grid.v.frac_index(target - half) - 1e-12)));
      int k_hi = std::min(grid.v.count - 1,
                          static_cast<int>(std::floor(grid.v.frac_index(target + half) + 1e-12)));
      double sum = 0.0;
      for (int k = k_lo; k <= k_hi; ++k) {
        if (std::abs(grid.v.coord(k) - target) <= half + 1e-12) {
          col[k] = 1.0;
          sum += 1.0;
        }
      }
      if (sum > 0.0)
        for (int k = k_lo; k <= k_hi; ++k) col[k] /= sum;
    }
  }
  return kernel;
}

namespace detail {

inline int next_fast_size(int n) {
  for (;; ++n) {
    int m = n;
    while (m % 2 == 0) m /= 2;
    while (m % 3 == 0) m /= 3;
    while (m % 5 == 0) m /= 5;
    if (m == 1) return n;
  }
}

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Linear 3D convolution of `a` with kernel `b` (coordinate-aware: the
/// kernel's stored axis origins locate it relative to coordinate zero),
/// evaluated at the nodes of `out_grid`. All grids must share per-axis
/// spacing and sit on a common lattice.
inline Cube convolve3d_on(const Cube& a, const Cube& b, const GridSpec& out_grid) {
  const Axis* aa[3] = {&a.grid.x, &a.grid.y, &a.grid.v};
  const Axis* bb[3] = {&b.grid.x, &b.grid.y, &b.grid.v};
  const Axis* oo[3] = {&out_grid.x, &out_grid.y, &out_grid.v};
  long shift[3];
  int na[3], nb[3], no[3], pad[3];
  for (int d = 0; d < 3; ++d) {
    if (!spacing_compatible(*aa[d], *bb[d]) || !spacing_compatible(*aa[d], *oo[d]))
      throw GridMismatch("convolve3d: unequal grid spacing");
    double s = aa[d]->spacing();
    // out[j] = conv[j + shift] with conv[0] at coordinate a.min + b.min.
    double q = (oo[d]->min - aa[d]->min - bb[d]->min) / s;
    shift[d] = std::lround(q);
    if (std::abs(q - shift[d]) > 1e-6)
      throw GridMismatch("convolve3d: grids do not share a lattice");
    na[d] = aa[d]->count;
    nb[d] = bb[d]->count;
    no[d] = oo[d]->count;
    pad[d] = detail::next_fast_size(na[d] + nb[d] - 1);
  }

  const std::size_t real_n = static_cast<std::size_t>(pad[0]) * pad[1] * pad[2];
  const std::size_t cplx_n = static_cast<std::size_t>(pad[0]) * pad[1] * (pad[2] / 2 + 1);
  std::vector<double> ra(real_n, 0.0), rb(real_n, 0.0);
  std::vector<std::complex<double>> ca(cplx_n), cb(cplx_n);

  auto scatter = [&](const Cube& src, std::vector<double>& dst, const int* n) {
    for (int i = 0; i < n[0]; ++i)
      for (int j = 0; j < n[1]; ++j) {
        const double* col = src.column(i, j);
        double* out = dst.data() + (static_cast<std::size_t>(i) * pad[1] + j) * pad[2];
        std::copy(col, col + n[2], out);
      }
  };
  scatter(a, ra, na);
  scatter(b, rb, nb);

  fftw_plan pf_a, pf_b, pi;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    pf_a = fftw_plan_dft_r2c_3d(pad[0], pad[1], pad[2], ra.data(),
                                reinterpret_cast<fftw_complex*>(ca.data()), FFTW_ESTIMATE);
    pf_b = fftw_plan_dft_r2c_3d(pad[0], pad[1], pad[2], rb.data(),
                                reinterpret_cast<fftw_complex*>(cb.data()), FFTW_ESTIMATE);
  }
  fftw_execute(pf_a);
  fftw_execute(pf_b);
  for (std::size_t i = 0; i < cplx_n; ++i) ca[i] *= cb[i];
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    pi = fftw_plan_dft_c2r_3d(pad[0], pad[1], pad[2],
                              reinterpret_cast<fftw_complex*>(ca.data()), ra.data(),
                              FFTW_ESTIMATE);
  }
  fftw_execute(pi);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(pf_a);
    fftw_destroy_plan(pf_b);
    fftw_destroy_plan(pi);
  }

  const double scale = 1.0 / static_cast<double>(real_n);
  Cube out(out_grid);
  for (int i = 0; i < no[0]; ++i) {
    long si = i + shift[0];
    if (si < 0 || si >= na[0] + nb[0] - 1) continue;
    for (int j = 0; j < no[1]; ++j) {
      long sj = j + shift[1];
      if (sj < 0 || sj >= na[1] + nb[1] - 1) continue;
      const double* row = ra.data() + (static_cast<std::size_t>(si) * pad[1] + sj) * pad[2];
      double* dst = out.column(i, j);
      for (int k = 0; k < no[2]; ++k) {
        long sk = k + shift[2];
        if (sk < 0 || sk >= na[2] + nb[2] - 1) continue;
        dst[k] = row[sk] * scale;
      }
    }
  }
  return out;
}

/// Linear convolution cropped to a's grid.
inline Cube convolve3d(const Cube& a, const Cube& b) { return convolve3d_on(a, b, a.grid); }

/// Full LCT forward model: depth-resample the albedo volume onto the v-grid
/// lattice and convolve with the parabola PSF. The volume's spatial axes must
/// match the target grid's.
inline Cube lct_forward(const AlbedoVolume& volume, const GridSpec& grid) {
  auto same_axis = [](const Axis& p, const Axis& q) {
    return p.count == q.count && std::abs(p.min - q.min) < 1e-12 &&
           std::abs(p.max - q.max) < 1e-12;
  };
  if (!same_axis(volume.grid.x, grid.x) || !same_axis(volume.grid.y, grid.y))
    throw GridMismatch("lct_forward: volume spatial axes must match the target grid");

  const double dv = grid.v.spacing();
  const Axis& z = volume.grid.v;
  double u_lo = std::max(z.min * z.min, std::nextafter(0.0, 1.0));
  double u_hi = z.max * z.max;
  int k_lo = std::max(static_cast<int>(std::floor(grid.v.frac_index(u_lo))),
                      grid.v.min > 0.0 ? 0 : static_cast<int>(std::ceil(grid.v.frac_index(0.0) + 0.5)));
  int k_hi = std::min(static_cast<int>(std::ceil(grid.v.frac_index(u_hi))), grid.v.count - 1);
  if (k_hi <= k_lo) k_hi = std::min(k_lo + 1, grid.v.count - 1);
  if (k_hi <= k_lo) k_lo = k_hi - 1;
  Axis u_axis{grid.v.coord(k_lo), grid.v.coord(k_hi), k_hi - k_lo + 1};

  Cube q = resample_depth(volume, u_axis);

  double v_arg_max = grid.v.max - u_axis.min;
  const double dx = grid.x.spacing(), dy = grid.y.spacing();
  int mx = std::min(grid.x.count - 1,
                    static_cast<int>(std::ceil(std::sqrt(std::max(v_arg_max, 0.0)) / dx)) + 1);
  int my = std::min(grid.y.count - 1,
                    static_cast<int>(std::ceil(std::sqrt(std::max(v_arg_max, 0.0)) / dy)) + 1);
  int nv_k = std::max(2, static_cast<int>(std::floor(v_arg_max / dv)) + 1);
  GridSpec kgrid{{-mx * dx, mx * dx, 2 * mx + 1},
                 {-my * dy, my * dy, 2 * my + 1},
                 {0.0, (nv_k - 1) * dv, nv_k}};
  Cube h = psf_kernel(kgrid);

  return convolve3d_on(q, h, grid);
}

}  // namespace nlos
