#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "nlos/geometry.hpp"
#include "nlos/grid.hpp"
#include "nlos/lct.hpp"
#include "nlos/parallel.hpp"
#include "nlos/simulator.hpp"

namespace nlos {

/// LCT columns tagged with their world wall points, fused across frames.
struct SampleCloud {
  Axis v_axis;
  std::vector<Vec3> points;     // on z = 0
  std::vector<double> columns;  // size() * v_axis.count, contiguous per sample

  std::size_t size() const { return points.size(); }
  const double* column(std::size_t i) const { return columns.data() + i * v_axis.count; }
};

/// Accumulates LCT-resampled columns across frames in world coordinates.
/// Wall locations within half of `cell_size` of each other are averaged,
/// which is the SNR-fusion step for revisited spots.
inline SampleCloud accumulate(const Dataset& dataset, const Axis& v_axis,
                              double cell_size) {
  SampleCloud cloud;
  cloud.v_axis = v_axis;
  const double lattice = cell_size / 2.0;
  std::map<std::pair<long, long>, std::size_t> keys;
  std::vector<int> hits;

  for (const FrameMeasurement& frame : dataset.frames) {
    Cube meas = resample_time(frame.histogram, frame.nx, frame.ny, frame.nt,
                              dataset.camera.bin_width, v_axis, true);
    for (int px = 0; px < frame.nx * frame.ny; ++px) {
      Vec3 w(frame.wall_points[px * 3], frame.wall_points[px * 3 + 1], 0.0);
      std::pair<long, long> key{std::lround(w.x() / lattice), std::lround(w.y() / lattice)};
      const double* col = meas.values.data() + static_cast<std::size_t>(px) * v_axis.count;
      auto it = keys.find(key);
      if (it == keys.end()) {
        keys.emplace(key, cloud.points.size());
        cloud.points.push_back(w);
        cloud.columns.insert(cloud.columns.end(), col, col + v_axis.count);
        hits.push_back(1);
      } else {
        std::size_t s = it->second;
        int n = ++hits[s];
        cloud.points[s] += (w - cloud.points[s]) / n;
        double* dst = cloud.columns.data() + s * v_axis.count;
        for (int k = 0; k < v_axis.count; ++k) dst[k] += (col[k] - dst[k]) / n;
      }
    }
  }
  return cloud;
}

/// Filtered backprojection: every voxel gathers, over samples, the column
/// value at v = r^2 (linear interpolation) weighted by r^2 or r^4 falloff
/// compensation, then a Laplacian sharpening filter is applied along z and
/// the result clamped at zero.
inline AlbedoVolume backproject(const SampleCloud& cloud, const GridSpec& volume_grid,
                                Falloff falloff, int workers = 1) {
  if (cloud.size() == 0) throw EmptyCloud("backproject: no samples");
  volume_grid.require_valid("backproject");

  AlbedoVolume smeared(volume_grid);
  const int nz = volume_grid.v.count;
  const double expo = falloff_exponent(falloff);
  const Axis& va = cloud.v_axis;

  parallel_for(static_cast<std::size_t>(volume_grid.x.count), workers, [&](std::size_t ixs) {
    int ix = static_cast<int>(ixs);
    double x = volume_grid.x.coord(ix);
    for (int iy = 0; iy < volume_grid.y.count; ++iy) {
      double y = volume_grid.y.coord(iy);
      double* col = smeared.column(ix, iy);
      for (int iz = 0; iz < nz; ++iz) {
        double z = volume_grid.v.coord(iz);
        double acc = 0.0;
        for (std::size_t s = 0; s < cloud.size(); ++s) {
          double dx = x - cloud.points[s].x();
          double dy = y - cloud.points[s].y();
          double r2 = dx * dx + dy * dy + z * z;
          double fk = va.frac_index(r2);
          if (fk < 0.0 || fk > va.count - 1) continue;
          int k0 = std::min(static_cast<int>(fk), va.count - 2);
          double f = fk - k0;
          const double* sc = cloud.column(s);
          double val = (1.0 - f) * sc[k0] + f * sc[k0 + 1];
          acc += val * std::pow(r2, expo / 2.0);
        }
        col[iz] = acc;
      }
    }
  });

  // Laplacian sharpening along z (negated second difference), clamped at 0.
  AlbedoVolume out(volume_grid);
  for (int ix = 0; ix < volume_grid.x.count; ++ix)
    for (int iy = 0; iy < volume_grid.y.count; ++iy) {
      const double* src = smeared.column(ix, iy);
      double* dst = out.column(ix, iy);
      for (int iz = 0; iz < nz; ++iz) {
        double lo = src[std::max(0, iz - 1)];
        double hi = src[std::min(nz - 1, iz + 1)];
        dst[iz] = std::max(0.0, 2.0 * src[iz] - lo - hi);
      }
    }
  return out;
}

/// Per-frame backprojection-argmax baseline tracker. Frames whose columns are
/// all zero are surfaced as skipped markers (nullopt). Ties in the argmax
/// resolve to the lowest linear index.
inline std::vector<std::optional<Vec3>> baseline_argmax_track(const Dataset& dataset,
                                                              const GridSpec& volume_grid,
                                                              const Axis& v_axis,
                                                              int workers = 1) {
  std::vector<std::optional<Vec3>> trajectory;
  trajectory.reserve(dataset.frame_count());
  for (std::size_t t = 0; t < dataset.frame_count(); ++t) {
    Dataset single;
    single.camera = dataset.camera;
    single.frames.push_back(dataset.frames[t]);
    SampleCloud cloud = accumulate(single, v_axis, volume_grid.x.spacing());
    AlbedoVolume vol = backproject(cloud, volume_grid, dataset.camera.falloff, workers);
    std::size_t best = 0;
    double best_val = 0.0;
    for (std::size_t i = 0; i < vol.values.size(); ++i) {
      if (vol.values[i] > best_val) {
        best_val = vol.values[i];
        best = i;
      }
    }
    if (best_val <= 0.0) {
      trajectory.push_back(std::nullopt);
      continue;
    }
    int nv = volume_grid.v.count, ny = volume_grid.y.count;
    int iz = static_cast<int>(best % nv);
    int iy = static_cast<int>((best / nv) % ny);
    int ix = static_cast<int>(best / nv / ny);
    trajectory.push_back(Vec3(volume_grid.x.coord(ix), volume_grid.y.coord(iy),
                              volume_grid.v.coord(iz)));
  }
  return trajectory;
}

}  // namespace nlos
