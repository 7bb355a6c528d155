#pragma once

#include <cstdint>
#include <vector>

#include "nlos/geometry.hpp"
#include "nlos/lct.hpp"
#include "nlos/parallel.hpp"
#include "nlos/particle_filter.hpp"
#include "nlos/simulator.hpp"
#include "nlos/stir.hpp"

namespace nlos {

struct LocalizeConfig {
  FilterConfig filter;
  int workers = 1;
};

struct LocalizationResult {
  std::vector<ParticleSet> snapshots;          // per frame, d = 2
  std::vector<Eigen::Vector2d> estimates;      // camera (x, y), world meters
  std::vector<double> camera_z;                // from plane fitting, meters
  std::vector<Mat3> rotations;                 // camera-to-wall-aligned
  std::vector<int> zero_weight_frames;
};

/// Camera localization against a known static hidden object. World origin is
/// the object's (x, y) with the wall at z = 0; poses in the dataset are not
/// consulted. Per frame the LiDAR point cloud is plane-fitted (z and rotation
/// are deterministic); each particle's (x, y) hypothesis translates the
/// aligned cloud and the object is rendered in place (zero object shift).
inline LocalizationResult localize(const Dataset& dataset, const CanonicalSTIR& stir,
                                   const LocalizeConfig& cfg) {
  LocalizationResult result;
  ParticleSet particles = init_uniform(cfg.filter, 2);
  const int K = particles.count();
  const Axis v_axis = stir.grid.v;

  std::vector<double> scores(K, 0.0);
  for (std::size_t t = 0; t < dataset.frame_count(); ++t) {
    const FrameMeasurement& frame = dataset.frames[t];

    std::vector<Vec3> cloud;
    cloud.reserve(frame.point_cloud.size() / 3);
    for (std::size_t i = 0; i + 2 < frame.point_cloud.size(); i += 3)
      cloud.emplace_back(frame.point_cloud[i], frame.point_cloud[i + 1],
                         frame.point_cloud[i + 2]);
    PlaneFit fit = fit_plane(cloud);
    result.camera_z.push_back(fit.camera_height);
    // Full camera-to-world rotation estimate: the plane-fit alignment
    // composed with the no-roll facing flip (a wall is seen mirror-imaged;
    // the flip about the camera x-axis is the roll-free choice).
    Mat3 flip;
    flip << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    result.rotations.push_back(flip * fit.rotation);

    // Aligned cloud flattened onto z=0 in world orientation (y mirrored),
    // relative to the camera's unknown (x, y). A particle at c sees world
    // wall points base + c, which render_mas expresses as a shift of -c.
    std::vector<float> aligned(fit.aligned.size() * 3);
    for (std::size_t i = 0; i < fit.aligned.size(); ++i) {
      aligned[i * 3] = static_cast<float>(fit.aligned[i].x());
      aligned[i * 3 + 1] = static_cast<float>(-fit.aligned[i].y());
      aligned[i * 3 + 2] = 0.0f;
    }

    Cube meas = resample_time(frame.histogram, frame.nx, frame.ny, frame.nt,
                              dataset.camera.bin_width, v_axis, true);

    parallel_for(static_cast<std::size_t>(K), cfg.workers, [&](std::size_t k) {
      thread_local std::vector<double> rendered;
      rendered.resize(meas.values.size());
      const double* c = particles.state(static_cast<int>(k));
      render_mas_into(stir, aligned, Vec3(-c[0], -c[1], 0.0), rendered);
      scores[k] = score_dot(meas.values, rendered, cfg.filter.eta);
    });

    particles.weights = scores;
    bool resampled = true;
    try {
      normalize_weights(particles);
    } catch (const AllZeroWeights&) {
      result.zero_weight_frames.push_back(static_cast<int>(t));
      particles.weights.assign(K, 1.0 / K);
      resampled = false;
    }
    if (resampled)
      particles = residual_resample(particles, derive_seed(cfg.filter.seed, t, 0x7e5a));

    result.snapshots.push_back(particles);
    std::vector<double> mean = mean_estimate(particles);
    result.estimates.emplace_back(mean[0], mean[1]);

    propagate(particles, cfg.filter.radius, derive_seed(cfg.filter.seed, t, 0x94a9));
  }
  return result;
}

}  // namespace nlos
