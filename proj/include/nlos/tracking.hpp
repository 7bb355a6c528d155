#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nlos/lct.hpp"
#include "nlos/parallel.hpp"
#include "nlos/particle_filter.hpp"
#include "nlos/simulator.hpp"
#include "nlos/stir.hpp"

namespace nlos {

enum class Estimator { mean, kmeans_modes };

struct TrackConfig {
  FilterConfig filter;
  Estimator estimator = Estimator::mean;
  int skip = 5;             // frames excluded from output (localization stage)
  int kmeans_clusters = 4;  // joint-state clusters for the k-means estimator
  int workers = 1;
};

struct TrackResult {
  int skip = 0;
  std::vector<ParticleSet> snapshots;            // per frame, post-resample
  std::vector<std::vector<Vec3>> estimates;      // [frame - skip][object], meters
  std::vector<std::vector<double>> object_weights;  // per frame, particle-mean
  std::vector<int> zero_weight_frames;
};

namespace detail {

/// Superposition rendering for one particle: each object's rendering is
/// weighted by the dot product of its unit-normalized rendering with the
/// measurement (clamped at 0) and summed. Returns the per-object weights.
/// With one object the weight scales the rendering by a positive scalar, so
/// scores are unchanged by it.
inline std::vector<double> render_multi_into(std::span<const double> state,
                                             std::span<const float> wall_points,
                                             const std::vector<CanonicalSTIR>& stirs,
                                             std::span<const double> measurement,
                                             std::span<double> out,
                                             std::span<double> scratch) {
  const std::size_t n = out.size();
  const std::size_t m_count = stirs.size();
  std::vector<double> weights(m_count, 0.0);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t m = 0; m < m_count; ++m) {
    Vec3 position(state[3 * m], state[3 * m + 1], state[3 * m + 2]);
    std::span<double> buf = m_count == 1 ? out : scratch.subspan(0, n);
    render_mas_into(stirs[m], wall_points, stirs[m].shift_for(position), buf);
    double dot = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += buf[i] * measurement[i];
      norm2 += buf[i] * buf[i];
    }
    double w = norm2 > 0.0 ? std::max(0.0, dot / std::sqrt(norm2)) : 0.0;
    weights[m] = w;
    if (m_count > 1)
      for (std::size_t i = 0; i < n; ++i) out[i] += w * buf[i];
  }
  return weights;
}

}  // namespace detail

/// Convenience wrapper returning the superposed rendering.
inline std::vector<double> render_multi(std::span<const double> state,
                                        std::span<const float> wall_points,
                                        const std::vector<CanonicalSTIR>& stirs,
                                        std::span<const double> measurement) {
  std::size_t n = wall_points.size() / 3 * stirs.front().grid.v.count;
  std::vector<double> out(n), scratch(stirs.size() > 1 ? n : 0);
  detail::render_multi_into(state, wall_points, stirs, measurement, out, scratch);
  return out;
}

/// Particle-filter tracking of M hidden objects with known shapes (their
/// canonical STIRs) and known camera pose. State is the concatenated world
/// positions (x, y, z) of the M objects, in meters.
inline TrackResult track(const Dataset& dataset, const std::vector<CanonicalSTIR>& stirs,
                         const TrackConfig& cfg) {
  if (stirs.empty()) throw ConfigError("track: need at least one canonical STIR");
  const std::size_t m_count = stirs.size();
  for (const CanonicalSTIR& s : stirs)
    if (s.grid.v.count != stirs[0].grid.v.count ||
        std::abs(s.grid.v.min - stirs[0].grid.v.min) > 1e-12)
      throw GridMismatch("track: canonical STIRs must share the v-grid");
  if (m_count > 1 && cfg.estimator == Estimator::mean)
    throw ConfigError("track: multi-object tracking requires the kmeans_modes estimator");

  const int dim = static_cast<int>(3 * m_count);
  const Axis v_axis = stirs[0].grid.v;
  const int nv = v_axis.count;

  TrackResult result;
  result.skip = cfg.skip;
  ParticleSet particles = init_uniform(cfg.filter, dim);
  const int K = particles.count();

  std::vector<double> scores(K, 0.0);
  std::vector<std::vector<double>> weights_k(K);

  for (std::size_t t = 0; t < dataset.frame_count(); ++t) {
    const FrameMeasurement& frame = dataset.frames[t];
    Cube meas = resample_time(frame.histogram, frame.nx, frame.ny, frame.nt,
                              dataset.camera.bin_width, v_axis, true);
    const std::size_t n = meas.values.size();

    parallel_for(static_cast<std::size_t>(K), cfg.workers, [&](std::size_t k) {
      thread_local std::vector<double> rendered, scratch;
      rendered.resize(n);
      if (m_count > 1) scratch.resize(n);
      std::span<const double> state(particles.state(static_cast<int>(k)), dim);
      weights_k[k] = detail::render_multi_into(state, frame.wall_points, stirs,
                                               meas.values, rendered, scratch);
      scores[k] = score_dot(meas.values, rendered, cfg.filter.eta);
    });

    std::vector<double> mean_w(m_count, 0.0);
    for (int k = 0; k < K; ++k)
      for (std::size_t m = 0; m < m_count; ++m) mean_w[m] += weights_k[k][m] / K;
    result.object_weights.push_back(std::move(mean_w));

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
    if (static_cast<int>(t) >= cfg.skip) {
      std::vector<Vec3> est(m_count);
      if (cfg.estimator == Estimator::mean) {
        std::vector<double> mean = mean_estimate(particles);
        for (std::size_t m = 0; m < m_count; ++m)
          est[m] = Vec3(mean[3 * m], mean[3 * m + 1], mean[3 * m + 2]);
      } else {
        auto modes = kmeans_modes(particles, cfg.kmeans_clusters,
                                  derive_seed(cfg.filter.seed, t, 0x6b3a));
        const std::vector<double>& top = modes.front().mean;
        for (std::size_t m = 0; m < m_count; ++m)
          est[m] = Vec3(top[3 * m], top[3 * m + 1], top[3 * m + 2]);
      }
      result.estimates.push_back(std::move(est));
    }

    propagate(particles, cfg.filter.radius, derive_seed(cfg.filter.seed, t, 0x94a9));
  }
  return result;
}

}  // namespace nlos
