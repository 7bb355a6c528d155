#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "nlos/errors.hpp"
#include "nlos/grid.hpp"
#include "nlos/rng.hpp"

namespace nlos {

/// Weighted samples of a d-dimensional posterior. States are row-major K x d.
struct ParticleSet {
  int dim = 0;
  std::vector<double> states;   // K*d
  std::vector<double> weights;  // K, sums to 1 after normalization

  int count() const { return dim == 0 ? 0 : static_cast<int>(states.size()) / dim; }
  double* state(int k) { return states.data() + static_cast<std::size_t>(k) * dim; }
  const double* state(int k) const { return states.data() + static_cast<std::size_t>(k) * dim; }
};

struct FilterConfig {
  int particles = 1000;
  double radius = 0.05;  // motion-prior per-axis std (meters)
  double eta = 4.0;      // score exponent
  std::vector<double> bounds_min, bounds_max;
  std::uint64_t seed = 0;
};

/// K i.i.d. uniform draws inside the per-axis bounds, weights 1/K.
inline ParticleSet init_uniform(const FilterConfig& cfg, int dim, std::uint64_t stream_seed) {
  if (static_cast<int>(cfg.bounds_min.size()) != dim ||
      static_cast<int>(cfg.bounds_max.size()) != dim)
    throw BoundsDimensionMismatch("bounds length must equal the state dimension");
  ParticleSet p;
  p.dim = dim;
  p.states.resize(static_cast<std::size_t>(cfg.particles) * dim);
  p.weights.assign(cfg.particles, 1.0 / cfg.particles);
  Rng rng(stream_seed);
  for (int k = 0; k < cfg.particles; ++k)
    for (int d = 0; d < dim; ++d)
      p.state(k)[d] = rng.uniform(cfg.bounds_min[d], cfg.bounds_max[d]);
  return p;
}

inline ParticleSet init_uniform(const FilterConfig& cfg, int dim) {
  return init_uniform(cfg, dim, derive_seed(cfg.seed, 0, 0, 0x1712));
}

/// Gaussian random-walk propagation: state += N(0, r^2 I). Weights unchanged.
inline void propagate(ParticleSet& p, double radius, std::uint64_t stream_seed) {
  if (radius <= 0.0) return;
  Rng rng(stream_seed);
  for (double& s : p.states) s += radius * rng.normal();
}

/// Normalized dot-product score (cos similarity)^eta; zero if either vector
/// has zero norm (a hypothesis rendered fully outside the aperture dies
/// naturally rather than erroring).
inline double score_dot(std::span<const double> measurement, std::span<const double> rendered,
                        double eta) {
  if (measurement.size() != rendered.size())
    throw LengthMismatch("score_dot: vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < measurement.size(); ++i) {
    dot += measurement[i] * rendered[i];
    na += measurement[i] * measurement[i];
    nb += rendered[i] * rendered[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  cosine = std::clamp(cosine, 0.0, 1.0);
  return std::pow(cosine, eta);
}

/// Normalizes weights to sum 1; AllZeroWeights when no particle scored.
/// Caller policy on that error: skip resampling for the frame and propagate.
inline void normalize_weights(ParticleSet& p) {
  double sum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  if (sum <= 0.0) throw AllZeroWeights("all particle weights are zero");
  for (double& w : p.weights) w /= sum;
}

/// Residual resampling: particle k is copied floor(K*w_k) times
/// deterministically; the remaining slots are multinomial draws over the
/// residual weights. Output weights are all 1/K.
inline ParticleSet residual_resample(const ParticleSet& p, std::uint64_t stream_seed) {
  const int K = p.count();
  ParticleSet out;
  out.dim = p.dim;
  out.states.reserve(p.states.size());
  out.weights.assign(K, 1.0 / K);

  std::vector<double> residual(K);
  int copied = 0;
  for (int k = 0; k < K; ++k) {
    double kw = K * p.weights[k];
    int copies = static_cast<int>(std::floor(kw + 1e-9));
    residual[k] = std::max(0.0, kw - copies);
    for (int c = 0; c < copies; ++c)
      out.states.insert(out.states.end(), p.state(k), p.state(k) + p.dim);
    copied += copies;
  }

  int remaining = K - copied;
  if (remaining > 0) {
    double rsum = std::accumulate(residual.begin(), residual.end(), 0.0);
    Rng rng(stream_seed);
    std::vector<double> cdf(K);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += rsum > 0.0 ? residual[k] / rsum : 1.0 / K;
      cdf[k] = acc;
    }
    cdf[K - 1] = 1.0;
    for (int r = 0; r < remaining; ++r) {
      double u = rng.uniform();
      int k = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      out.states.insert(out.states.end(), p.state(k), p.state(k) + p.dim);
    }
  }
  return out;
}

/// Weighted mean of the states.
inline std::vector<double> mean_estimate(const ParticleSet& p) {
  std::vector<double> mean(p.dim, 0.0);
  double wsum = 0.0;
  for (int k = 0; k < p.count(); ++k) {
    for (int d = 0; d < p.dim; ++d) mean[d] += p.weights[k] * p.state(k)[d];
    wsum += p.weights[k];
  }
  if (wsum > 0.0)
    for (double& m : mean) m /= wsum;
  return mean;
}

/// Scott's-rule bandwidth from the mean marginal variance.
inline double scott_bandwidth(const ParticleSet& p) {
  std::vector<double> mean = mean_estimate(p);
  double var = 0.0;
  for (int k = 0; k < p.count(); ++k)
    for (int d = 0; d < p.dim; ++d) {
      double e = p.state(k)[d] - mean[d];
      var += p.weights[k] * e * e;
    }
  var /= p.dim;
  double sigma = std::sqrt(std::max(var, 1e-12));
  return sigma * std::pow(static_cast<double>(p.count()), -1.0 / (p.dim + 4));
}

/// Isotropic Gaussian KDE evaluated on grid nodes. For dim 2 the grid's v
/// axis is ignored (pass count 2). Density integrates to ~1 when the grid
/// covers the particles with margin.
inline std::vector<double> kde(const ParticleSet& p, double bandwidth, const GridSpec& grid) {
  const bool three_d = p.dim >= 3;
  const double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const double norm = std::pow(2.0 * M_PI * bandwidth * bandwidth,
                               -0.5 * static_cast<double>(p.dim));
  const int nz = three_d ? grid.v.count : 1;
  std::vector<double> density(static_cast<std::size_t>(grid.x.count) * grid.y.count * nz, 0.0);
  for (int i = 0; i < grid.x.count; ++i) {
    double x = grid.x.coord(i);
    for (int j = 0; j < grid.y.count; ++j) {
      double y = grid.y.coord(j);
      for (int l = 0; l < nz; ++l) {
        double z = three_d ? grid.v.coord(l) : 0.0;
        double acc = 0.0;
        for (int k = 0; k < p.count(); ++k) {
          const double* s = p.state(k);
          double d2 = (x - s[0]) * (x - s[0]) + (y - s[1]) * (y - s[1]);
          if (three_d) d2 += (z - s[2]) * (z - s[2]);
          acc += p.weights[k] * std::exp(-d2 * inv2b2);
        }
        density[(static_cast<std::size_t>(i) * grid.y.count + j) * nz + l] = norm * acc;
      }
    }
  }
  return density;
}

struct ClusterMode {
  std::vector<double> mean;
  int population = 0;
};

/// Seeded K-means over the particle states (kmeans++ init, 10 restarts,
/// 100 iterations, relative shift tolerance 1e-6). Returns cluster means
/// sorted by population descending; ties keep the lower cluster index.
inline std::vector<ClusterMode> kmeans_modes(const ParticleSet& p, int clusters,
                                             std::uint64_t stream_seed) {
  const int K = p.count();
  const int d = p.dim;
  if (K < clusters) throw TooFewParticles("fewer particles than requested clusters");

  std::vector<double> best_centers;
  std::vector<int> best_assign;
  double best_sse = std::numeric_limits<double>::infinity();

  auto dist2 = [&](const double* a, const double* b) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
  };

  for (int restart = 0; restart < 10; ++restart) {
    Rng rng(derive_seed(stream_seed, restart, 0x6b6d));
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(clusters) * d);
    // kmeans++ seeding
    int first = static_cast<int>(rng.uniform() * K);
    first = std::min(first, K - 1);
    centers.insert(centers.end(), p.state(first), p.state(first) + d);
    std::vector<double> d2(K);
    for (int c = 1; c < clusters; ++c) {
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        double m = std::numeric_limits<double>::infinity();
        for (int cc = 0; cc < c; ++cc)
          m = std::min(m, dist2(p.state(k), centers.data() + static_cast<std::size_t>(cc) * d));
        d2[k] = m;
        total += m;
      }
      int pick = 0;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
          acc += d2[k];
          if (acc >= u) {
            pick = k;
            break;
          }
        }
      } else {
        pick = std::min(static_cast<int>(rng.uniform() * K), K - 1);
      }
      centers.insert(centers.end(), p.state(pick), p.state(pick) + d);
    }

    std::vector<int> assign(K, 0);
    std::vector<double> next(static_cast<std::size_t>(clusters) * d);
    std::vector<int> pop(clusters);
    for (int iter = 0; iter < 100; ++iter) {
      for (int k = 0; k < K; ++k) {
        double m = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < clusters; ++c) {
          double dd = dist2(p.state(k), centers.data() + static_cast<std::size_t>(c) * d);
          if (dd < m) {
            m = dd;
            arg = c;
          }
        }
        assign[k] = arg;
      }
      std::fill(next.begin(), next.end(), 0.0);
      std::fill(pop.begin(), pop.end(), 0);
      for (int k = 0; k < K; ++k) {
        ++pop[assign[k]];
        double* ctr = next.data() + static_cast<std::size_t>(assign[k]) * d;
        for (int i = 0; i < d; ++i) ctr[i] += p.state(k)[i];
      }
      double shift = 0.0, scale = 0.0;
      for (int c = 0; c < clusters; ++c) {
        double* ctr = next.data() + static_cast<std::size_t>(c) * d;
        double* old = centers.data() + static_cast<std::size_t>(c) * d;
        if (pop[c] > 0)
          for (int i = 0; i < d; ++i) ctr[i] /= pop[c];
        else
          std::copy(old, old + d, ctr);
        for (int i = 0; i < d; ++i) {
          shift += (ctr[i] - old[i]) * (ctr[i] - old[i]);
          scale += ctr[i] * ctr[i];
        }
      }
      centers = next;
      if (shift <= 1e-12 * std::max(scale, 1e-300)) break;
    }

    double sse = 0.0;
    for (int k = 0; k < K; ++k)
      sse += dist2(p.state(k), centers.data() + static_cast<std::size_t>(assign[k]) * d);
    if (sse < best_sse) {
      best_sse = sse;
      best_centers = centers;
      best_assign = assign;
    }
  }

  std::vector<ClusterMode> modes(clusters);
  for (int c = 0; c < clusters; ++c) {
    modes[c].mean.assign(best_centers.begin() + static_cast<std::size_t>(c) * d,
                         best_centers.begin() + static_cast<std::size_t>(c + 1) * d);
  }
  for (int k = 0; k < K; ++k) ++modes[best_assign[k]].population;
  std::stable_sort(modes.begin(), modes.end(),
                   [](const ClusterMode& a, const ClusterMode& b) {
                     return a.population > b.population;
                   });
  return modes;
}

}  // namespace nlos
