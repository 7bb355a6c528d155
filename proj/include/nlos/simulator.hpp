#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nlos/geometry.hpp"
#include "nlos/parallel.hpp"
#include "nlos/rng.hpp"

namespace nlos {

/// Centroid-centered point cloud with per-point albedo.
struct ObjectModel {
  std::vector<Vec3> points;
  std::vector<double> albedo;

  /// Recenters the cloud so the centroid is exactly at the origin.
  void recenter() {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : points) c += p;
    c /= static_cast<double>(points.size());
    for (Vec3& p : points) p -= c;
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : points) c += p;
    return c / static_cast<double>(points.size());
  }

  /// Planar patch parallel to the wall: rows x cols points over sx x sy meters.
  static ObjectModel patch(double sx, double sy, int rows, int cols, double rho = 1.0) {
    ObjectModel m;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        double u = rows > 1 ? static_cast<double>(i) / (rows - 1) - 0.5 : 0.0;
        double v = cols > 1 ? static_cast<double>(j) / (cols - 1) - 0.5 : 0.0;
        m.points.emplace_back(u * sx, v * sy, 0.0);
        m.albedo.push_back(rho);
      }
    m.recenter();
    return m;
  }

  /// Axis-aligned box shell sampled on a grid (a crude mannequin stand-in).
  static ObjectModel box(const Vec3& size, int n_per_axis, double rho = 1.0) {
    ObjectModel m;
    int n = std::max(2, n_per_axis);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          if (i != 0 && i != n - 1 && j != 0 && j != n - 1 && k != 0 && k != n - 1)
            continue;  // shell only
          Vec3 f(static_cast<double>(i) / (n - 1) - 0.5,
                 static_cast<double>(j) / (n - 1) - 0.5,
                 static_cast<double>(k) / (n - 1) - 0.5);
          m.points.emplace_back(f.cwiseProduct(size));
          m.albedo.push_back(rho);
        }
    m.recenter();
    return m;
  }

  static ObjectModel single_point(double rho = 1.0) {
    ObjectModel m;
    m.points.emplace_back(0, 0, 0);
    m.albedo.push_back(rho);
    return m;
  }

  /// Uniform random cloud in a box, recentered.
  static ObjectModel random_cloud(int n, const Vec3& size, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x0b1ec7));
    ObjectModel m;
    for (int i = 0; i < n; ++i) {
      m.points.emplace_back(size.x() * (rng.uniform() - 0.5),
                            size.y() * (rng.uniform() - 0.5),
                            size.z() * (rng.uniform() - 0.5));
      m.albedo.push_back(1.0);
    }
    m.recenter();
    return m;
  }
};

/// Per-frame object centroid positions (world meters) or camera poses.
struct Trajectory {
  std::vector<Vec3> waypoints;
  double fps = 30.0;

  std::size_t frames() const { return waypoints.size(); }
};

struct CameraTrajectory {
  std::vector<Pose> poses;
  double fps = 30.0;

  std::size_t frames() const { return poses.size(); }
};

/// One LiDAR frame. Arrays are stored as float32 so the in-memory pipeline
/// and the on-disk dataset format share bit-identical values.
struct FrameMeasurement {
  Pose pose;
  int nx = 0, ny = 0, nt = 0;
  std::vector<float> wall_points;  // nx*ny*3, world meters, z = 0
  std::vector<float> histogram;    // nx*ny*nt photon counts
  std::vector<float> point_cloud;  // nx*ny*3, camera coordinates (LiDAR depth)
  double timestamp = 0.0;

  Vec3 wall_point(int i, int j) const {
    std::size_t b = (static_cast<std::size_t>(i) * ny + j) * 3;
    return {wall_points[b], wall_points[b + 1], wall_points[b + 2]};
  }
};

struct NoiseConfig {
  bool enabled = true;         // disabled: histograms stay noiseless
  double signal_scale = 1.0;   // expected photons at unit model intensity
  double ambient_rate = 0.0;   // photons/bin
  double dark_rate = 0.0;      // photons/bin
  double range_sigma = 0.0;    // meters, LiDAR point-cloud range noise
  double peak_photons = 0.0;   // if > 0, signal_scale is derived from frame 0
  std::uint64_t seed = 0;
};

namespace detail {

inline void splat_pulse(float* column, int nt, double bin_width, double tau,
                        double amplitude, double pulse_sigma) {
  if (pulse_sigma <= 0.0) {
    double b = tau / bin_width;
    if (b < 0.0 || b > nt - 1) return;
    int b0 = std::min(static_cast<int>(b), nt - 2);
    double f = b - b0;
    column[b0] += static_cast<float>(amplitude * (1.0 - f));
    column[b0 + 1] += static_cast<float>(amplitude * f);
    return;
  }
  // Unnormalized Gaussian pulse, truncated at +-4 sigma.
  int k_lo = std::max(0, static_cast<int>(std::ceil((tau - 4.0 * pulse_sigma) / bin_width)));
  int k_hi = std::min(nt - 1, static_cast<int>(std::floor((tau + 4.0 * pulse_sigma) / bin_width)));
  double inv2s2 = 1.0 / (2.0 * pulse_sigma * pulse_sigma);
  for (int k = k_lo; k <= k_hi; ++k) {
    double dt = k * bin_width - tau;
    column[k] += static_cast<float>(amplitude * std::exp(-dt * dt * inv2s2));
  }
}

}  // namespace detail

/// Renders one noiseless confocal transient frame by brute force: every wall
/// point deposits, for every scene point, a pulse at tau = 2r/c weighted by
/// rho/r^2 (retroreflective) or rho/r^4 (diffuse). Single-bounce only.
inline FrameMeasurement render_transient_direct(
    const std::vector<std::pair<const ObjectModel*, Vec3>>& objects,
    const CameraModel& camera, const Pose& pose, int workers = 1) {
  for (const auto& [model, shift] : objects)
    for (const Vec3& p : model->points)
      if (p.z() + shift.z() <= 0.0)
        throw ObjectBehindWall("object point at z <= 0 after shift");

  FrameMeasurement frame;
  frame.pose = pose;
  frame.nx = camera.nx;
  frame.ny = camera.ny;
  frame.nt = camera.n_bins;
  frame.histogram.assign(static_cast<std::size_t>(camera.pixels()) * camera.n_bins, 0.0f);
  frame.wall_points.resize(static_cast<std::size_t>(camera.pixels()) * 3);

  std::vector<Vec3> wall = intersect_rays(camera, pose);
  for (int px = 0; px < camera.pixels(); ++px) {
    frame.wall_points[px * 3 + 0] = static_cast<float>(wall[px].x());
    frame.wall_points[px * 3 + 1] = static_cast<float>(wall[px].y());
    frame.wall_points[px * 3 + 2] = 0.0f;
  }

  const double expo = falloff_exponent(camera.falloff);
  parallel_for(static_cast<std::size_t>(camera.pixels()), workers, [&](std::size_t px) {
    // Float wall coordinates so results match a dataset read back from disk.
    Vec3 w(frame.wall_points[px * 3], frame.wall_points[px * 3 + 1], 0.0);
    float* column = frame.histogram.data() + px * camera.n_bins;
    for (const auto& [model, shift] : objects) {
      for (std::size_t q = 0; q < model->points.size(); ++q) {
        Vec3 d = model->points[q] + shift - w;
        double r = d.norm();
        double tau = 2.0 * r / kSpeedOfLight;
        double amp = model->albedo[q] / std::pow(r, expo);
        detail::splat_pulse(column, camera.n_bins, camera.bin_width, tau, amp,
                            camera.pulse_sigma);
      }
    }
  });
  return frame;
}

/// Replaces every bin with a Poisson draw of mean
/// signal_scale*value + ambient_rate + dark_rate. Deterministic given the
/// stream seed.
inline FrameMeasurement add_noise(const FrameMeasurement& frame, const NoiseConfig& cfg,
                                  std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  FrameMeasurement out = frame;
  const double floor_rate = cfg.ambient_rate + cfg.dark_rate;
  for (float& v : out.histogram) {
    double lambda = cfg.signal_scale * static_cast<double>(v) + floor_rate;
    v = static_cast<float>(rng.poisson(lambda));
  }
  return out;
}

inline FrameMeasurement add_noise(const FrameMeasurement& frame, const NoiseConfig& cfg) {
  return add_noise(frame, cfg, derive_seed(cfg.seed, 0));
}

/// Simulated LiDAR point cloud of the wall in camera coordinates, with
/// optional Gaussian range noise.
inline std::vector<float> simulate_point_cloud(const CameraModel& camera, const Pose& pose,
                                               double range_sigma, Rng& rng) {
  Mat3 k_inv = camera.intrinsics.inverse();
  std::vector<float> cloud(static_cast<std::size_t>(camera.pixels()) * 3);
  for (int i = 0; i < camera.nx; ++i) {
    for (int j = 0; j < camera.ny; ++j) {
      Vec3 dir_cam = (k_inv * Vec3(i, j, 1.0)).normalized();
      Vec3 dir_world = pose.rotation * dir_cam;
      if (std::abs(dir_world.z()) < 1e-12)
        throw RayParallelToWall("point-cloud ray parallel to wall");
      double range = -pose.translation.z() / dir_world.z();
      if (range <= 0.0) throw BehindCamera("point-cloud ray behind camera");
      if (range_sigma > 0.0) range += range_sigma * rng.normal();
      Vec3 p = range * dir_cam;
      std::size_t b = camera.pixel_index(i, j) * 3;
      cloud[b] = static_cast<float>(p.x());
      cloud[b + 1] = static_cast<float>(p.y());
      cloud[b + 2] = static_cast<float>(p.z());
    }
  }
  return cloud;
}

/// A simulated capture with its ground truth.
struct Dataset {
  CameraModel camera;
  NoiseConfig noise;
  std::string profile_name;
  std::uint64_t seed = 0;
  double fps = 30.0;
  std::vector<FrameMeasurement> frames;
  std::vector<std::vector<Vec3>> truth_objects;  // [object][frame] centroid
  std::vector<Pose> truth_poses;                 // [frame]

  std::size_t frame_count() const { return frames.size(); }
};

/// Renders and corrupts a full sequence. Per-frame RNG streams are derived
/// from the master seed so parallel and serial schedules agree bit-exactly.
inline Dataset simulate_sequence(const std::vector<std::pair<ObjectModel, Trajectory>>& scene,
                                 const CameraModel& camera,
                                 const CameraTrajectory& camera_traj, NoiseConfig cfg,
                                 int workers = 1) {
  const std::size_t frames = camera_traj.frames();
  for (const auto& [model, traj] : scene)
    if (traj.frames() != frames)
      throw LengthMismatch("object and camera trajectories disagree on frame count");

  Dataset ds;
  ds.camera = camera;
  ds.seed = cfg.seed;
  ds.fps = camera_traj.fps;
  ds.truth_poses = camera_traj.poses;
  ds.truth_objects.resize(scene.size());
  for (std::size_t m = 0; m < scene.size(); ++m)
    ds.truth_objects[m] = scene[m].second.waypoints;

  if (cfg.peak_photons > 0.0 && frames > 0) {
    std::vector<std::pair<const ObjectModel*, Vec3>> placed;
    for (const auto& [model, traj] : scene) placed.emplace_back(&model, traj.waypoints[0]);
    FrameMeasurement probe =
        render_transient_direct(placed, camera, camera_traj.poses[0], workers);
    float peak = *std::max_element(probe.histogram.begin(), probe.histogram.end());
    cfg.signal_scale = peak > 0.0f ? cfg.peak_photons / peak : 1.0;
  }
  ds.noise = cfg;

  ds.frames.resize(frames);
  parallel_for(frames, workers, [&](std::size_t t) {
    std::vector<std::pair<const ObjectModel*, Vec3>> placed;
    for (const auto& [model, traj] : scene) placed.emplace_back(&model, traj.waypoints[t]);
    FrameMeasurement frame =
        render_transient_direct(placed, camera, camera_traj.poses[t], 1);
    frame.timestamp = camera_traj.fps > 0 ? static_cast<double>(t) / camera_traj.fps : 0.0;
    if (cfg.enabled) frame = add_noise(frame, cfg, derive_seed(cfg.seed, t, 0x6e015e));
    Rng cloud_rng(derive_seed(cfg.seed, t, 0xc10bd));
    frame.point_cloud =
        simulate_point_cloud(camera, camera_traj.poses[t], cfg.range_sigma, cloud_rng);
    ds.frames[t] = std::move(frame);
  });
  return ds;
}

enum class TrajectoryKind { linear, circular, grid, random_walk };

struct TrajectoryParams {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();          // linear
  double radius = 0.0;              // circular
  double revolutions = 1.0;         // circular
  double extent = 0.25;             // grid raster side length (meters)
  int grid_rows = 10, grid_cols = 10;
  double step_sigma = 0.0;          // random_walk per-axis step std (meters)
  std::uint64_t seed = 0;
};

/// Standard parametric trajectories. `frames` waypoints; the grid kind visits
/// a rows x cols raster over a square patch centered at `start`.
inline Trajectory generate_trajectory(TrajectoryKind kind, const TrajectoryParams& p,
                                      std::size_t frames, double fps = 30.0) {
  Trajectory traj;
  traj.fps = fps;
  traj.waypoints.reserve(frames);
  switch (kind) {
    case TrajectoryKind::linear: {
      for (std::size_t t = 0; t < frames; ++t) {
        double a = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
        traj.waypoints.push_back(p.start + a * (p.end - p.start));
      }
      break;
    }
    case TrajectoryKind::circular: {
      for (std::size_t t = 0; t < frames; ++t) {
        double a = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
        double phi = 2.0 * M_PI * p.revolutions * a;
        traj.waypoints.push_back(p.start +
                                 Vec3(p.radius * std::cos(phi), p.radius * std::sin(phi), 0.0));
      }
      break;
    }
    case TrajectoryKind::grid: {
      for (std::size_t t = 0; t < frames; ++t) {
        std::size_t cell = t % (static_cast<std::size_t>(p.grid_rows) * p.grid_cols);
        int i = static_cast<int>(cell) / p.grid_cols;
        int j = static_cast<int>(cell) % p.grid_cols;
        if (i % 2 == 1) j = p.grid_cols - 1 - j;  // serpentine raster
        double fx = p.grid_rows > 1 ? static_cast<double>(i) / (p.grid_rows - 1) - 0.5 : 0.0;
        double fy = p.grid_cols > 1 ? static_cast<double>(j) / (p.grid_cols - 1) - 0.5 : 0.0;
        traj.waypoints.push_back(p.start + Vec3(fx * p.extent, fy * p.extent, 0.0));
      }
      break;
    }
    case TrajectoryKind::random_walk: {
      Rng rng(derive_seed(p.seed, 0x7a11));
      Vec3 pos = p.start;
      for (std::size_t t = 0; t < frames; ++t) {
        traj.waypoints.push_back(pos);
        pos += Vec3(rng.normal(0, p.step_sigma), rng.normal(0, p.step_sigma),
                    rng.normal(0, p.step_sigma));
      }
      break;
    }
  }
  return traj;
}

/// Camera pose sequence: translation waypoints plus optional random-walk
/// pitch/yaw jitter (no roll), starting from a wall-facing orientation.
inline CameraTrajectory generate_camera_trajectory(const Trajectory& positions,
                                                   double rot_jitter_sigma = 0.0,
                                                   std::uint64_t seed = 0) {
  CameraTrajectory ct;
  ct.fps = positions.fps;
  ct.poses.reserve(positions.frames());
  Rng rng(derive_seed(seed, 0xca7));
  double pitch = 0.0, yaw = 0.0;
  for (const Vec3& pos : positions.waypoints) {
    if (rot_jitter_sigma > 0.0) {
      pitch += rot_jitter_sigma * rng.normal();
      yaw += rot_jitter_sigma * rng.normal();
    }
    Pose base = Pose::facing_wall(pos);
    Mat3 jitter = (Eigen::AngleAxisd(yaw, Vec3::UnitY()) *
                   Eigen::AngleAxisd(pitch, Vec3::UnitX()))
                      .toRotationMatrix();
    ct.poses.push_back({jitter * base.rotation, base.translation});
  }
  return ct;
}

}  // namespace nlos
