#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "nlos/errors.hpp"

namespace nlos {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Camera-to-world rigid transform (the inverse of the extrinsic matrix).
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  Pose compose(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  bool is_rigid(double tol = 1e-9) const {
    Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }

  /// Camera at `position` with optical axis along world -z (facing the wall
  /// plane z=0 from above). Camera x keeps world x; right-handed.
  static Pose facing_wall(const Vec3& position) {
    Mat3 r;
    r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    return {r, position};
  }
};

enum class Falloff { retroreflective, diffuse };  // 1/r^2 vs 1/r^4

inline double falloff_exponent(Falloff f) {
  return f == Falloff::retroreflective ? 2.0 : 4.0;
}

/// Pinhole LiDAR model. Pixel (i, j) has image coordinates (i, j); the
/// per-pixel instantaneous field of view is collapsed to the central ray.
struct CameraModel {
  Mat3 intrinsics = Mat3::Identity();
  int nx = 0, ny = 0;       // pixel counts
  int n_bins = 0;           // temporal bins
  double bin_width = 0.0;   // seconds
  double pulse_sigma = 0.0; // seconds (Gaussian pulse std)
  Falloff falloff = Falloff::retroreflective;

  int pixels() const { return nx * ny; }
  std::size_t pixel_index(int i, int j) const {
    return static_cast<std::size_t>(i) * ny + j;
  }

  static CameraModel pinhole(int nx, int ny, double focal_px, int n_bins,
                             double bin_width, double pulse_sigma,
                             Falloff falloff) {
    CameraModel c;
    c.intrinsics << focal_px, 0, 0.5 * (nx - 1), 0, focal_px, 0.5 * (ny - 1), 0, 0, 1;
    c.nx = nx;
    c.ny = ny;
    c.n_bins = n_bins;
    c.bin_width = bin_width;
    c.pulse_sigma = pulse_sigma;
    c.falloff = falloff;
    return c;
  }
};

/// Intersects every pixel's central ray with the wall plane z=0.
/// Returns an nx*ny grid of world points, pixel-major (i*ny + j).
inline std::vector<Vec3> intersect_rays(const CameraModel& camera, const Pose& pose) {
  Mat3 k_inv = camera.intrinsics.inverse();
  std::vector<Vec3> points(static_cast<std::size_t>(camera.pixels()));
  for (int i = 0; i < camera.nx; ++i) {
    for (int j = 0; j < camera.ny; ++j) {
      Vec3 dir = pose.rotation * (k_inv * Vec3(i, j, 1.0));
      if (std::abs(dir.z()) < 1e-12 * dir.norm())
        throw RayParallelToWall("pixel (" + std::to_string(i) + "," + std::to_string(j) +
                                ") ray has zero z-component");
      double s = -pose.translation.z() / dir.z();
      if (s <= 0.0)
        throw BehindCamera("pixel (" + std::to_string(i) + "," + std::to_string(j) +
                           ") intersects the wall behind the camera");
      Vec3 p = pose.translation + s * dir;
      p.z() = 0.0;
      points[camera.pixel_index(i, j)] = p;
    }
  }
  return points;
}

/// Projects a world point on the wall back to image coordinates.
inline Eigen::Vector2d project_to_pixel(const CameraModel& camera, const Pose& pose,
                                        const Vec3& world) {
  Vec3 cam = pose.to_camera(world);
  Vec3 uvw = camera.intrinsics * cam;
  return {uvw.x() / uvw.z(), uvw.y() / uvw.z()};
}

struct PlaneFit {
  double camera_height = 0.0;     // distance from the camera center to the plane
  Mat3 rotation = Mat3::Identity();  // maps the fitted normal to +z
  std::vector<Vec3> aligned;      // input points rotated + shifted onto z=0
  double rms_residual = 0.0;
};

/// Least-squares plane through `points` (camera coordinates) via the
/// smallest principal axis of the centered scatter matrix. The normal is
/// taken with positive z-component so a camera in front of the wall is the
/// canonical orientation; the returned rotation is the minimal (roll-free)
/// rotation onto +z.
inline PlaneFit fit_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) throw DegeneratePointSet("need at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 evals = eig.eigenvalues();  // ascending
  if (evals(1) <= evals(2) * 1e-12)
    throw DegeneratePointSet("points are collinear");

  Vec3 normal = eig.eigenvectors().col(0);
  if (normal.z() < 0) normal = -normal;

  // Minimal rotation normal -> +z (no roll about the normal).
  Vec3 zhat(0, 0, 1);
  Vec3 axis = normal.cross(zhat);
  double sin_a = axis.norm();
  double cos_a = normal.dot(zhat);
  Mat3 rot = Mat3::Identity();
  if (sin_a > 1e-15) {
    rot = Eigen::AngleAxisd(std::atan2(sin_a, cos_a), axis / sin_a).toRotationMatrix();
  } else if (cos_a < 0) {
    rot << 1, 0, 0, 0, -1, 0, 0, 0, -1;  // 180 degrees, pick x as the flip axis
  }

  double offset = normal.dot(centroid);
  PlaneFit fit;
  fit.camera_height = std::abs(offset);
  fit.rotation = rot;
  fit.aligned.reserve(points.size());
  double ss = 0.0;
  for (const Vec3& p : points) {
    Vec3 q = rot * p;
    q.z() -= offset;
    ss += q.z() * q.z();
    q.z() = (std::abs(q.z()) < 1e-12) ? 0.0 : q.z();
    fit.aligned.push_back(q);
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

}  // namespace nlos
