#pragma once

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nlos/dataset.hpp"
#include "nlos/errors.hpp"
#include "nlos/simulator.hpp"
#include "nlos/tracking.hpp"

namespace nlos {

namespace cfg_detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline Vec3 vec3_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(where + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline Axis axis_of(const json& j, const std::string& where) {
  require_keys(j, {"min", "max", "count"}, where);
  Axis a{j.at("min").get<double>(), j.at("max").get<double>(), j.at("count").get<int>()};
  if (!a.valid()) throw ConfigError(where + ": invalid axis");
  return a;
}

inline GridSpec grid_of(const json& j, const std::string& where) {
  require_keys(j, {"x", "y", "v"}, where);
  return {axis_of(j.at("x"), where + ".x"), axis_of(j.at("y"), where + ".y"),
          axis_of(j.at("v"), where + ".v")};
}

}  // namespace cfg_detail

/// Builds an object from a shape spec:
///   {"kind": "point"|"patch"|"box"|"cloud", ...}
/// or an explicit point list {"points": [[x,y,z], ...], "albedo": [..]}.
inline ObjectModel object_from_json(const json& j, const std::string& where) {
  using cfg_detail::get_or;
  if (j.contains("points") && j.at("points").is_array() && !j.contains("kind")) {
    cfg_detail::require_keys(j, {"points", "albedo"}, where);
    ObjectModel m;
    for (const json& p : j.at("points"))
      m.points.push_back(cfg_detail::vec3_of(p, where + ".points"));
    if (j.contains("albedo")) {
      for (const json& a : j.at("albedo")) m.albedo.push_back(a.get<double>());
      if (m.albedo.size() != m.points.size())
        throw ConfigError(where + ": albedo length must match points");
    } else {
      m.albedo.assign(m.points.size(), 1.0);
    }
    m.recenter();
    return m;
  }
  std::string kind = j.contains("kind") ? j.at("kind").get<std::string>() : "";
  if (kind == "point") {
    cfg_detail::require_keys(j, {"kind", "albedo"}, where);
    return ObjectModel::single_point(get_or(j, "albedo", 1.0));
  }
  if (kind == "patch") {
    cfg_detail::require_keys(j, {"kind", "size", "points", "albedo"}, where);
    auto size = j.at("size").get<std::vector<double>>();
    auto pts = get_or(j, "points", std::vector<int>{9, 9});
    if (size.size() != 2 || pts.size() != 2)
      throw ConfigError(where + ": patch needs size [sx, sy] and points [rows, cols]");
    return ObjectModel::patch(size[0], size[1], pts[0], pts[1], get_or(j, "albedo", 1.0));
  }
  if (kind == "box") {
    cfg_detail::require_keys(j, {"kind", "size", "points", "albedo"}, where);
    Vec3 size = cfg_detail::vec3_of(j.at("size"), where + ".size");
    return ObjectModel::box(size, get_or(j, "points", 5), get_or(j, "albedo", 1.0));
  }
  if (kind == "cloud") {
    cfg_detail::require_keys(j, {"kind", "size", "count", "seed"}, where);
    Vec3 size = cfg_detail::vec3_of(j.at("size"), where + ".size");
    return ObjectModel::random_cloud(get_or(j, "count", 100), size,
                                     get_or<std::uint64_t>(j, "seed", 0));
  }
  throw ConfigError(where + ": unknown object kind '" + kind + "'");
}

inline ObjectModel object_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open object file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("object file parse error: " + std::string(e.what()));
  }
  return object_from_json(j, path.string());
}

inline Trajectory trajectory_from_json(const json& j, std::size_t frames, double fps,
                                       std::uint64_t seed, const std::string& where) {
  using cfg_detail::get_or;
  std::string kind = j.contains("kind") ? j.at("kind").get<std::string>() : "static";
  TrajectoryParams p;
  p.seed = seed;
  if (kind == "static") {
    cfg_detail::require_keys(j, {"kind", "position"}, where);
    p.start = cfg_detail::vec3_of(j.at("position"), where + ".position");
    p.end = p.start;
    return generate_trajectory(TrajectoryKind::linear, p, frames, fps);
  }
  if (kind == "linear") {
    cfg_detail::require_keys(j, {"kind", "start", "end"}, where);
    p.start = cfg_detail::vec3_of(j.at("start"), where + ".start");
    p.end = cfg_detail::vec3_of(j.at("end"), where + ".end");
    return generate_trajectory(TrajectoryKind::linear, p, frames, fps);
  }
  if (kind == "circular") {
    cfg_detail::require_keys(j, {"kind", "center", "radius", "revolutions"}, where);
    p.start = cfg_detail::vec3_of(j.at("center"), where + ".center");
    p.radius = j.at("radius").get<double>();
    p.revolutions = get_or(j, "revolutions", 1.0);
    return generate_trajectory(TrajectoryKind::circular, p, frames, fps);
  }
  if (kind == "grid") {
    cfg_detail::require_keys(j, {"kind", "center", "extent", "rows", "cols"}, where);
    p.start = cfg_detail::vec3_of(j.at("center"), where + ".center");
    p.extent = get_or(j, "extent", 0.25);
    p.grid_rows = get_or(j, "rows", 10);
    p.grid_cols = get_or(j, "cols", 10);
    return generate_trajectory(TrajectoryKind::grid, p, frames, fps);
  }
  if (kind == "random_walk") {
    cfg_detail::require_keys(j, {"kind", "start", "step_sigma"}, where);
    p.start = cfg_detail::vec3_of(j.at("start"), where + ".start");
    p.step_sigma = get_or(j, "step_sigma", 0.01);
    return generate_trajectory(TrajectoryKind::random_walk, p, frames, fps);
  }
  throw ConfigError(where + ": unknown trajectory kind '" + kind + "'");
}

struct SceneConfig {
  std::size_t frames = 30;
  std::vector<ObjectModel> objects;
  std::vector<Trajectory> trajectories;
  CameraTrajectory camera_trajectory;
  NoiseConfig noise;
};

/// Full run configuration: profile + scene + filter + grids. Unknown keys
/// are rejected everywhere; seed/workers/profile may be overridden by CLI
/// flags or NLOSMAS_* environment variables.
struct RunConfig {
  SensorProfile profile = consumer_profile();
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<SceneConfig> scene;
  FilterConfig filter;
  Estimator estimator = Estimator::mean;
  int skip = 5;
  int kmeans_clusters = 4;
  double stir_reference_depth = 1.0;
  std::optional<GridSpec> stir_grid;       // defaults to the profile grid
  std::optional<GridSpec> volume_grid;     // reconstruction output grid
  double accumulate_cell = 0.0;            // defaults to the stir grid spacing

  GridSpec resolved_stir_grid() const { return stir_grid ? *stir_grid : profile.stir_grid; }
  double resolved_cell() const {
    return accumulate_cell > 0.0 ? accumulate_cell : resolved_stir_grid().x.spacing();
  }
};

inline RunConfig parse_run_config(const json& j) {
  using cfg_detail::get_or;
  cfg_detail::require_keys(j,
                           {"profile", "seed", "workers", "scene", "filter", "stir",
                            "reconstruction"},
                           "config");
  RunConfig rc;
  rc.profile = profile_by_name(get_or<std::string>(j, "profile", "consumer-10x10-30hz"));
  rc.seed = get_or<std::uint64_t>(j, "seed", 0);
  rc.workers = get_or(j, "workers", 1);
  rc.filter.seed = rc.seed;

  if (j.contains("scene")) {
    const json& sj = j.at("scene");
    cfg_detail::require_keys(sj, {"frames", "objects", "camera", "noise"}, "scene");
    SceneConfig scene;
    scene.frames = get_or<std::size_t>(sj, "frames", 30);
    scene.noise = rc.profile.noise;
    scene.noise.seed = rc.seed;
    if (sj.contains("noise")) {
      const json& nj = sj.at("noise");
      cfg_detail::require_keys(nj,
                               {"enabled", "signal_scale", "ambient_rate", "dark_rate",
                                "range_sigma", "peak_photons"},
                               "scene.noise");
      scene.noise.enabled = get_or(nj, "enabled", true);
      if (nj.contains("signal_scale")) {
        scene.noise.signal_scale = nj.at("signal_scale").get<double>();
        scene.noise.peak_photons = 0.0;
      }
      scene.noise.ambient_rate = get_or(nj, "ambient_rate", scene.noise.ambient_rate);
      scene.noise.dark_rate = get_or(nj, "dark_rate", scene.noise.dark_rate);
      scene.noise.range_sigma = get_or(nj, "range_sigma", scene.noise.range_sigma);
      scene.noise.peak_photons = get_or(nj, "peak_photons", scene.noise.peak_photons);
    }
    if (!sj.contains("objects") || !sj.at("objects").is_array() || sj.at("objects").empty())
      throw ConfigError("scene.objects: need at least one object");
    int idx = 0;
    for (const json& oj : sj.at("objects")) {
      std::string where = "scene.objects[" + std::to_string(idx) + "]";
      cfg_detail::require_keys(oj, {"shape", "trajectory"}, where);
      scene.objects.push_back(object_from_json(oj.at("shape"), where + ".shape"));
      scene.trajectories.push_back(
          trajectory_from_json(oj.at("trajectory"), scene.frames, rc.profile.fps,
                               derive_seed(rc.seed, 0x0b1, idx), where + ".trajectory"));
      ++idx;
    }
    json cj = sj.contains("camera") ? sj.at("camera") : json::object();
    cfg_detail::require_keys(cj, {"trajectory", "rot_jitter"}, "scene.camera");
    json ctj = cj.contains("trajectory")
                   ? cj.at("trajectory")
                   : json{{"kind", "static"}, {"position", {0.0, 0.0, 1.1}}};
    Trajectory cam_positions =
        trajectory_from_json(ctj, scene.frames, rc.profile.fps,
                             derive_seed(rc.seed, 0xca3), "scene.camera.trajectory");
    scene.camera_trajectory = generate_camera_trajectory(
        cam_positions, get_or(cj, "rot_jitter", 0.0), derive_seed(rc.seed, 0xca4));
    rc.scene = std::move(scene);
  }

  if (j.contains("filter")) {
    const json& fj = j.at("filter");
    cfg_detail::require_keys(fj,
                             {"particles", "radius", "eta", "skip", "estimator",
                              "kmeans_clusters", "bounds_min", "bounds_max"},
                             "filter");
    rc.filter.particles = get_or(fj, "particles", 1000);
    rc.filter.radius = get_or(fj, "radius", 0.05);
    rc.filter.eta = get_or(fj, "eta", 4.0);
    rc.skip = get_or(fj, "skip", 5);
    rc.kmeans_clusters = get_or(fj, "kmeans_clusters", 4);
    std::string est = get_or<std::string>(fj, "estimator", "mean");
    if (est == "mean")
      rc.estimator = Estimator::mean;
    else if (est == "kmeans_modes")
      rc.estimator = Estimator::kmeans_modes;
    else
      throw ConfigError("filter.estimator: expected 'mean' or 'kmeans_modes'");
    if (fj.contains("bounds_min"))
      rc.filter.bounds_min = fj.at("bounds_min").get<std::vector<double>>();
    if (fj.contains("bounds_max"))
      rc.filter.bounds_max = fj.at("bounds_max").get<std::vector<double>>();
  }

  if (j.contains("stir")) {
    const json& tj = j.at("stir");
    cfg_detail::require_keys(tj, {"reference_depth", "grid"}, "stir");
    rc.stir_reference_depth = get_or(tj, "reference_depth", 1.0);
    if (tj.contains("grid")) rc.stir_grid = cfg_detail::grid_of(tj.at("grid"), "stir.grid");
  }
  if (j.contains("reconstruction")) {
    const json& vj = j.at("reconstruction");
    cfg_detail::require_keys(vj, {"grid", "cell_size"}, "reconstruction");
    if (vj.contains("grid"))
      rc.volume_grid = cfg_detail::grid_of(vj.at("grid"), "reconstruction.grid");
    rc.accumulate_cell = get_or(vj, "cell_size", 0.0);
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_run_config(j);
}

/// Runs the configured scene through the simulator.
inline Dataset simulate_from_config(const RunConfig& rc) {
  if (!rc.scene) throw ConfigError("config has no scene section");
  std::vector<std::pair<ObjectModel, Trajectory>> scene;
  for (std::size_t m = 0; m < rc.scene->objects.size(); ++m)
    scene.emplace_back(rc.scene->objects[m], rc.scene->trajectories[m]);
  Dataset ds = simulate_sequence(scene, rc.profile.camera, rc.scene->camera_trajectory,
                                 rc.scene->noise, rc.workers);
  ds.profile_name = rc.profile.name;
  return ds;
}

}  // namespace nlos
