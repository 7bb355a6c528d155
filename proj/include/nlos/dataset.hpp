#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nlos/errors.hpp"
#include "nlos/grid.hpp"
#include "nlos/simulator.hpp"
#include "nlos/stir.hpp"

namespace nlos {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Sensor profiles

struct SensorProfile {
  std::string name;
  CameraModel camera;
  NoiseConfig noise;
  GridSpec stir_grid;        // shared STIR / measurement grid
  double reference_depth = 1.0;
  double fps = 30.0;
};

/// Default consumer profile: ~100 pixels at 30 Hz, 160 bins x 100 ps
/// (2.4 m two-way range), 200 ps pulse, retroreflective target.
inline SensorProfile consumer_profile() {
  SensorProfile p;
  p.name = "consumer-10x10-30hz";
  p.camera = CameraModel::pinhole(10, 10, 15.0, 160, 100e-12, 200e-12,
                                  Falloff::retroreflective);
  p.noise.ambient_rate = 0.02;
  p.noise.dark_rate = 0.005;
  p.noise.range_sigma = 0.005;
  p.noise.peak_photons = 50.0;
  double v_max = 5.76;  // (c * n_bins * bin_width / 2)^2
  p.stir_grid = GridSpec{{-1.2, 1.2, 64}, {-1.2, 1.2, 64}, {0.0, v_max, 160}};
  p.reference_depth = 1.0;
  p.fps = 30.0;
  return p;
}

inline SensorProfile profile_by_name(const std::string& name) {
  if (name == "consumer-10x10-30hz" || name.empty()) return consumer_profile();
  throw ConfigError("unknown sensor profile: " + name);
}

// ---------------------------------------------------------------------------
// Raw little-endian float32 arrays

namespace detail {

inline void write_f32(const fs::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArray("cannot open for writing: " + path.string());
  for (float v : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                          static_cast<unsigned char>((bits >> 8) & 0xff),
                          static_cast<unsigned char>((bits >> 16) & 0xff),
                          static_cast<unsigned char>((bits >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

inline std::vector<float> read_f32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArray("missing array file: " + path.string());
  in.seekg(0, std::ios::end);
  std::size_t bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * 4)
    throw ShapeMismatch(path.string() + ": expected " + std::to_string(expected * 4) +
                        " bytes, found " + std::to_string(bytes));
  in.seekg(0);
  std::vector<float> data(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                         (static_cast<std::uint32_t>(b[1]) << 8) |
                         (static_cast<std::uint32_t>(b[2]) << 16) |
                         (static_cast<std::uint32_t>(b[3]) << 24);
    std::memcpy(&data[i], &bits, 4);
  }
  return data;
}

inline std::uint64_t fnv1a(std::uint64_t hash, const std::vector<float>& data) {
  for (float v : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int s = 0; s < 32; s += 8) {
      hash ^= (bits >> s) & 0xff;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

inline std::uint64_t dataset_digest(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const FrameMeasurement& f : ds.frames) {
    h = fnv1a(h, f.histogram);
    h = fnv1a(h, f.wall_points);
    h = fnv1a(h, f.point_cloud);
  }
  return h;
}

inline json pose_to_json(const Pose& pose) {
  json j;
  j["rotation"] = std::vector<double>(pose.rotation.data(), pose.rotation.data() + 9);
  j["translation"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  return j;
}

inline Pose pose_from_json(const json& j) {
  Pose p;
  auto r = j.at("rotation").get<std::vector<double>>();
  if (r.size() != 9) throw CorruptManifest("pose rotation must have 9 entries");
  std::copy(r.begin(), r.end(), p.rotation.data());
  auto t = j.at("translation").get<std::vector<double>>();
  if (t.size() != 3) throw CorruptManifest("pose translation must have 3 entries");
  p.translation = Vec3(t[0], t[1], t[2]);
  return p;
}

inline json axis_to_json(const Axis& a) { return json{{"min", a.min}, {"max", a.max}, {"count", a.count}}; }

inline Axis axis_from_json(const json& j) {
  return Axis{j.at("min").get<double>(), j.at("max").get<double>(), j.at("count").get<int>()};
}

inline json grid_to_json(const GridSpec& g) {
  return json{{"x", axis_to_json(g.x)}, {"y", axis_to_json(g.y)}, {"v", axis_to_json(g.v)}};
}

inline GridSpec grid_from_json(const json& j) {
  return GridSpec{axis_from_json(j.at("x")), axis_from_json(j.at("y")),
                  axis_from_json(j.at("v"))};
}

inline json load_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest");
  if (!in) throw CorruptManifest("missing manifest: " + (dir / "manifest").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CorruptManifest(std::string("manifest parse error: ") + e.what());
  }
  return j;
}

inline void save_manifest(const fs::path& dir, const json& j) {
  std::ofstream out(dir / "manifest");
  out << j.dump(2) << "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset serialization
//
// Layout:  manifest
//          frames/<t>/histogram.f32
//          frames/<t>/wallpoints.f32
//          frames/<t>/pointcloud.f32
//          truth/trajectories

inline void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "truth");

  json manifest;
  manifest["format"] = "nlosmas-dataset";
  manifest["version"] = 1;
  manifest["profile"] = ds.profile_name;
  manifest["seed"] = ds.seed;
  manifest["fps"] = ds.fps;
  manifest["frame_count"] = ds.frames.size();
  json cam;
  cam["intrinsics"] = std::vector<double>(ds.camera.intrinsics.data(),
                                          ds.camera.intrinsics.data() + 9);
  cam["nx"] = ds.camera.nx;
  cam["ny"] = ds.camera.ny;
  cam["n_bins"] = ds.camera.n_bins;
  cam["bin_width"] = ds.camera.bin_width;
  cam["pulse_sigma"] = ds.camera.pulse_sigma;
  cam["falloff"] = ds.camera.falloff == Falloff::retroreflective ? "retroreflective" : "diffuse";
  manifest["camera"] = cam;
  json noise;
  noise["signal_scale"] = ds.noise.signal_scale;
  noise["ambient_rate"] = ds.noise.ambient_rate;
  noise["dark_rate"] = ds.noise.dark_rate;
  noise["range_sigma"] = ds.noise.range_sigma;
  noise["peak_photons"] = ds.noise.peak_photons;
  noise["seed"] = ds.noise.seed;
  manifest["noise"] = noise;

  json frames = json::array();
  for (std::size_t t = 0; t < ds.frames.size(); ++t) {
    const FrameMeasurement& f = ds.frames[t];
    json jf;
    jf["pose"] = detail::pose_to_json(f.pose);
    jf["timestamp"] = f.timestamp;
    jf["shape"] = {f.nx, f.ny, f.nt};
    frames.push_back(jf);

    fs::path fdir = dir / "frames" / std::to_string(t);
    fs::create_directories(fdir);
    detail::write_f32(fdir / "histogram.f32", f.histogram);
    detail::write_f32(fdir / "wallpoints.f32", f.wall_points);
    detail::write_f32(fdir / "pointcloud.f32", f.point_cloud);
  }
  manifest["frames"] = frames;

  char digest[24];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(detail::dataset_digest(ds)));
  manifest["digest"] = digest;

  json truth;
  truth["objects"] = json::array();
  for (const auto& traj : ds.truth_objects) {
    json jt = json::array();
    for (const Vec3& w : traj) jt.push_back({w.x(), w.y(), w.z()});
    truth["objects"].push_back(jt);
  }
  truth["poses"] = json::array();
  for (const Pose& p : ds.truth_poses) truth["poses"].push_back(detail::pose_to_json(p));
  {
    std::ofstream out(dir / "truth" / "trajectories");
    out << truth.dump(2) << "\n";
  }

  detail::save_manifest(dir, manifest);
}

inline Dataset read_dataset(const fs::path& dir) {
  json manifest = detail::load_manifest(dir);
  Dataset ds;
  try {
    ds.profile_name = manifest.at("profile").get<std::string>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.fps = manifest.at("fps").get<double>();
    const json& cam = manifest.at("camera");
    auto kvec = cam.at("intrinsics").get<std::vector<double>>();
    if (kvec.size() != 9) throw CorruptManifest("camera intrinsics must have 9 entries");
    std::copy(kvec.begin(), kvec.end(), ds.camera.intrinsics.data());
    ds.camera.nx = cam.at("nx").get<int>();
    ds.camera.ny = cam.at("ny").get<int>();
    ds.camera.n_bins = cam.at("n_bins").get<int>();
    ds.camera.bin_width = cam.at("bin_width").get<double>();
    ds.camera.pulse_sigma = cam.at("pulse_sigma").get<double>();
    ds.camera.falloff = cam.at("falloff").get<std::string>() == "diffuse"
                            ? Falloff::diffuse
                            : Falloff::retroreflective;
    const json& noise = manifest.at("noise");
    ds.noise.signal_scale = noise.at("signal_scale").get<double>();
    ds.noise.ambient_rate = noise.at("ambient_rate").get<double>();
    ds.noise.dark_rate = noise.at("dark_rate").get<double>();
    ds.noise.range_sigma = noise.at("range_sigma").get<double>();
    ds.noise.peak_photons = noise.at("peak_photons").get<double>();
    ds.noise.seed = noise.at("seed").get<std::uint64_t>();

    std::size_t frame_count = manifest.at("frame_count").get<std::size_t>();
    const json& frames = manifest.at("frames");
    if (frames.size() != frame_count)
      throw CorruptManifest("manifest frame_count disagrees with frame list");

    for (std::size_t t = 0; t < frame_count; ++t) {
      const json& jf = frames[t];
      FrameMeasurement f;
      f.pose = detail::pose_from_json(jf.at("pose"));
      f.timestamp = jf.at("timestamp").get<double>();
      auto shape = jf.at("shape").get<std::vector<int>>();
      if (shape.size() != 3) throw CorruptManifest("frame shape must have 3 entries");
      f.nx = shape[0];
      f.ny = shape[1];
      f.nt = shape[2];
      std::size_t pixels = static_cast<std::size_t>(f.nx) * f.ny;
      fs::path fdir = dir / "frames" / std::to_string(t);
      f.histogram = detail::read_f32(fdir / "histogram.f32", pixels * f.nt);
      f.wall_points = detail::read_f32(fdir / "wallpoints.f32", pixels * 3);
      f.point_cloud = detail::read_f32(fdir / "pointcloud.f32", pixels * 3);
      ds.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw CorruptManifest(std::string("manifest field error: ") + e.what());
  }

  char digest[24];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(detail::dataset_digest(ds)));
  if (manifest.contains("digest") && manifest["digest"].get<std::string>() != digest)
    throw CorruptManifest("array content does not match the manifest digest");

  fs::path truth_path = dir / "truth" / "trajectories";
  if (fs::exists(truth_path)) {
    std::ifstream in(truth_path);
    json truth;
    try {
      in >> truth;
      for (const json& jt : truth.at("objects")) {
        std::vector<Vec3> traj;
        for (const json& w : jt) traj.emplace_back(w[0].get<double>(), w[1].get<double>(),
                                                   w[2].get<double>());
        ds.truth_objects.push_back(std::move(traj));
      }
      for (const json& jp : truth.at("poses")) ds.truth_poses.push_back(detail::pose_from_json(jp));
    } catch (const json::exception& e) {
      throw CorruptManifest(std::string("truth parse error: ") + e.what());
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Canonical STIR artifact: manifest + stir.f32

inline void write_stir(const CanonicalSTIR& stir, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "nlosmas-stir";
  manifest["version"] = 1;
  manifest["grid"] = detail::grid_to_json(stir.grid);
  manifest["reference_depth"] = stir.reference_depth;
  manifest["pulse_sigma_v"] = stir.pulse_sigma_v;
  manifest["footprint_overflow"] = stir.footprint_overflow;
  std::vector<float> values(stir.values.begin(), stir.values.end());
  detail::write_f32(dir / "stir.f32", values);
  std::uint64_t h = detail::fnv1a(0xcbf29ce484222325ULL, values);
  char digest[24];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(h));
  manifest["digest"] = digest;
  detail::save_manifest(dir, manifest);
}

inline CanonicalSTIR read_stir(const fs::path& dir) {
  json manifest = detail::load_manifest(dir);
  CanonicalSTIR stir;
  try {
    stir.grid = detail::grid_from_json(manifest.at("grid"));
    stir.reference_depth = manifest.at("reference_depth").get<double>();
    stir.pulse_sigma_v = manifest.at("pulse_sigma_v").get<double>();
    stir.footprint_overflow = manifest.at("footprint_overflow").get<bool>();
  } catch (const json::exception& e) {
    throw CorruptManifest(std::string("stir manifest error: ") + e.what());
  }
  std::vector<float> values = detail::read_f32(dir / "stir.f32", stir.grid.cells());
  stir.values.assign(values.begin(), values.end());
  return stir;
}

// ---------------------------------------------------------------------------
// Volume artifact: manifest + volume.f32 (+ iso-surface CSV export)

inline void write_volume(const AlbedoVolume& volume, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "nlosmas-volume";
  manifest["version"] = 1;
  manifest["grid"] = detail::grid_to_json(volume.grid);
  std::vector<float> values(volume.values.begin(), volume.values.end());
  detail::write_f32(dir / "volume.f32", values);
  detail::save_manifest(dir, manifest);
}

inline AlbedoVolume read_volume(const fs::path& dir) {
  json manifest = detail::load_manifest(dir);
  AlbedoVolume volume;
  try {
    volume.grid = detail::grid_from_json(manifest.at("grid"));
  } catch (const json::exception& e) {
    throw CorruptManifest(std::string("volume manifest error: ") + e.what());
  }
  std::vector<float> values = detail::read_f32(dir / "volume.f32", volume.grid.cells());
  volume.values.assign(values.begin(), values.end());
  return volume;
}

/// Writes voxel centers above `threshold` (fraction of the max) as CSV.
inline void write_isosurface_csv(const AlbedoVolume& volume, const fs::path& path,
                                 double threshold = 0.5) {
  std::ofstream out(path);
  out << "x,y,z,value\n";
  double cut = threshold * volume.max_value();
  for (int ix = 0; ix < volume.grid.x.count; ++ix)
    for (int iy = 0; iy < volume.grid.y.count; ++iy)
      for (int iz = 0; iz < volume.grid.v.count; ++iz) {
        double v = volume.at(ix, iy, iz);
        if (v >= cut && v > 0.0)
          out << volume.grid.x.coord(ix) << "," << volume.grid.y.coord(iy) << ","
              << volume.grid.v.coord(iz) << "," << v << "\n";
      }
}

// ---------------------------------------------------------------------------
// Trajectory metrics

struct TrajectoryMetrics {
  double mean = 0.0, median = 0.0, max = 0.0;
  std::vector<double> per_frame;
};

/// Euclidean per-frame errors; frame indices must already be aligned.
inline TrajectoryMetrics evaluate_trajectory(const std::vector<Vec3>& estimate,
                                             const std::vector<Vec3>& truth) {
  if (estimate.size() != truth.size())
    throw LengthMismatch("evaluate_trajectory: estimate and truth lengths differ");
  TrajectoryMetrics m;
  m.per_frame.reserve(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i)
    m.per_frame.push_back((estimate[i] - truth[i]).norm());
  if (m.per_frame.empty()) return m;
  std::vector<double> sorted = m.per_frame;
  std::sort(sorted.begin(), sorted.end());
  for (double e : m.per_frame) m.mean += e;
  m.mean /= static_cast<double>(m.per_frame.size());
  std::size_t n = sorted.size();
  m.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  m.max = sorted.back();
  return m;
}

}  // namespace nlos
