// Command-line surface for the NLOS motion-induced aperture sampling
// pipelines: simulate, precompute-stir, track, localize, reconstruct,
// evaluate, plot.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "nlos/config.hpp"
#include "nlos/dataset.hpp"
#include "nlos/localization.hpp"
#include "nlos/reconstruction.hpp"
#include "nlos/svg.hpp"
#include "nlos/tracking.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nlos;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string profile;
  std::string out;
};

RunConfig resolve_config(const GlobalFlags& g, bool need_config) {
  RunConfig rc;
  if (!g.config_path.empty()) {
    rc = load_run_config(g.config_path);
  } else if (need_config) {
    throw ConfigError("this command requires --config");
  }
  if (!g.profile.empty()) rc.profile = profile_by_name(g.profile);
  if (g.seed) {
    rc.seed = *g.seed;
    rc.filter.seed = *g.seed;
    if (rc.scene) rc.scene->noise.seed = *g.seed;
  }
  if (g.workers) rc.workers = *g.workers;
  return rc;
}

void add_global_flags(CLI::App* cmd, GlobalFlags& g) {
  cmd->add_option("--config", g.config_path, "run configuration (JSON)")
      ->envname("NLOSMAS_CONFIG");
  cmd->add_option("--seed", g.seed, "master seed override")->envname("NLOSMAS_SEED");
  cmd->add_option("--workers", g.workers, "worker threads (0 = auto)")
      ->envname("NLOSMAS_WORKERS");
  cmd->add_option("--profile", g.profile, "sensor profile name")
      ->envname("NLOSMAS_PROFILE");
  cmd->add_option("--out", g.out, "output path")->envname("NLOSMAS_OUT")->required();
}

void write_track_outputs(const TrackResult& result, const fs::path& out,
                         bool dump_particles) {
  fs::create_directories(out);
  json traj;
  traj["type"] = "objects";
  traj["skip"] = result.skip;
  traj["zero_weight_frames"] = result.zero_weight_frames;
  json frames = json::array();
  for (std::size_t t = 0; t < result.estimates.size(); ++t) {
    json jf;
    jf["t"] = result.skip + static_cast<int>(t);
    json objs = json::array();
    for (const Vec3& e : result.estimates[t]) objs.push_back({e.x(), e.y(), e.z()});
    jf["objects"] = objs;
    jf["object_weights"] = result.object_weights[result.skip + t];
    frames.push_back(jf);
  }
  traj["frames"] = frames;
  std::ofstream(out / "trajectory.json") << traj.dump(2) << "\n";

  std::ofstream csv(out / "trajectory.csv");
  csv << "t,object,x,y,z\n";
  char line[160];
  for (std::size_t t = 0; t < result.estimates.size(); ++t)
    for (std::size_t m = 0; m < result.estimates[t].size(); ++m) {
      const Vec3& e = result.estimates[t][m];
      std::snprintf(line, sizeof line, "%d,%zu,%.17g,%.17g,%.17g\n",
                    result.skip + static_cast<int>(t), m, e.x(), e.y(), e.z());
      csv << line;
    }

  if (dump_particles) {
    fs::path dir = out / "particles";
    fs::create_directories(dir);
    for (std::size_t t = 0; t < result.snapshots.size(); ++t) {
      const ParticleSet& p = result.snapshots[t];
      std::vector<float> flat(p.states.begin(), p.states.end());
      detail::write_f32(dir / (std::to_string(t) + ".f32"), flat);
    }
  }
}

int cmd_simulate(const GlobalFlags& g) {
  RunConfig rc = resolve_config(g, true);
  Dataset ds = simulate_from_config(rc);
  write_dataset(ds, g.out);
  std::cout << "wrote " << ds.frame_count() << " frames to " << g.out << "\n";
  return 0;
}

int cmd_precompute_stir(const GlobalFlags& g, const std::string& object_path) {
  RunConfig rc = resolve_config(g, false);
  ObjectModel obj = object_from_file(object_path);
  CanonicalSTIR stir =
      precompute_canonical_stir(obj, rc.resolved_stir_grid(), rc.profile.camera.pulse_sigma,
                                rc.stir_reference_depth, rc.workers);
  write_stir(stir, g.out);
  std::cout << "wrote canonical response (" << obj.points.size() << " points"
            << (stir.footprint_overflow ? ", footprint cropped" : "") << ") to " << g.out
            << "\n";
  return 0;
}

int cmd_track(const GlobalFlags& g, const std::string& dataset_path,
              const std::vector<std::string>& stir_paths, bool dump_particles) {
  RunConfig rc = resolve_config(g, true);
  Dataset ds = read_dataset(dataset_path);
  std::vector<CanonicalSTIR> stirs;
  for (const std::string& p : stir_paths) stirs.push_back(read_stir(p));
  TrackConfig cfg;
  cfg.filter = rc.filter;
  cfg.estimator = rc.estimator;
  cfg.skip = rc.skip;
  cfg.kmeans_clusters = rc.kmeans_clusters;
  cfg.workers = rc.workers;
  TrackResult result = track(ds, stirs, cfg);
  write_track_outputs(result, g.out, dump_particles);
  std::cout << "tracked " << stirs.size() << " object(s) over " << ds.frame_count()
            << " frames -> " << g.out << "\n";
  return 0;
}

int cmd_localize(const GlobalFlags& g, const std::string& dataset_path,
                 const std::string& stir_path) {
  RunConfig rc = resolve_config(g, true);
  Dataset ds = read_dataset(dataset_path);
  CanonicalSTIR stir = read_stir(stir_path);
  LocalizeConfig cfg;
  cfg.filter = rc.filter;
  cfg.workers = rc.workers;
  LocalizationResult result = localize(ds, stir, cfg);

  fs::create_directories(g.out);
  json traj;
  traj["type"] = "camera";
  traj["zero_weight_frames"] = result.zero_weight_frames;
  json frames = json::array();
  for (std::size_t t = 0; t < result.estimates.size(); ++t) {
    json jf;
    jf["t"] = t;
    jf["camera"] = {result.estimates[t].x(), result.estimates[t].y()};
    jf["z"] = result.camera_z[t];
    frames.push_back(jf);
  }
  traj["frames"] = frames;
  std::ofstream(fs::path(g.out) / "camera_trajectory.json") << traj.dump(2) << "\n";

  std::ofstream csv(fs::path(g.out) / "camera_trajectory.csv");
  csv << "t,x,y,z\n";
  char line[128];
  for (std::size_t t = 0; t < result.estimates.size(); ++t) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", t,
                  result.estimates[t].x(), result.estimates[t].y(), result.camera_z[t]);
    csv << line;
  }
  std::cout << "localized camera over " << ds.frame_count() << " frames -> " << g.out
            << "\n";
  return 0;
}

int cmd_reconstruct(const GlobalFlags& g, const std::string& dataset_path) {
  RunConfig rc = resolve_config(g, false);
  Dataset ds = read_dataset(dataset_path);
  GridSpec vgrid = rc.volume_grid
                       ? *rc.volume_grid
                       : GridSpec{{-0.75, 0.75, 30}, {-0.75, 0.75, 30}, {0.4, 1.9, 30}};
  SampleCloud cloud = accumulate(ds, rc.resolved_stir_grid().v, rc.resolved_cell());
  AlbedoVolume vol = backproject(cloud, vgrid, ds.camera.falloff, rc.workers);
  write_volume(vol, g.out);
  write_isosurface_csv(vol, fs::path(g.out) / "isosurface.csv", 0.5);
  std::cout << "fused " << cloud.size() << " samples into " << vgrid.x.count << "x"
            << vgrid.y.count << "x" << vgrid.v.count << " volume -> " << g.out << "\n";
  return 0;
}

int cmd_evaluate(const GlobalFlags& g, const std::string& estimate_path,
                 const std::string& dataset_path) {
  std::ifstream in(estimate_path);
  if (!in) throw MissingArray("cannot open estimate: " + estimate_path);
  json traj;
  try {
    in >> traj;
  } catch (const json::exception& e) {
    throw CorruptManifest("estimate parse error: " + std::string(e.what()));
  }
  Dataset ds = read_dataset(dataset_path);

  json report;
  if (traj.at("type") == "objects") {
    int skip = traj.at("skip").get<int>();
    std::size_t m_count = ds.truth_objects.size();
    report["objects"] = json::array();
    for (std::size_t m = 0; m < m_count; ++m) {
      std::vector<Vec3> est, truth;
      for (const json& jf : traj.at("frames")) {
        const json& o = jf.at("objects").at(m);
        est.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
      }
      for (std::size_t t = skip; t < ds.truth_objects[m].size(); ++t)
        truth.push_back(ds.truth_objects[m][t]);
      TrajectoryMetrics metrics = evaluate_trajectory(est, truth);
      json jm;
      jm["mean"] = metrics.mean;
      jm["median"] = metrics.median;
      jm["max"] = metrics.max;
      jm["per_frame"] = metrics.per_frame;
      report["objects"].push_back(jm);
    }
  } else {
    std::vector<Vec3> est, truth;
    std::vector<double> z_err;
    for (const json& jf : traj.at("frames")) {
      std::size_t t = jf.at("t").get<std::size_t>();
      est.emplace_back(jf.at("camera")[0].get<double>(), jf.at("camera")[1].get<double>(),
                       0.0);
      const Vec3& tp = ds.truth_poses[t].translation;
      truth.emplace_back(tp.x(), tp.y(), 0.0);
      z_err.push_back(std::abs(jf.at("z").get<double>() - tp.z()));
    }
    TrajectoryMetrics metrics = evaluate_trajectory(est, truth);
    report["camera"] = {{"mean", metrics.mean},
                        {"median", metrics.median},
                        {"max", metrics.max},
                        {"per_frame", metrics.per_frame},
                        {"z_max_error", *std::max_element(z_err.begin(), z_err.end())}};
  }
  std::ofstream(g.out) << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_plot(const GlobalFlags& g, const std::string& input,
             const std::string& dataset_path, const std::string& volume_path,
             int slice) {
  if (!volume_path.empty()) {
    AlbedoVolume vol = read_volume(volume_path);
    int iz = slice >= 0 ? slice : vol.grid.v.count / 2;
    if (iz >= vol.grid.v.count) throw ConfigError("slice index out of range");
    std::vector<double> cells(static_cast<std::size_t>(vol.grid.x.count) *
                              vol.grid.y.count);
    for (int i = 0; i < vol.grid.x.count; ++i)
      for (int j = 0; j < vol.grid.y.count; ++j)
        cells[static_cast<std::size_t>(i) * vol.grid.y.count + j] = vol.at(i, j, iz);
    char title[64];
    std::snprintf(title, sizeof title, "z = %.3f m", vol.grid.v.coord(iz));
    write_svg_heatmap(cells, vol.grid.x.count, vol.grid.y.count, g.out, title);
    std::cout << "wrote heatmap slice -> " << g.out << "\n";
    return 0;
  }

  std::ifstream in(input);
  if (!in) throw MissingArray("cannot open trajectory: " + input);
  json traj;
  try {
    in >> traj;
  } catch (const json::exception& e) {
    throw CorruptManifest("trajectory parse error: " + std::string(e.what()));
  }

  std::vector<SvgSeries> series;
  const char* colors[] = {"#1464c8", "#1ca04b", "#c85014", "#8432b4"};
  if (traj.at("type") == "objects") {
    std::size_t m_count = traj.at("frames").empty()
                              ? 0
                              : traj.at("frames")[0].at("objects").size();
    for (std::size_t m = 0; m < m_count; ++m) {
      SvgSeries s;
      s.label = "object " + std::to_string(m);
      s.color = colors[m % 4];
      for (const json& jf : traj.at("frames"))
        s.points.emplace_back(jf.at("objects")[m][0].get<double>(),
                              jf.at("objects")[m][1].get<double>());
      series.push_back(std::move(s));
    }
  } else {
    SvgSeries s;
    s.label = "camera";
    s.color = colors[0];
    for (const json& jf : traj.at("frames"))
      s.points.emplace_back(jf.at("camera")[0].get<double>(),
                            jf.at("camera")[1].get<double>());
    series.push_back(std::move(s));
  }
  if (!dataset_path.empty()) {
    Dataset ds = read_dataset(dataset_path);
    if (traj.at("type") == "objects") {
      for (std::size_t m = 0; m < ds.truth_objects.size(); ++m) {
        SvgSeries s;
        s.label = "truth " + std::to_string(m);
        s.color = "#222222";
        for (const Vec3& w : ds.truth_objects[m]) s.points.emplace_back(w.x(), w.y());
        series.push_back(std::move(s));
      }
    } else {
      SvgSeries s;
      s.label = "truth";
      s.color = "#222222";
      for (const Pose& p : ds.truth_poses)
        s.points.emplace_back(p.translation.x(), p.translation.y());
      series.push_back(std::move(s));
    }
  }
  write_svg_trajectories(series, g.out);
  std::cout << "wrote trajectory plot -> " << g.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-line-of-sight imaging with motion-induced aperture sampling"};
  app.require_subcommand(1);

  GlobalFlags g_sim, g_stir, g_track, g_loc, g_rec, g_eval, g_plot;
  std::string object_path, dataset_path, estimate_path, volume_path, input_path;
  std::vector<std::string> stir_paths;
  std::string loc_stir;
  bool dump_particles = false;
  int slice = -1;

  CLI::App* sim = app.add_subcommand("simulate", "render a dataset from a scene config");
  add_global_flags(sim, g_sim);

  CLI::App* pre = app.add_subcommand("precompute-stir",
                                     "rasterize an object's canonical response");
  add_global_flags(pre, g_stir);
  pre->add_option("--object", object_path, "object shape file (JSON)")->required();

  CLI::App* trk = app.add_subcommand("track", "run the tracking filter");
  add_global_flags(trk, g_track);
  trk->add_option("--dataset", dataset_path, "dataset directory")->required();
  trk->add_option("--stir", stir_paths, "canonical response directory (repeatable)")
      ->required();
  trk->add_flag("--dump-particles", dump_particles, "write per-frame particle arrays");

  CLI::App* loc = app.add_subcommand("localize", "recover the camera trajectory");
  add_global_flags(loc, g_loc);
  loc->add_option("--dataset", dataset_path, "dataset directory")->required();
  loc->add_option("--stir", loc_stir, "canonical response of the landmark")->required();

  CLI::App* rec = app.add_subcommand("reconstruct", "fused filtered backprojection");
  add_global_flags(rec, g_rec);
  rec->add_option("--dataset", dataset_path, "dataset directory")->required();

  CLI::App* eval = app.add_subcommand("evaluate", "trajectory error metrics");
  add_global_flags(eval, g_eval);
  eval->add_option("--estimate", estimate_path, "trajectory JSON")->required();
  eval->add_option("--dataset", dataset_path, "dataset with ground truth")->required();

  CLI::App* plt = app.add_subcommand("plot", "emit SVG plots");
  add_global_flags(plt, g_plot);
  plt->add_option("--trajectory", input_path, "trajectory JSON to plot");
  plt->add_option("--dataset", dataset_path, "overlay dataset ground truth");
  plt->add_option("--volume", volume_path, "volume artifact to slice");
  plt->add_option("--slice", slice, "z slice index (default: middle)");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(g_sim);
    if (pre->parsed()) return cmd_precompute_stir(g_stir, object_path);
    if (trk->parsed()) return cmd_track(g_track, dataset_path, stir_paths, dump_particles);
    if (loc->parsed()) return cmd_localize(g_loc, dataset_path, loc_stir);
    if (rec->parsed()) return cmd_reconstruct(g_rec, dataset_path);
    if (eval->parsed()) return cmd_evaluate(g_eval, estimate_path, dataset_path);
    if (plt->parsed()) return cmd_plot(g_plot, input_path, dataset_path, volume_path, slice);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "{\"error\":\"UsageError\",\"category\":2,\"message\":\""
              << e.what() << "\"}\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "{\"error\":\"" << e.name() << "\",\"category\":"
              << static_cast<int>(e.category()) << ",\"message\":" << json(e.what()).dump()
              << "}\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"InternalError\",\"category\":4,\"message\":"
              << json(e.what()).dump() << "}\n";
    return 4;
  }
  return 0;
}
