// gpfield: run sequences into a map snapshot and query, slice, mesh or
// evaluate the result.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <gpfield/config.hpp>
#include <gpfield/eval.hpp>
#include <gpfield/io.hpp>
#include <gpfield/pipeline.hpp>
#include <gpfield/ply.hpp>
#include <gpfield/scene.hpp>
#include <gpfield/snapshot.hpp>

using namespace gpfield;
using json = nlohmann::json;

namespace {

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;
  std::optional<double> voxel_size;
};

struct InputOptions {
  std::string scene;
  std::string frames;
  std::string trajectory;
  int max_frames = -1;
};

void add_config_options(CLI::App* app, ConfigOptions& o) {
  app->add_option("-c,--config", o.file, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", o.overrides, "override a config key, KEY=VALUE (repeatable)");
  app->add_option("--voxel-size", o.voxel_size, "voxel edge length in metres");
}

PipelineConfig build_config(const ConfigOptions& o) {
  PipelineConfig cfg = o.file.empty() ? PipelineConfig{} : load_config(o.file);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects KEY=VALUE, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.voxel_size) cfg.voxel_size = *o.voxel_size;
  for (const std::string& w : cfg.validate()) std::cerr << "warning: " << w << "\n";
  return cfg;
}

void add_input_options(CLI::App* app, InputOptions& o) {
  auto* scene = app->add_option("--scene", o.scene, "synthetic scene description")->check(CLI::ExistingFile);
  auto* frames = app->add_option("--frames", o.frames, "directory of .ply/.xyz frames")->check(CLI::ExistingDirectory);
  app->add_option("--trajectory", o.trajectory, "poses, one line per frame")->check(CLI::ExistingFile)->needs(frames);
  app->add_option("--max-frames", o.max_frames, "stop after this many frames");
  scene->excludes(frames);
}

/// Calls `sink` with every frame of the input in order.
template <class Sink>
void for_each_frame(const InputOptions& in, Sink&& sink) {
  if (!in.scene.empty()) {
    const SceneDescription desc = load_scene(in.scene);
    if (desc.trajectory.empty()) throw InvalidArgument("scene has no trajectory");
    const int n = in.max_frames < 0 ? static_cast<int>(desc.trajectory.size())
                                    : std::min<int>(in.max_frames, static_cast<int>(desc.trajectory.size()));
    for (int i = 0; i < n; ++i) sink(render_frame(desc.scene, desc.sensor, desc.trajectory[i], i));
    return;
  }
  if (in.frames.empty()) throw InvalidArgument("give --scene or --frames");
  const auto files = list_frame_files(in.frames);
  if (files.empty()) throw EmptyInput("no frame files in " + in.frames);
  std::vector<StampedPose> poses;
  if (!in.trajectory.empty()) {
    poses = load_trajectory(in.trajectory);
    if (poses.size() < files.size())
      throw InvalidArgument(std::to_string(files.size()) + " frames but " + std::to_string(poses.size()) +
                            " trajectory poses");
  }
  const std::size_t n =
      in.max_frames < 0 ? files.size() : std::min(files.size(), static_cast<std::size_t>(in.max_frames));
  for (std::size_t i = 0; i < n; ++i) {
    Frame f = load_frame(files[i]);
    if (!poses.empty()) {
      f.pose = poses[i].pose;
      f.timestamp = poses[i].timestamp;
    }
    sink(f);
  }
}

void write_stats(const std::string& path, const std::vector<FrameStats>& stats) {
  if (path == "-") {
    write_stats_csv(std::cout, stats);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  write_stats_csv(out, stats);
}

Vec3 parse_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw InvalidArgument(std::string(what) + " needs three values");
  return {v[0], v[1], v[2]};
}

int parse_axis(const std::string& a) {
  if (a == "x") return 0;
  if (a == "y") return 1;
  if (a == "z") return 2;
  throw InvalidArgument("axis must be x, y or z");
}

/// Bounds of the observed voxels.
Box3 observed_bounds(const GlobalGrid& grid) {
  Box3 box{Vec3::Constant(std::numeric_limits<double>::infinity()),
           Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto* leaf : grid.leaves())
    for (int idx = 0; idx < static_cast<int>(leaf->voxels.size()); ++idx) {
      const VoxelState* v = leaf->get(idx);
      if (!v || !v->observed) continue;
      const Vec3 c = grid_to_world(leaf->coord(idx), grid.voxel_size());
      box.min = box.min.cwiseMin(c);
      box.max = box.max.cwiseMax(c);
    }
  if (!(box.min.array() <= box.max.array()).all()) throw EmptyField("map has no observed voxels");
  return box;
}

/// Surface samples of a scene: lattice points near the zero level projected
/// onto it along the numerical gradient.
std::vector<Vec3> scene_surface_samples(const SyntheticScene& scene, double t, const Box3& region, double spacing) {
  auto sdf = [&](const Vec3& x) { return scene_sdf(scene, x, t); };
  std::vector<Vec3> out;
  for (Vec3 x : lattice_points(region, spacing)) {
    if (std::abs(sdf(x)) > spacing) continue;
    for (int it = 0; it < 8; ++it) {
      Vec3 g;
      for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = 1e-5;
        g[a] = (sdf(x + e) - sdf(x - e)) / 2e-5;
      }
      if (g.norm() < 1e-9) break;
      x -= sdf(x) * g / g.squaredNorm();
    }
    if (std::abs(sdf(x)) < 1e-4) out.push_back(x);
  }
  return out;
}

json query_json(const Vec3& x, const FieldQueryResult& r, int channels) {
  json j{{"x", {x.x(), x.y(), x.z()}},
         {"distance", r.distance},
         {"variance", r.variance},
         {"gradient", {r.gradient.x(), r.gradient.y(), r.gradient.z()}},
         {"signed", r.has_sign}};
  if (channels > 0) {
    j["property"] = std::vector<float>(r.property.begin(), r.property.begin() + channels);
    j["property_variance"] = r.property_variance;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental Gaussian-process distance-field mapping"};
  app.require_subcommand(1);

  // run
  ConfigOptions run_cfg;
  InputOptions run_in;
  std::string run_snapshot, run_mesh, run_stats;
  auto* run = app.add_subcommand("run", "integrate a frame sequence into a map snapshot");
  add_config_options(run, run_cfg);
  add_input_options(run, run_in);
  run->add_option("-o,--snapshot", run_snapshot, "map snapshot to write")->required();
  run->add_option("--mesh", run_mesh, "also export the surface mesh as PLY");
  run->add_option("--stats", run_stats, "per-stage timing CSV ('-' for stdout)");

  // bench
  ConfigOptions bench_cfg;
  InputOptions bench_in;
  std::string bench_out = "-";
  bool bench_lazy = false;
  auto* bench = app.add_subcommand("bench", "integrate a sequence and write the stats CSV");
  add_config_options(bench, bench_cfg);
  add_input_options(bench, bench_in);
  bench->add_option("-o,--out", bench_out, "stats CSV ('-' for stdout)");
  bench->add_flag("--lazy", bench_lazy, "leave global node training to the first query");

  // mesh
  std::string mesh_map, mesh_out;
  auto* mesh = app.add_subcommand("mesh", "export the surface mesh of a snapshot");
  mesh->add_option("-m,--map", mesh_map, "map snapshot")->required()->check(CLI::ExistingFile);
  mesh->add_option("-o,--out", mesh_out, "PLY file")->required();

  // slice
  std::string slice_map, slice_out, slice_axis = "z", slice_scene;
  double slice_offset = 0.0, slice_res = 0.05, slice_time = 0.0;
  std::vector<double> slice_lo, slice_hi;
  auto* slice = app.add_subcommand("slice", "sample the distance field on an axis-aligned plane");
  slice->add_option("-m,--map", slice_map, "map snapshot")->required()->check(CLI::ExistingFile);
  slice->add_option("-o,--out", slice_out, "CSV file")->required();
  slice->add_option("--axis", slice_axis, "plane normal axis: x, y or z")->check(CLI::IsMember({"x", "y", "z"}));
  slice->add_option("--offset", slice_offset, "plane position along the axis (m)");
  slice->add_option("--lo", slice_lo, "lower in-plane corner u v")->expected(2)->required();
  slice->add_option("--hi", slice_hi, "upper in-plane corner u v")->expected(2)->required();
  slice->add_option("--resolution", slice_res, "sample spacing (m)")->check(CLI::PositiveNumber);
  slice->add_option("--scene", slice_scene, "scene description for an error column")->check(CLI::ExistingFile);
  slice->add_option("--time", slice_time, "scene time for the oracle");

  // query
  std::string query_map, query_points;
  bool query_json_out = false;
  auto* query = app.add_subcommand("query", "distance, gradient and properties at points");
  query->add_option("-m,--map", query_map, "map snapshot")->required()->check(CLI::ExistingFile);
  query->add_option("-p,--points", query_points, "xyz file (default: stdin)")->check(CLI::ExistingFile);
  query->add_flag("--json", query_json_out, "one JSON object per line instead of CSV");

  // eval
  std::string eval_map, eval_scene, eval_reference;
  double eval_res = 0.05, eval_band_min = 0.05, eval_band_max = 0.5, eval_time = 0.0, eval_threshold = -1.0;
  std::vector<double> eval_lo, eval_hi;
  auto* eval = app.add_subcommand("eval", "distance RMSE and mesh Chamfer against ground truth");
  eval->add_option("-m,--map", eval_map, "map snapshot")->required()->check(CLI::ExistingFile);
  auto* eval_scene_opt = eval->add_option("--scene", eval_scene, "scene description (SDF oracle)")->check(CLI::ExistingFile);
  auto* eval_ref_opt =
      eval->add_option("--reference", eval_reference, "reference point cloud for Chamfer")->check(CLI::ExistingFile);
  eval->add_option("--time", eval_time, "scene time for the oracle");
  eval->add_option("--resolution", eval_res, "RMSE lattice spacing (m)")->check(CLI::PositiveNumber);
  eval->add_option("--band-min", eval_band_min, "ignore lattice points closer to the surface (m)");
  eval->add_option("--band-max", eval_band_max, "ignore lattice points farther from the surface (m)");
  eval->add_option("--lo", eval_lo, "region lower corner x y z (default: observed bounds)")->expected(3);
  eval->add_option("--hi", eval_hi, "region upper corner x y z")->expected(3);
  eval->add_option("--threshold", eval_threshold, "completeness distance (default: one voxel)");
  eval_scene_opt->excludes(eval_ref_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.what()}}.dump() << "\n";
    return e.get_exit_code();
  }

  try {
    if (*run || *bench) {
      const bool is_run = run->parsed();
      PipelineConfig cfg = build_config(is_run ? run_cfg : bench_cfg);
      if (!is_run && !bench_lazy) cfg.eager_global_training = true;
      Mapper mapper(cfg);
      std::vector<FrameStats> stats;
      for_each_frame(is_run ? run_in : bench_in, [&](const Frame& f) { stats.push_back(mapper.integrate_frame(f)); });
      if (stats.empty()) throw EmptyInput("no frames integrated");
      if (is_run) {
        save_snapshot(run_snapshot, mapper);
        if (!run_mesh.empty()) export_ply(mapper.mesh(), run_mesh);
        if (!run_stats.empty()) write_stats(run_stats, stats);
        double total = 0.0;
        for (const FrameStats& s : stats) total += s.total_ms;
        std::cerr << "integrated " << stats.size() << " frames in " << total / 1000.0 << " s, "
                  << mapper.grid().voxel_count() << " voxels, " << mapper.mesher().triangle_count() << " triangles, "
                  << mapper.field().node_count() << " field nodes\n";
      } else {
        write_stats(bench_out, stats);
      }
    } else if (*mesh) {
      const Mapper mapper = restore_mapper(load_snapshot(mesh_map));
      export_ply(mapper.mesh(), mesh_out);
    } else if (*slice) {
      const Mapper mapper = restore_mapper(load_snapshot(slice_map));
      std::optional<SceneDescription> desc;
      DistanceOracle oracle;
      if (!slice_scene.empty()) {
        desc = load_scene(slice_scene);
        oracle = [&](const Vec3& x) { return scene_sdf(desc->scene, x, slice_time); };
      }
      const Slice s = compute_slice(mapper.field(), &mapper.grid(), parse_axis(slice_axis), slice_offset,
                                    {slice_lo[0], slice_lo[1]}, {slice_hi[0], slice_hi[1]}, slice_res,
                                    desc ? &oracle : nullptr);
      export_slice(s, slice_out);
    } else if (*query) {
      const Mapper mapper = restore_mapper(load_snapshot(query_map));
      Frame pts;
      if (query_points.empty()) {
        pts = read_xyz_frame(std::cin);
      } else {
        pts = load_xyz_frame(query_points);
      }
      const int channels = mapper.config().channels();
      const auto results = mapper.field().query_batch(pts.points, &mapper.grid());
      std::cout.precision(9);
      if (!query_json_out) {
        std::cout << "x,y,z,distance,variance,gradient_x,gradient_y,gradient_z,signed";
        for (int c = 0; c < channels; ++c) std::cout << ",property_" << c;
        if (channels > 0) std::cout << ",property_variance";
        std::cout << "\n";
      }
      for (std::size_t n = 0; n < results.size(); ++n) {
        const Vec3& x = pts.points[n];
        const FieldQueryResult& r = results[n];
        if (query_json_out) {
          std::cout << query_json(x, r, channels).dump() << "\n";
          continue;
        }
        std::cout << x.x() << ',' << x.y() << ',' << x.z() << ',' << r.distance << ',' << r.variance << ','
                  << r.gradient.x() << ',' << r.gradient.y() << ',' << r.gradient.z() << ',' << (r.has_sign ? 1 : 0);
        for (int c = 0; c < channels; ++c) std::cout << ',' << r.property[c];
        if (channels > 0) std::cout << ',' << r.property_variance;
        std::cout << "\n";
      }
    } else if (*eval) {
      if (eval_scene.empty() && eval_reference.empty()) throw InvalidArgument("give --scene or --reference");
      const Mapper mapper = restore_mapper(load_snapshot(eval_map));
      const double vs = mapper.config().voxel_size;
      Box3 region;
      if (!eval_lo.empty() || !eval_hi.empty()) {
        region = {parse_vec3(eval_lo, "--lo"), parse_vec3(eval_hi, "--hi")};
      } else {
        region = observed_bounds(mapper.grid());
        region.min.array() -= eval_band_max;
        region.max.array() += eval_band_max;
      }
      const TriangleMesh m = mapper.mesh();
      const double threshold = eval_threshold > 0.0 ? eval_threshold : vs;
      json out;
      std::vector<Vec3> reference;
      if (!eval_scene.empty()) {
        const SceneDescription desc = load_scene(eval_scene);
        const DistanceOracle oracle = [&](const Vec3& x) { return scene_sdf(desc.scene, x, eval_time); };
        const RmseResult r =
            eval_distance_rmse(mapper.field(), oracle, region, eval_res, eval_band_min, eval_band_max);
        out["rmse"] = r.rmse;
        out["max_error"] = r.max_error;
        out["samples"] = r.samples;
        reference = scene_surface_samples(desc.scene, eval_time, region, vs / 2);
      } else {
        reference = load_frame(eval_reference).points;
      }
      const ChamferResult ch = eval_chamfer(m.vertices, reference, threshold);
      out["chamfer"] = ch.chamfer;
      out["accuracy"] = ch.accuracy;
      out["completion"] = ch.completion;
      out["completeness"] = ch.completeness;
      out["reference_points"] = reference.size();
      out["mesh_vertices"] = m.vertices.size();
      std::cout << out.dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
