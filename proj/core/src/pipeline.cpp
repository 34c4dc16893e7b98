#include "gpfield/pipeline.hpp"

#include <chrono>
#include <ostream>

#include <tbb/parallel_for.h>

#include "gpfield/fusion.hpp"
#include "gpfield/test_points.hpp"

namespace gpfield {

double FrameStats::stage_sum() const {
  double s = 0.0;
  for (double v : stage_ms) s += v;
  return s;
}

void write_stats_csv(std::ostream& out, const std::vector<FrameStats>& stats) {
  out << "frame,stage,ms,points,voxels,leaves\n";
  for (const FrameStats& s : stats) {
    auto row = [&](std::string_view stage, double ms) {
      out << s.frame << ',' << stage << ',' << ms << ',' << s.test_points << ',' << s.voxels_fused << ','
          << s.leaves_active << '\n';
    };
    for (int i = 0; i < static_cast<int>(Stage::kCount); ++i) row(kStageNames[i], s.stage_ms[i]);
    row("total", s.total_ms);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

[[noreturn]] void rethrow_with_frame(const Error& e, std::size_t frame) {
  const std::string msg = "frame " + std::to_string(frame) + ": " + e.what();
  if (e.kind() == "FactorizationFailure") throw FactorizationFailure(msg);
  if (e.kind() == "EmptyFrame") throw EmptyFrame(msg);
  if (e.kind() == "EmptyField") throw EmptyField(msg);
  if (e.kind() == "EmptyInput") throw EmptyInput(msg);
  if (e.kind() == "IoFailure") throw IoFailure(msg);
  if (e.kind() == "InvalidArgument") throw InvalidArgument(msg);
  throw Error(e.kind(), msg);
}

}  // namespace

Mapper::Mapper(PipelineConfig cfg)
    : cfg_(cfg), grid_(cfg.voxel_size), mesher_(cfg.channels()), field_(cfg.global_field()) {
  cfg_.validate();
}

FrameStats Mapper::integrate_frame(const Frame& frame) {
  FrameStats stats;
  stats.frame = frames_;
  stats.points = frame.points.size();
  try {
    if (!frame.pose.is_valid()) throw InvalidArgument("pose rotation is not a proper rotation");
    const auto start = Clock::now();
    auto stage = [&](Stage s, Clock::time_point since) { stats.stage_ms[static_cast<int>(s)] = elapsed_ms(since); };

    auto t = Clock::now();
    Frame f = frame;
    if (cfg_.channels() == 0) {
      f.properties.clear();
      f.channels = 0;
    } else {
      f.channels = cfg_.channels();
    }
    const VoxelizedCloud cloud = voxelize(f, cfg_.voxel_size);
    stats.voxels = cloud.size();
    stage(Stage::Voxelize, t);

    t = Clock::now();
    const LocalField local = LocalField::build(cloud, cfg_.local_kernel());
    stage(Stage::LocalField, t);

    t = Clock::now();
    const TestPointConfig tp_cfg = cfg_.test_points();
    const Vec3 origin = frame.pose.translation;
    const auto normals = estimate_normals(cloud.centers, origin, tp_cfg.normal_neighbors);
    std::vector<TestPoint> points = generate_test_points(origin, cloud.coords, grid_, tp_cfg, cloud.means, normals);
    if (tp_cfg.normal_reach > 0) {
      merge_test_points(points, normal_augment(cloud.coords, normals, tp_cfg.normal_reach, cfg_.voxel_size));
    }
    stats.test_points = points.size();
    stage(Stage::TestPoints, t);

    t = Clock::now();
    std::vector<FusionSample> samples(points.size());
    tbb::parallel_for(std::size_t{0}, points.size(), [&](std::size_t n) {
      const LocalInference inf = local.query(points[n].position);
      FusionSample& s = samples[n];
      s.coord = points[n].coord;
      s.distance = points[n].sign * inf.distance;
      s.variance = inf.variance;
      s.property = inf.property;
      s.property_variance = inf.property_variance;
    });
    stage(Stage::Inference, t);

    t = Clock::now();
    const FusionStats fused = fuse_frame(grid_, samples, cfg_.fusion());
    stats.voxels_fused = fused.voxels_touched;
    stats.new_leaves = fused.new_leaves;
    std::vector<GridCoord> active;
    active.reserve(grid_.active_leaves().size());
    for (const auto* leaf : grid_.active_leaves()) active.push_back(leaf->origin);
    stats.leaves_active = active.size();
    stage(Stage::Fusion, t);

    t = Clock::now();
    const std::size_t vertices_before = mesher_.vertex_count();
    const CrossingLists crossings = mesher_.update(grid_, active);
    stats.mesh_vertex_delta = static_cast<long>(mesher_.vertex_count()) - static_cast<long>(vertices_before);
    stage(Stage::Meshing, t);

    t = Clock::now();
    field_.update(crossings);
    grid_.clear_active();
    stage(Stage::GlobalUpdate, t);

    if (cfg_.eager_global_training) {
      t = Clock::now();
      field_.train_all();
      stage(Stage::GlobalTrain, t);
    }
    stats.total_ms = elapsed_ms(start);
  } catch (const Error& e) {
    rethrow_with_frame(e, frames_);
  }
  ++frames_;
  return stats;
}

void Mapper::restore(GlobalGrid grid, const CrossingLists& crossings) {
  grid_ = std::move(grid);
  mesher_ = SurfaceMesher(cfg_.channels());
  mesher_.rebuild(grid_);
  field_ = GlobalField(cfg_.global_field());
  field_.update(crossings);
  grid_.clear_active();
}

}  // namespace gpfield
