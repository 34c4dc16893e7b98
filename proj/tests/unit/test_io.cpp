#include <doctest.h>

#include <fstream>
#include <sstream>

#include <gpfield/config.hpp>
#include <gpfield/io.hpp>
#include <gpfield/pipeline.hpp>
#include <gpfield/ply.hpp>
#include <gpfield/snapshot.hpp>

#include "test_support.hpp"

using namespace gpfield;
using gpfield::testing::Gen;

TEST_CASE("config defaults and derived parameters") {
  const PipelineConfig c;
  CHECK(c.voxel_size == 0.05);
  CHECK(c.local_kernel().length_scale == doctest::Approx(0.15));
  CHECK(c.local_kernel().d_max == doctest::Approx(0.45));
  CHECK(c.global_field().nodes_per_query == 3);
  CHECK(c.global_field().lambda == 100.0);
  CHECK(c.channels() == 0);
  CHECK(c.validate().empty());
}

TEST_CASE("config text round trip") {
  PipelineConfig c;
  c.voxel_size = 0.1;
  c.length_scale = 0.27;
  c.noise2 = 3.5e-4;
  c.nodes_per_query = 5;
  c.gradient_mode = GradientMode::Average;
  c.property_kind = PropertyKind::Rgb;
  const PipelineConfig back = parse_config(format_config(c));
  CHECK(format_config(back) == format_config(c));
  CHECK(back.length_scale == c.length_scale);
  CHECK(back.channels() == 3);
}

TEST_CASE("config parsing errors and overrides") {
  const PipelineConfig c = parse_config("# comment\n  voxel_size = 0.2  \nQ=4\n\nlambda=50 # inline\n");
  CHECK(c.voxel_size == 0.2);
  CHECK(c.nodes_per_query == 4);
  CHECK(c.lambda == 50.0);
  PipelineConfig base;
  base.sign_radius = 9;
  CHECK(parse_config("Q=2", base).sign_radius == 9);

  CHECK_THROWS_AS(parse_config("voxel_size"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("nope=1"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("Q=2.5"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("voxel_size=abc"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("gradient_mode=maybe"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("property_kind=hsv"), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), IoFailure);

  PipelineConfig bad;
  bad.voxel_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = PipelineConfig{};
  bad.length_scale = 0.5;
  CHECK(bad.validate().size() == 1);
  bad.nodes_per_query = 0;
  CHECK_THROWS_AS(Mapper{bad}, InvalidArgument);
}

TEST_CASE("xyz frames") {
  std::istringstream in("# header\n0 0 0\n1 2 3\n\n4.5 5 6\n");
  const Frame f = read_xyz_frame(in);
  REQUIRE(f.points.size() == 3);
  CHECK(f.channels == 0);
  CHECK(f.points[2].x() == 4.5);

  std::istringstream rgb("0 0 0 0.1 0.2 0.3\n1 1 1 0.4 0.5 0.6\n");
  const Frame g = read_xyz_frame(rgb);
  CHECK(g.channels == 3);
  CHECK(g.properties[1][2] == doctest::Approx(0.6f));

  std::ostringstream out;
  write_xyz_frame(out, g);
  std::istringstream again(out.str());
  const Frame h = read_xyz_frame(again);
  REQUIRE(h.points.size() == 2);
  CHECK(h.points[1] == g.points[1]);
  CHECK(h.properties[0] == g.properties[0]);

  std::istringstream bad1("0 0\n");
  CHECK_THROWS_AS(read_xyz_frame(bad1), IoFailure);
  std::istringstream bad2("0 0 0\n0 0 0 1\n");
  CHECK_THROWS_AS(read_xyz_frame(bad2), IoFailure);
  std::istringstream bad3("0 x 0\n");
  CHECK_THROWS_AS(read_xyz_frame(bad3), IoFailure);
  CHECK_THROWS_AS(load_frame("/nonexistent/frame.xyz"), IoFailure);
}

TEST_CASE("ply frames and directory listing") {
  const auto dir = testing::scratch_dir("io_frames");
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  export_ply(m, dir / "b.ply");
  {
    std::ofstream(dir / "a.xyz") << "1 1 1\n";
    std::ofstream(dir / "ignored.csv") << "x\n";
  }
  const auto files = list_frame_files(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.xyz");
  const Frame f = load_frame(files[1]);
  CHECK(f.points.size() == 3);
  CHECK_THROWS_AS(list_frame_files(dir / "missing"), IoFailure);
}

TEST_CASE("trajectory round trip") {
  Gen g(91);
  std::vector<StampedPose> poses;
  for (int n = 0; n < 20; ++n) poses.push_back({n * 0.1, Pose{g.rotation(), g.point(-3, 3)}});
  std::ostringstream out;
  write_trajectory(out, poses);
  std::istringstream in(out.str());
  const auto back = read_trajectory(in);
  REQUIRE(back.size() == poses.size());
  for (std::size_t n = 0; n < poses.size(); ++n) {
    CHECK(back[n].timestamp == doctest::Approx(poses[n].timestamp));
    CHECK((back[n].pose.rotation - poses[n].pose.rotation).norm() < 1e-9);
    CHECK((back[n].pose.translation - poses[n].pose.translation).norm() < 1e-9);
  }
  std::istringstream short_line("0 1 2 3 0 0 0\n");
  CHECK_THROWS_AS(read_trajectory(short_line), IoFailure);
  std::istringstream zero_q("0 1 2 3 0 0 0 0\n");
  CHECK_THROWS_AS(read_trajectory(zero_q), IoFailure);
}

TEST_CASE("snapshot round trip") {
  PipelineConfig cfg;
  cfg.voxel_size = 0.1;
  cfg.property_kind = PropertyKind::Intensity;
  GlobalGrid grid(cfg.voxel_size);
  Gen g(93);
  for (int n = 0; n < 3000; ++n) {
    VoxelState s;
    s.distance = static_cast<float>(g.uniform(-0.3, 0.3));
    s.weight = static_cast<float>(g.uniform(0.1, 100));
    s.property = {static_cast<float>(g.uniform(0, 1)), 0.0f, 0.0f};
    s.property_weight = static_cast<float>(g.uniform(0, 1));
    s.observed = g.coin();
    grid.set(g.coord(-60, 60), s);
  }
  CrossingLists lists;
  lists[GridCoord{0, 0, 0}] = {Vec3(0.1, 0.2, 0.3), Vec3(0.4, 0.5, 0.6)};
  lists[GridCoord{-8, 8, 0}] = {Vec3(-0.5, 0.9, 0.1)};

  const auto path = testing::scratch_dir("snapshot") / "map.gpf";
  save_snapshot(path, cfg, grid, lists);
  const Snapshot snap = load_snapshot(path);
  CHECK(format_config(snap.config) == format_config(cfg));
  CHECK(snap.grid.voxel_size() == cfg.voxel_size);
  CHECK(snap.grid.voxel_count() == grid.voxel_count());
  for (const auto* leaf : grid.leaves())
    for (int idx = 0; idx < static_cast<int>(leaf->voxels.size()); ++idx) {
      const VoxelState* a = leaf->get(idx);
      if (!a) continue;
      const GridCoord c = leaf->coord(idx);
      const VoxelState* b = snap.grid.find(c);
      REQUIRE(b != nullptr);
      CHECK(*a == *b);
    }
  CHECK(snap.crossings == lists);
}

TEST_CASE("snapshot failures") {
  const auto dir = testing::scratch_dir("snapshot_bad");
  CHECK_THROWS_AS(load_snapshot(dir / "missing.gpf"), IoFailure);
  std::ofstream(dir / "foreign.gpf") << "NOTAMAP!0000000000";
  CHECK_THROWS_AS(load_snapshot(dir / "foreign.gpf"), IoFailure);

  GlobalGrid grid(0.05);
  grid.set({1, 2, 3}, VoxelState{});
  save_snapshot(dir / "good.gpf", PipelineConfig{}, grid, {});
  std::ifstream in(dir / "good.gpf", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir / "cut.gpf", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(load_snapshot(dir / "cut.gpf"), IoFailure);
  CHECK_THROWS_AS(save_snapshot(dir / "no" / "such" / "dir.gpf", PipelineConfig{}, grid, {}), IoFailure);
}
