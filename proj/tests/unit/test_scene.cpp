#include <doctest.h>

#include <cmath>

#include <gpfield/scene.hpp>

#include "test_support.hpp"

using namespace gpfield;
using gpfield::testing::Gen;

TEST_CASE("primitive distances") {
  const Primitive s = Primitive::sphere(Vec3(1, 0, 0), 0.5);
  CHECK(s.sdf(Vec3(1, 0, 0)) == doctest::Approx(-0.5));
  CHECK(s.sdf(Vec3(2, 0, 0)) == doctest::Approx(0.5));
  const Primitive b = Primitive::box(Vec3::Zero(), Vec3(1, 2, 3));
  CHECK(b.sdf(Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(b.sdf(Vec3(0, 0, 0)) == doctest::Approx(-1.0));
  CHECK(b.sdf(Vec3(2, 3, 0)) == doctest::Approx(std::sqrt(2.0)));
  const Primitive p = Primitive::plane(Vec3(0, 0, 2), 1.0);
  CHECK(p.sdf(Vec3(5, 5, 3)) == doctest::Approx(2.0));
}

TEST_CASE("scene sdf is the minimum over active primitives") {
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::sphere(Vec3::Zero(), 1.0));
  Primitive late = Primitive::sphere(Vec3(3, 0, 0), 1.0);
  late.active_from = 5.0;
  late.active_until = 10.0;
  scene.primitives.push_back(late);
  CHECK(scene_sdf(scene, Vec3(2.5, 0, 0), 0.0) == doctest::Approx(1.5));
  CHECK(scene_sdf(scene, Vec3(2.5, 0, 0), 5.0) == doctest::Approx(-0.5));
  CHECK(scene_sdf(scene, Vec3(2.5, 0, 0), 10.0) == doctest::Approx(1.5));
  CHECK(closest_primitive(scene, Vec3(2.5, 0, 0), 6.0) == 1);
  CHECK(std::isinf(scene_sdf(SyntheticScene{}, Vec3::Zero())));
  CHECK(closest_primitive(SyntheticScene{}, Vec3::Zero()) == -1);
}

TEST_CASE("look_at builds a proper rotation facing the target") {
  Gen g(81);
  for (int n = 0; n < 200; ++n) {
    const Vec3 eye = g.point(-5, 5), target = g.point(-5, 5);
    if ((target - eye).norm() < 0.1) continue;
    const Pose p = look_at(eye, target);
    CHECK(p.is_valid(1e-9));
    CHECK((p.rotation.col(2) - (target - eye).normalized()).norm() < 1e-9);
    CHECK((p.translation - eye).norm() == 0.0);
  }
  CHECK(look_at(Vec3::Zero(), Vec3(0, 0, 1)).is_valid(1e-9));
}

TEST_CASE("rendered points lie on the surface and are deterministic") {
  SyntheticScene scene;
  scene.channels = 3;
  Primitive s = Primitive::sphere(Vec3::Zero(), 1.0);
  s.property = {0.1f, 0.2f, 0.3f};
  scene.primitives.push_back(s);
  SensorModel cam;
  cam.width = 40;
  cam.height = 30;
  cam.focal = 40.0;
  const Pose pose = look_at(Vec3(3, 0, 0), Vec3::Zero());
  const Frame f = render_frame(scene, cam, pose);
  REQUIRE(!f.points.empty());
  REQUIRE(f.properties.size() == f.points.size());
  for (std::size_t n = 0; n < f.points.size(); ++n) {
    CHECK(std::abs(pose.apply(f.points[n]).norm() - 1.0) < 1e-4);
    CHECK(f.properties[n][2] == 0.3f);
  }
  // The sphere subtends about 39 degrees; pixels outside see nothing.
  CHECK(f.points.size() < static_cast<std::size_t>(cam.width * cam.height));

  cam.noise_sigma = 0.01;
  cam.seed = 5;
  const Frame a = render_frame(scene, cam, pose, 2.0);
  const Frame b = render_frame(scene, cam, pose, 2.0);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t n = 0; n < a.points.size(); ++n) CHECK(a.points[n] == b.points[n]);
  const Frame c = render_frame(scene, cam, pose, 3.0);
  CHECK(c.points[0] != a.points[0]);
}

TEST_CASE("lidar ray layout") {
  SensorModel lidar;
  lidar.kind = SensorModel::Kind::Lidar;
  lidar.azimuth_count = 8;
  lidar.elevations_deg = {0.0, 30.0};
  const auto dirs = lidar.ray_directions();
  REQUIRE(dirs.size() == 16);
  CHECK((dirs[0] - Vec3::UnitX()).norm() < 1e-12);
  CHECK((dirs[2] - Vec3::UnitY()).norm() < 1e-12);
  CHECK(dirs[8].z() == doctest::Approx(0.5));
  for (const Vec3& d : dirs) CHECK(d.norm() == doctest::Approx(1.0));
}

TEST_CASE("orbit and sphere sampling") {
  const auto poses = orbit_trajectory(Vec3(1, 2, 3), 2.0, 12, 0.5);
  REQUIRE(poses.size() == 12);
  for (const Pose& p : poses) {
    CHECK((p.translation - Vec3(1, 2, 3.5)).head<2>().norm() == doctest::Approx(2.0));
    CHECK(p.rotation.col(2).dot((Vec3(1, 2, 3) - p.translation).normalized()) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(orbit_trajectory(Vec3::Zero(), 1.0, 0), InvalidArgument);

  const auto pts = sample_sphere_surface(Vec3(0, 0, 1), 2.0, 1000);
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) {
    CHECK((p - Vec3(0, 0, 1)).norm() == doctest::Approx(2.0));
    mean += p;
  }
  CHECK((mean / 1000.0 - Vec3(0, 0, 1)).norm() < 0.01);
}

TEST_CASE("scene description parsing") {
  const SceneDescription d = parse_scene(R"(
# room
sphere center=0,0,1 radius=0.5 property=0.2,0.4,0.6
box center=2,0,0 half=0.5,0.5,0.5 active=0,10
plane normal=0,0,1 offset=0
sensor lidar azimuth=90 elevations=-10,10 max_range=8 noise=0.002 seed=3
orbit center=0,0,0 radius=3 frames=4 height=1
static eye=0,3,1 target=0,0,1 frames=2
linear from=0,0,1 to=1,0,1 look=0,1,0 frames=3
)");
  REQUIRE(d.scene.primitives.size() == 3);
  CHECK(d.scene.channels == 3);
  CHECK(d.scene.primitives[1].active_until == 10.0);
  CHECK(d.sensor.kind == SensorModel::Kind::Lidar);
  CHECK(d.sensor.azimuth_count == 90);
  CHECK(d.sensor.elevations_deg.size() == 2);
  CHECK(d.sensor.seed == 3);
  CHECK(d.trajectory.size() == 9);
  CHECK(d.trajectory[8].translation.x() == doctest::Approx(1.0));

  CHECK_THROWS_AS(parse_scene("cylinder radius=1"), InvalidArgument);
  CHECK_THROWS_AS(parse_scene("sphere center=0,0 radius=1"), InvalidArgument);
  CHECK_THROWS_AS(parse_scene("sphere center=0,0,0"), InvalidArgument);
  CHECK_THROWS_AS(parse_scene("sphere center=0,0,0 radius=x"), InvalidArgument);
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.txt"), IoFailure);
}
