#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include <gpfield/gp.hpp>

#include "test_support.hpp"

using namespace gpfield;
using gpfield::testing::Gen;

namespace {

KernelParams exact_params(double l = 0.15) {
  KernelParams p;
  p.sigma2 = 1.0;
  p.length_scale = l;
  p.noise2 = 0.0;
  p.d_max = 3.0 * l;
  return p;
}

std::vector<Vec3> plane_points(double spacing, int half) {
  std::vector<Vec3> pts;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) pts.emplace_back(i * spacing, j * spacing, 0.0);
  return pts;
}

}  // namespace

TEST_CASE("kernel value at zero and at one length scale") {
  KernelParams p;
  p.sigma2 = 2.0;
  p.length_scale = 0.3;
  CHECK(se_kernel(Vec3::Zero(), Vec3::Zero(), p) == doctest::Approx(2.0));
  CHECK(se_kernel(Vec3::Zero(), Vec3(0.3, 0, 0), p) == doctest::Approx(2.0 * std::exp(-0.5)));
}

TEST_CASE("kernel matrix on random points is symmetric and PSD with noise") {
  Gen g(11);
  KernelParams p;
  std::vector<Vec3> pts;
  for (int n = 0; n < 20; ++n) pts.push_back(g.point(-0.3, 0.3));
  Eigen::MatrixXd K(20, 20);
  for (int a = 0; a < 20; ++a)
    for (int b = 0; b < 20; ++b) K(a, b) = se_kernel(pts[a], pts[b], p);
  K.diagonal().array() += p.noise2;
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("golden identity: single point reproduces Euclidean distance") {
  for (double l : {0.05, 0.15, 0.4}) {
    const KernelParams p = exact_params(l);
    const std::vector<Vec3> x{Vec3(0.2, -0.1, 0.3)};
    const GpLeafModel m = GpLeafModel::train(x, p);
    CHECK(m.alpha_occupancy()[0] == doctest::Approx(1.0 / p.sigma2));
    Gen g(3);
    for (int n = 0; n <= 300; ++n) {
      const double r = 3.0 * l * n / 300.0;
      const Vec3 q = x[0] + r * g.unit();
      CHECK(std::abs(m.infer_distance(q) - r) < 1e-9);
    }
  }
}

TEST_CASE("training solve residual and symmetry") {
  Gen g(5);
  KernelParams p;
  const auto pts = g.separated_points(50, -0.3, 0.3, 0.02);
  const GpLeafModel m = GpLeafModel::train(pts, p);
  const testing::DenseGpOracle o(pts, p);
  const Eigen::VectorXd residual = o.system * m.alpha_occupancy() - Eigen::VectorXd::Ones(50);
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-6);

  const Eigen::MatrixXd& L = m.cholesky();
  Eigen::MatrixXd system = o.system;
  system.diagonal().array() += m.jitter();
  CHECK((system - L * L.transpose()).cwiseAbs().maxCoeff() < 1e-6 * p.sigma2);

  const std::vector<Vec3> pair{Vec3(-0.1, 0, 0), Vec3(0.1, 0, 0)};
  const GpLeafModel two = GpLeafModel::train(pair, p);
  CHECK(two.alpha_occupancy()[0] == doctest::Approx(two.alpha_occupancy()[1]).epsilon(1e-12));
}

TEST_CASE("occupancy and variance match a dense QR oracle") {
  Gen g(17);
  for (int trial = 0; trial < 5; ++trial) {
    KernelParams p;
    p.length_scale = g.uniform(0.1, 0.3);
    p.noise2 = g.uniform(1e-4, 1e-2);
    const auto pts = g.separated_points(static_cast<std::size_t>(g.integer(5, 60)), -0.4, 0.4, 0.03);
    const GpLeafModel m = GpLeafModel::train(pts, p);
    const testing::DenseGpOracle o(pts, p);
    for (int n = 0; n < 10; ++n) {
      const Vec3 q = g.point(-0.6, 0.6);
      const OccupancyEstimate e = m.infer_occupancy(q);
      CHECK(e.occupancy == doctest::Approx(o.mean(q)).epsilon(1e-8));
      CHECK(std::abs(e.variance - std::max(0.0, o.variance(q))) < 1e-8);
      CHECK(e.variance >= 0.0);
      CHECK(e.variance <= p.sigma2 + 1e-12);
    }
  }
}

TEST_CASE("occupancy at a lone training point and far away") {
  const KernelParams p = exact_params();
  const std::vector<Vec3> x{Vec3(1, 2, 3)};
  const GpLeafModel m = GpLeafModel::train(x, p);
  const OccupancyEstimate at = m.infer_occupancy(x[0]);
  CHECK(at.occupancy == doctest::Approx(1.0));
  CHECK(at.variance == doctest::Approx(0.0));
  const OccupancyEstimate far = m.infer_occupancy(Vec3(100, 0, 0));
  CHECK(far.occupancy == doctest::Approx(0.0));
  CHECK(far.variance == doctest::Approx(p.sigma2));
}

TEST_CASE("reverting function values and clamping") {
  KernelParams p;
  p.sigma2 = 1.7;
  p.length_scale = 0.2;
  p.d_max = 0.6;
  CHECK(revert_distance(p.sigma2, p) == doctest::Approx(0.0));
  CHECK(revert_distance(p.sigma2 * std::exp(-0.5), p) == doctest::Approx(p.length_scale));
  CHECK(revert_distance(0.0, p) == p.d_max);
  CHECK(revert_distance(-0.3, p) == p.d_max);
  CHECK(revert_distance(p.sigma2 * 5.0, p) == 0.0);
  CHECK(revert_distance(std::nan(""), p) == p.d_max);

  Gen g(23);
  for (int n = 0; n < 1000; ++n) {
    const double a = g.uniform(-0.1, 2.0), b = g.uniform(-0.1, 2.0);
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(revert_distance(hi, p) <= revert_distance(lo, p));
    CHECK(revert_distance(lo, p) <= p.d_max);
  }
}

TEST_CASE("propagated variance") {
  KernelParams p;
  p.variance_max = 1.0;  // keep the clamp out of the way
  CHECK(propagate_variance(0.0, 0.5, p) == 0.0);
  const double v1 = propagate_variance(1e-3, 0.5, p);
  const double v2 = propagate_variance(2e-3, 0.5, p);
  CHECK(v2 == doctest::Approx(2.0 * v1));

  // Closed form away from the clamps.
  const double o = 0.6;
  const double lambda = p.length_scale * p.noise2 / (o * std::sqrt(2.0 * -std::log(o / p.sigma2)));
  CHECK(propagate_variance(1e-3, o, p) == doctest::Approx(lambda * lambda * 1e-3));

  // Growth with distance from a single point inside (0.2 l, 2 l).
  const std::vector<Vec3> x{Vec3::Zero()};
  const GpLeafModel m = GpLeafModel::train(x, p);
  double prev = -1.0;
  for (int n = 0; n <= 50; ++n) {
    const double r = p.length_scale * (0.2 + 1.8 * n / 50.0);
    const OccupancyEstimate e = m.infer_occupancy(Vec3(r, 0, 0));
    const double v = propagate_variance(e.variance, e.occupancy, p);
    CHECK(v > prev);
    prev = v;
  }

  KernelParams clamped;
  CHECK(propagate_variance(1.0, 1e-6, clamped) <= clamped.variance_max);
  CHECK(propagate_variance(1e-3, clamped.sigma2, clamped) == clamped.variance_floor);
}

TEST_CASE("gradient of a single point is radial") {
  const KernelParams p = exact_params();
  const std::vector<Vec3> x{Vec3::Zero()};
  const GpLeafModel m = GpLeafModel::train(x, p);
  const GradientEstimate g = m.infer_distance_gradient(Vec3(0.5 * p.length_scale, 0, 0));
  CHECK(g.direction.x() == doctest::Approx(1.0));
  CHECK(std::abs(g.direction.y()) < 1e-12);
  CHECK(g.magnitude == doctest::Approx(1.0));
  CHECK(m.infer_distance_gradient(Vec3::Zero()).direction.norm() == 0.0);
}

TEST_CASE("gradient of a dense plane is normal to it") {
  KernelParams p;
  const GpLeafModel m = GpLeafModel::train(plane_points(0.05, 20), p);
  for (double h : {0.03, 0.08, -0.05}) {
    const Vec3 d = m.infer_distance_gradient(Vec3(0.01, -0.02, h)).direction;
    const double angle = std::acos(std::min(1.0, std::abs(d.z())));
    CHECK(angle < 1e-3);
    CHECK(d.z() * h > 0.0);
  }
}

TEST_CASE("gradient agrees with central finite differences") {
  Gen g(99);
  KernelParams p;
  auto check_model = [&](const GpLeafModel& m, auto&& sample) {
    int tested = 0;
    while (tested < 100) {
      const Vec3 q = sample();
      const double d = m.infer_distance(q);
      if (d > 0.9 * p.d_max || d < 0.2 * p.length_scale) continue;
      const Vec3 fd = testing::fd_gradient([&](const Vec3& y) { return m.infer_distance(y); }, q, 1e-4);
      if (fd.norm() < 1e-3) continue;
      const GradientEstimate e = m.infer_distance_gradient(q);
      CHECK(testing::cosine(e.direction, fd) > 0.999);
      CHECK(std::abs(e.magnitude - fd.norm()) < 1e-3 * std::max(1.0, fd.norm()));
      ++tested;
    }
  };
  check_model(GpLeafModel::train(std::vector<Vec3>{Vec3::Zero()}, p), [&] { return g.point(-0.4, 0.4); });
  check_model(GpLeafModel::train(plane_points(0.05, 6), p),
              [&] { return Vec3(g.uniform(-0.3, 0.3), g.uniform(-0.3, 0.3), g.uniform(-0.3, 0.3)); });
  const auto cloud = g.separated_points(60, -0.25, 0.25, 0.04);
  check_model(GpLeafModel::train(cloud, p), [&] { return g.point(-0.5, 0.5); });
}

TEST_CASE("distance is invariant under rigid motion") {
  Gen g(7);
  KernelParams p;
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = g.separated_points(30, -0.3, 0.3, 0.03);
    const Mat3 R = g.rotation();
    const Vec3 t = g.point(-5, 5);
    std::vector<Vec3> moved;
    for (const Vec3& x : pts) moved.push_back(R * x + t);
    const GpLeafModel a = GpLeafModel::train(pts, p);
    const GpLeafModel b = GpLeafModel::train(moved, p);
    for (int n = 0; n < 10; ++n) {
      const Vec3 q = g.point(-0.5, 0.5);
      CHECK(std::abs(a.infer_distance(q) - b.infer_distance(R * q + t)) < 1e-9);
    }
  }
}

TEST_CASE("property regression") {
  KernelParams p;
  p.property_noise2 = 0.0;
  p.noise2 = 1e-3;
  const std::vector<Vec3> pair{Vec3(-0.05, 0, 0), Vec3(0.05, 0, 0)};
  const std::vector<Properties> props{Properties{0.2f, 0.4f, 0.9f}, Properties{0.6f, 0.0f, 0.1f}};
  const GpLeafModel m = GpLeafModel::train(pair, props, 3, p);
  const PropertyEstimate at = m.infer_property(pair[0]);
  for (int c = 0; c < 3; ++c) CHECK(at.value[c] == doctest::Approx(props[0][c]).epsilon(1e-6));
  CHECK(at.variance == doctest::Approx(0.0));
  const PropertyEstimate mid = m.infer_property(Vec3::Zero());
  const double scale = mid.value[0] / 0.4;  // both targets are attenuated equally at the midpoint
  for (int c = 0; c < 3; ++c)
    CHECK(mid.value[c] == doctest::Approx(scale * 0.5 * (props[0][c] + props[1][c])).epsilon(1e-6));

  // Constant targets on a dense patch come back inside the hull.
  KernelParams q;
  const auto pts = plane_points(0.03, 5);
  const std::vector<Properties> flat(pts.size(), Properties{0.7f, 0.0f, 0.0f});
  const GpLeafModel c = GpLeafModel::train(pts, flat, 1, q);
  CHECK(c.infer_property(Vec3(0.01, 0.02, 0.0)).value[0] == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("training errors") {
  KernelParams p;
  CHECK_THROWS_AS(GpLeafModel::train(std::vector<Vec3>{}, p), InvalidArgument);
  p.noise2 = 0.0;
  const std::vector<Vec3> dup{Vec3::Zero(), Vec3::Zero()};
  GpLeafModel m;
  bool threw = false;
  try {
    m = GpLeafModel::train(dup, p);
  } catch (const FactorizationFailure&) {
    threw = true;
  }
  // Duplicates are rescued by jitter or rejected; never a silent NaN.
  if (!threw) CHECK(std::isfinite(m.infer_distance(Vec3(0.1, 0, 0))));
  CHECK(m.jitter() >= 0.0);
}
