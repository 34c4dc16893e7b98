#include "gpfield/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <tbb/parallel_for.h>

#include "gpfield/kdtree.hpp"

namespace gpfield {

std::vector<Vec3> lattice_points(const Box3& region, double resolution) {
  if (!(resolution > 0.0)) throw InvalidArgument("lattice resolution must be positive");
  std::array<long, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = std::max(0L, std::lround((region.max[a] - region.min[a]) / resolution));
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n[0] * n[1] * n[2]));
  for (long i = 0; i < n[0]; ++i)
    for (long j = 0; j < n[1]; ++j)
      for (long k = 0; k < n[2]; ++k)
        pts.push_back(region.min + resolution * Vec3(i + 0.5, j + 0.5, k + 0.5));
  return pts;
}

RmseResult eval_distance_rmse(const GlobalField& field, const DistanceOracle& oracle, std::span<const Vec3> points) {
  if (field.node_count() == 0) throw EmptyField("cannot evaluate an empty field");
  if (points.empty()) throw EmptyInput("no evaluation points");
  const std::vector<FieldQueryResult> res = field.query_batch(points);
  RmseResult out;
  double sum2 = 0.0;
  for (std::size_t n = 0; n < points.size(); ++n) {
    const double e = std::abs(res[n].distance) - std::abs(oracle(points[n]));
    sum2 += e * e;
    out.max_error = std::max(out.max_error, std::abs(e));
  }
  out.samples = points.size();
  out.rmse = std::sqrt(sum2 / static_cast<double>(points.size()));
  return out;
}

RmseResult eval_distance_rmse(const GlobalField& field, const DistanceOracle& oracle, const Box3& region,
                              double resolution, double band_min, double band_max) {
  if (field.node_count() == 0) throw EmptyField("cannot evaluate an empty field");
  std::vector<Vec3> kept;
  for (const Vec3& p : lattice_points(region, resolution)) {
    const double d = std::abs(oracle(p));
    if (d >= band_min && d <= band_max) kept.push_back(p);
  }
  if (kept.empty()) throw EmptyInput("evaluation region contains no lattice points in the distance band");
  return eval_distance_rmse(field, oracle, kept);
}

namespace {

double mean_nearest(const KdTree& tree, std::span<const Vec3> queries, double threshold, double* within) {
  std::vector<double> d(queries.size());
  tbb::parallel_for(std::size_t{0}, queries.size(),
                    [&](std::size_t n) { d[n] = std::sqrt(tree.nearest(queries[n]).dist2); });
  double sum = 0.0;
  std::size_t hits = 0;
  for (double v : d) {
    sum += v;
    hits += v <= threshold ? 1 : 0;
  }
  if (within) *within = static_cast<double>(hits) / static_cast<double>(queries.size());
  return sum / static_cast<double>(queries.size());
}

}  // namespace

ChamferResult eval_chamfer(std::span<const Vec3> mesh_points, std::span<const Vec3> reference, double threshold) {
  if (mesh_points.empty() || reference.empty()) throw EmptyInput("chamfer needs two non-empty point sets");
  const KdTree mesh_tree(mesh_points);
  const KdTree ref_tree(reference);
  ChamferResult r;
  r.accuracy = mean_nearest(ref_tree, mesh_points, threshold, nullptr);
  r.completion = mean_nearest(mesh_tree, reference, threshold, &r.completeness);
  r.chamfer = 0.5 * (r.accuracy + r.completion);
  return r;
}

Slice compute_slice(const GlobalField& field, const GlobalGrid* grid, int axis, double offset,
                    const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, double resolution,
                    const DistanceOracle* oracle) {
  if (axis < 0 || axis > 2) throw InvalidArgument("slice axis must be 0, 1 or 2");
  if (!(resolution > 0.0)) throw InvalidArgument("slice resolution must be positive");
  if (!(hi.x() >= lo.x() && hi.y() >= lo.y())) throw InvalidArgument("slice bounds are inverted");
  const int au = (axis + 1) % 3, av = (axis + 2) % 3;
  Slice s;
  s.axis = axis;
  s.offset = offset;
  s.nu = static_cast<int>(std::floor((hi.x() - lo.x()) / resolution + 1e-9)) + 1;
  s.nv = static_cast<int>(std::floor((hi.y() - lo.y()) / resolution + 1e-9)) + 1;

  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(s.nu) * s.nv);
  for (int iv = 0; iv < s.nv; ++iv)
    for (int iu = 0; iu < s.nu; ++iu) {
      Vec3 p;
      p[axis] = offset;
      p[au] = lo.x() + iu * resolution;
      p[av] = lo.y() + iv * resolution;
      pts.push_back(p);
    }
  const std::vector<FieldQueryResult> res = field.query_batch(pts, grid);
  s.samples.resize(pts.size());
  for (std::size_t n = 0; n < pts.size(); ++n) {
    SliceSample& smp = s.samples[n];
    smp.u = pts[n][au];
    smp.v = pts[n][av];
    smp.result = res[n];
    if (oracle) smp.error = std::abs(res[n].distance) - std::abs((*oracle)(pts[n]));
  }
  return s;
}

void write_slice_csv(std::ostream& out, const Slice& slice) {
  static constexpr const char* kAxis[3] = {"x", "y", "z"};
  const int au = (slice.axis + 1) % 3, av = (slice.axis + 2) % 3;
  const bool with_error = !slice.samples.empty() && slice.samples.front().error.has_value();
  out << kAxis[au] << ',' << kAxis[av] << ",distance,gradient_" << kAxis[au] << ",gradient_" << kAxis[av]
      << ",signed";
  if (with_error) out << ",error";
  out << '\n' << std::setprecision(9);
  for (const SliceSample& s : slice.samples) {
    out << s.u << ',' << s.v << ',' << s.result.distance << ',' << s.result.gradient[au] << ','
        << s.result.gradient[av] << ',' << (s.result.has_sign ? 1 : 0);
    if (with_error) out << ',' << s.error.value_or(0.0);
    out << '\n';
  }
}

void export_slice(const Slice& slice, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  write_slice_csv(out, slice);
  if (!out) throw IoFailure("failed writing " + path.string());
}

std::vector<Eigen::Vector2d> slice_zero_crossings(const Slice& slice) {
  std::vector<Eigen::Vector2d> out;
  auto check = [&](const SliceSample& a, const SliceSample& b) {
    if (!a.result.has_sign || !b.result.has_sign) return;
    const double da = a.result.distance, db = b.result.distance;
    if ((da < 0.0) == (db < 0.0)) return;
    const double t = da / (da - db);
    out.emplace_back(a.u + t * (b.u - a.u), a.v + t * (b.v - a.v));
  };
  for (int iv = 0; iv < slice.nv; ++iv)
    for (int iu = 0; iu < slice.nu; ++iu) {
      if (iu + 1 < slice.nu) check(slice.at(iu, iv), slice.at(iu + 1, iv));
      if (iv + 1 < slice.nv) check(slice.at(iu, iv), slice.at(iu, iv + 1));
    }
  return out;
}

}  // namespace gpfield
