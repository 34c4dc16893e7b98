#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include <gpfield/fusion.hpp>
#include <gpfield/global_field.hpp>
#include <gpfield/gp.hpp>
#include <gpfield/meshing.hpp>
#include <gpfield/pipeline.hpp>
#include <gpfield/scene.hpp>
#include <gpfield/sparse_grid.hpp>

using namespace gpfield;

namespace {

std::vector<Vec3> leaf_patch(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 0.4);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), 0.2 + 0.02 * std::sin(10 * pts.size()));
  return pts;
}

GlobalGrid sphere_grid(double r, double vs) {
  GlobalGrid grid(vs);
  const int n = static_cast<int>((r + 0.2) / vs) + 1;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const GridCoord c{i, j, k};
        const double d = grid_to_world(c, vs).norm() - r;
        if (std::abs(d) > 3 * vs) continue;
        VoxelState s;
        s.distance = static_cast<float>(d);
        s.weight = 1.0f;
        s.observed = true;
        grid.set(c, s);
      }
  return grid;
}

}  // namespace

static void BM_GpTrain(benchmark::State& state) {
  const auto pts = leaf_patch(static_cast<int>(state.range(0)));
  const KernelParams p;
  for (auto _ : state) benchmark::DoNotOptimize(GpLeafModel::train(pts, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GpTrain)->RangeMultiplier(2)->Range(16, 512)->Complexity();

static void BM_GpInferDistance(benchmark::State& state) {
  const GpLeafModel m = GpLeafModel::train(leaf_patch(static_cast<int>(state.range(0))), KernelParams{});
  const Vec3 x(0.2, 0.2, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(m.infer_distance(x));
}
BENCHMARK(BM_GpInferDistance)->Arg(64)->Arg(256);

static void BM_GridSetGet(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(-200, 200);
  std::vector<GridCoord> coords(4096);
  for (auto& c : coords) c = {u(rng), u(rng), u(rng)};
  SparseGrid<float> grid(0.05);
  std::size_t n = 0;
  for (auto _ : state) {
    const GridCoord& c = coords[n++ & 4095];
    grid.set(c, 1.0f);
    benchmark::DoNotOptimize(grid.find(c));
  }
}
BENCHMARK(BM_GridSetGet);

static void BM_FuseFrame(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(-60, 60);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  std::vector<FusionSample> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) {
    s.coord = {u(rng), u(rng), u(rng)};
    s.distance = d(rng);
  }
  const FusionConfig cfg;
  GlobalGrid grid(cfg.voxel_size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuse_frame(grid, samples, cfg));
    grid.clear_active();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FuseFrame)->Arg(10000)->Arg(100000);

static void BM_MarchingCubesSphere(benchmark::State& state) {
  const GlobalGrid grid = sphere_grid(1.0, 0.05);
  std::vector<GridCoord> leaves;
  for (const auto* l : grid.leaves()) leaves.push_back(l->origin);
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes(grid, leaves, 0));
}
BENCHMARK(BM_MarchingCubesSphere)->Unit(benchmark::kMillisecond);

static void BM_GlobalQuery(benchmark::State& state) {
  GlobalField field;
  CrossingLists lists;
  for (const Vec3& p : sample_sphere_surface(Vec3::Zero(), 1.0, 20000))
    lists[GlobalGrid::leaf_origin(world_to_grid(p, 0.05))].push_back(p);
  field.update(lists);
  field.train_all();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<Vec3> xs(1024);
  for (auto& x : xs) x = Vec3(u(rng), u(rng), u(rng));
  std::size_t n = 0;
  for (auto _ : state) benchmark::DoNotOptimize(field.query(xs[n++ & 1023]));
}
BENCHMARK(BM_GlobalQuery);

static void BM_IntegrateFrame(benchmark::State& state) {
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::sphere(Vec3::Zero(), 1.0));
  SensorModel cam;
  cam.width = 160;
  cam.height = 120;
  cam.focal = 120.0;
  cam.noise_sigma = 0.005;
  const auto poses = orbit_trajectory(Vec3::Zero(), 2.5, 32, 1.0);
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < poses.size(); ++i) frames.push_back(render_frame(scene, cam, poses[i], i));
  Mapper mapper;
  std::size_t n = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mapper.integrate_frame(frames[n++ % frames.size()]));
}
BENCHMARK(BM_IntegrateFrame)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
