#include "gpfield/local_field.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <tbb/parallel_for.h>

namespace gpfield {

namespace {

struct Accumulator {
  std::uint32_t count = 0;
  Vec3 point_sum = Vec3::Zero();
  std::array<double, kMaxChannels> property_sum{};
};

}  // namespace

VoxelizedCloud voxelize(const Frame& frame, double voxel_size) {
  if (frame.points.empty()) throw EmptyFrame("frame has no points");
  if (!frame.properties.empty() && frame.properties.size() != frame.points.size())
    throw InvalidArgument("frame property count does not match point count");

  const int channels = frame.properties.empty() ? 0 : frame.channels;
  SparseGrid<Accumulator> grid(voxel_size);
  for (std::size_t n = 0; n < frame.points.size(); ++n) {
    const Vec3 p = frame.pose.apply(frame.points[n]);
    if (!p.allFinite()) continue;
    Accumulator& acc = grid.touch(world_to_grid(p, voxel_size));
    ++acc.count;
    acc.point_sum += p;
    for (int c = 0; c < channels; ++c) acc.property_sum[c] += frame.properties[n][c];
  }

  std::vector<const SparseGrid<Accumulator>::Leaf*> leaves(grid.leaves().begin(), grid.leaves().end());
  std::sort(leaves.begin(), leaves.end(), [](auto* a, auto* b) { return a->origin < b->origin; });

  VoxelizedCloud out;
  out.voxel_size = voxel_size;
  out.channels = channels;
  for (const auto* leaf : leaves) {
    VoxelizedCloud::LeafRange range{leaf->origin, out.coords.size(), 0};
    for (int idx = 0; idx < SparseGrid<Accumulator>::kLeafVoxels; ++idx) {
      const Accumulator* acc = leaf->get(idx);
      if (!acc) continue;
      const GridCoord c = leaf->coord(idx);
      out.coords.push_back(c);
      out.centers.push_back(grid_to_world(c, voxel_size));
      out.means.push_back(acc->point_sum / acc->count);
      Properties prop{};
      for (int ch = 0; ch < channels; ++ch)
        prop[ch] = static_cast<float>(acc->property_sum[ch] / acc->count);
      out.properties.push_back(prop);
    }
    range.end = out.coords.size();
    out.leaves.push_back(range);
  }
  return out;
}

LocalField LocalField::build(const VoxelizedCloud& cloud, const KernelParams& params) {
  LocalField field;
  const auto& leaves = cloud.leaves;
  if (leaves.empty()) return field;

  auto leaf_centroid = [&](const VoxelizedCloud::LeafRange& r) {
    Vec3 c = Vec3::Zero();
    for (std::size_t n = r.begin; n < r.end; ++n) c += cloud.centers[n];
    return Vec3(c / static_cast<double>(r.end - r.begin));
  };

  // Host leaves get their own model; tiny leaves join the nearest host.
  std::vector<std::size_t> hosts;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i].end - leaves[i].begin >= kMinLeafPoints) hosts.push_back(i);
  if (hosts.empty()) {
    hosts.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) hosts[i] = i;
  }

  std::vector<Vec3> host_centroids;
  for (std::size_t h : hosts) host_centroids.push_back(leaf_centroid(leaves[h]));
  const KdTree host_tree(host_centroids);

  std::vector<std::vector<std::size_t>> members(hosts.size());
  std::vector<std::size_t> host_slot(leaves.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t s = 0; s < hosts.size(); ++s) host_slot[hosts[s]] = s;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const std::size_t slot = host_slot[i] != std::numeric_limits<std::size_t>::max()
                                 ? host_slot[i]
                                 : host_tree.nearest(leaf_centroid(leaves[i])).index;
    members[slot].push_back(i);
  }

  field.models_.resize(hosts.size());
  tbb::parallel_for(std::size_t{0}, hosts.size(), [&](std::size_t s) {
    Model& m = field.models_[s];
    m.origin = leaves[hosts[s]].origin;
    std::vector<Vec3> pts;
    std::vector<Properties> props;
    for (std::size_t li : members[s]) {
      m.leaves.push_back(leaves[li].origin);
      for (std::size_t n = leaves[li].begin; n < leaves[li].end; ++n) {
        pts.push_back(cloud.centers[n]);
        if (cloud.channels > 0) props.push_back(cloud.properties[n]);
      }
    }
    try {
      m.gp = GpLeafModel::train(pts, props, cloud.channels, params);
    } catch (const FactorizationFailure& e) {
      std::ostringstream os;
      os << "leaf (" << m.origin.i << "," << m.origin.j << "," << m.origin.k << "): " << e.what();
      throw FactorizationFailure(os.str());
    }
  });

  std::vector<Vec3> centroids;
  centroids.reserve(field.models_.size());
  for (const Model& m : field.models_) centroids.push_back(m.gp.centroid());
  field.centroids_.build(centroids);
  return field;
}

std::uint32_t LocalField::nearest_model(const Vec3& x) const { return centroids_.nearest(x).index; }

LocalInference LocalField::query(const Vec3& x) const {
  LocalInference out;
  if (models_.empty()) throw EmptyField("local field has no models");
  out.model = nearest_model(x);
  const GpLeafModel& gp = models_[out.model].gp;
  const OccupancyEstimate occ = gp.infer_occupancy(x);
  out.distance = revert_distance(occ.occupancy, gp.params());
  out.variance = propagate_variance(occ.variance, occ.occupancy, gp.params());
  if (gp.channels() > 0) {
    const PropertyEstimate prop = gp.infer_property(x);
    out.property = prop.value;
    out.property_variance = prop.variance;
  }
  return out;
}

}  // namespace gpfield
