#include "gpfield/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <tbb/parallel_for.h>

namespace gpfield {

double fusion_weight(double variance, double variance_max) {
  const double normalized = variance_max > 0.0 ? std::min(std::max(variance, 0.0) / variance_max, 0.99) : 0.0;
  return 1.0 - normalized;
}

VoxelState fuse_point(const VoxelState& state, const FusionSample& sample, const FusionConfig& cfg) {
  VoxelState out = state;
  const double w = fusion_weight(sample.variance, cfg.variance_max);
  const double prev_w = state.weight;
  out.distance = static_cast<float>((prev_w * state.distance + w * sample.distance) / (prev_w + w));
  out.weight = static_cast<float>(std::min(prev_w + w, cfg.weight_cap));

  const bool near_surface = std::abs(sample.distance) <= cfg.surface_band;
  if (near_surface) out.observed = true;
  if (near_surface && cfg.channels > 0) {
    const double wc = fusion_weight(sample.property_variance, cfg.property_variance_max);
    const double prev_wc = state.property_weight;
    for (int c = 0; c < cfg.channels; ++c)
      out.property[c] = static_cast<float>((prev_wc * state.property[c] + wc * sample.property[c]) / (prev_wc + wc));
    out.property_weight = static_cast<float>(std::min(prev_wc + wc, static_cast<double>(out.weight)));
  }
  return out;
}

FusionStats fuse_frame(GlobalGrid& grid, std::span<const FusionSample> samples, const FusionConfig& cfg) {
  FusionStats stats;
  if (samples.empty()) return stats;

  const std::size_t leaves_before = grid.node_counts().leaves;
  const std::size_t active_before = grid.active_leaves().size();

  // Bucket samples by leaf so each leaf is written by one worker.
  std::vector<GlobalGrid::Leaf*> leaves;
  std::vector<std::vector<std::size_t>> buckets;
  std::unordered_map<GlobalGrid::Leaf*, std::size_t> slot;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    GlobalGrid::Leaf* leaf = &grid.touch_leaf(samples[n].coord);
    auto [it, inserted] = slot.try_emplace(leaf, leaves.size());
    if (inserted) {
      leaves.push_back(leaf);
      buckets.emplace_back();
    }
    buckets[it->second].push_back(n);
  }

  tbb::parallel_for(std::size_t{0}, leaves.size(), [&](std::size_t b) {
    GlobalGrid::Leaf& leaf = *leaves[b];
    for (std::size_t n : buckets[b]) {
      const int idx = GlobalGrid::Leaf::index(samples[n].coord);
      leaf.voxels[idx] = fuse_point(leaf.voxels[idx], samples[n], cfg);
      leaf.value_mask.set(idx);
    }
  });

  for (GlobalGrid::Leaf* leaf : leaves) grid.mark_active(*leaf);
  stats.voxels_touched = samples.size();
  stats.new_leaves = grid.node_counts().leaves - leaves_before;
  stats.leaves_activated = grid.active_leaves().size() - active_before;
  return stats;
}

}  // namespace gpfield
