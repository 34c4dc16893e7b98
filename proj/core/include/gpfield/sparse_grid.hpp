#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gpfield/types.hpp"

namespace gpfield {

/// Fused per-voxel state of the global map.
struct VoxelState {
  float distance = 0.0f;        // D, metres, signed
  float weight = 0.0f;          // V
  Properties property{};        // C
  float property_weight = 0.0f; // W
  bool observed = false;        // received a near-surface measurement at least once

  friend bool operator==(const VoxelState&, const VoxelState&) = default;
};

/// Four-level sparse voxel tree: hashed root -> 32^3 upper internal nodes ->
/// 16^3 lower internal nodes -> 8^3 voxel leaves. Branching factors are fixed
/// so the addressing is plain shift/mask arithmetic on two's complement ints.
template <typename T>
class SparseGrid {
 public:
  static constexpr int kLeafLog2 = 3;
  static constexpr int kLowerLog2 = 4;
  static constexpr int kUpperLog2 = 5;
  static constexpr int kLeafDim = 1 << kLeafLog2;
  static constexpr int kLeafVoxels = kLeafDim * kLeafDim * kLeafDim;
  static constexpr int kLowerTotalLog2 = kLeafLog2 + kLowerLog2;       // 7: 128 voxels
  static constexpr int kUpperTotalLog2 = kLowerTotalLog2 + kUpperLog2; // 12: 4096 voxels
  static constexpr int kChildLookups = 3;

  struct Leaf {
    GridCoord origin;
    std::array<T, kLeafVoxels> voxels{};
    std::bitset<kLeafVoxels> value_mask;
    bool active_this_frame = false;

    static constexpr int index(const GridCoord& c) {
      return ((c.i & (kLeafDim - 1)) << (2 * kLeafLog2)) | ((c.j & (kLeafDim - 1)) << kLeafLog2) |
             (c.k & (kLeafDim - 1));
    }
    GridCoord coord(int idx) const {
      return {origin.i + (idx >> (2 * kLeafLog2)), origin.j + ((idx >> kLeafLog2) & (kLeafDim - 1)),
              origin.k + (idx & (kLeafDim - 1))};
    }
    const T* get(int idx) const { return value_mask.test(idx) ? &voxels[idx] : nullptr; }
  };

  struct NodeCounts {
    std::size_t upper = 0;
    std::size_t lower = 0;
    std::size_t leaves = 0;
  };

  explicit SparseGrid(double voxel_size = 0.1) : voxel_size_(voxel_size) {}
  SparseGrid(SparseGrid&&) noexcept = default;
  SparseGrid& operator=(SparseGrid&&) noexcept = default;

  double voxel_size() const { return voxel_size_; }

  static constexpr GridCoord leaf_origin(const GridCoord& c) {
    constexpr std::int32_t mask = ~(kLeafDim - 1);
    return {c.i & mask, c.j & mask, c.k & mask};
  }
  /// Key of the upper internal node (root child) containing c.
  static constexpr GridCoord upper_key(const GridCoord& c) {
    return {c.i >> kUpperTotalLog2, c.j >> kUpperTotalLog2, c.k >> kUpperTotalLog2};
  }
  static constexpr int upper_child_index(const GridCoord& c) {
    constexpr int m = (1 << kUpperLog2) - 1;
    return (((c.i >> kLowerTotalLog2) & m) << (2 * kUpperLog2)) |
           (((c.j >> kLowerTotalLog2) & m) << kUpperLog2) | ((c.k >> kLowerTotalLog2) & m);
  }
  static constexpr int lower_child_index(const GridCoord& c) {
    constexpr int m = (1 << kLowerLog2) - 1;
    return (((c.i >> kLeafLog2) & m) << (2 * kLowerLog2)) | (((c.j >> kLeafLog2) & m) << kLowerLog2) |
           ((c.k >> kLeafLog2) & m);
  }

  std::optional<T> get(const GridCoord& c) const {
    const T* p = find(c);
    return p ? std::optional<T>(*p) : std::nullopt;
  }

  /// Pointer to the stored value, or nullptr if the voxel was never set.
  const T* find(const GridCoord& c) const {
    const Leaf* leaf = find_leaf(c);
    return leaf ? leaf->get(Leaf::index(c)) : nullptr;
  }

  void set(const GridCoord& c, const T& value) { touch(c) = value; }

  /// Returns a writable reference, allocating nodes and setting the mask bit.
  T& touch(const GridCoord& c) {
    Leaf& leaf = touch_leaf(c);
    const int idx = Leaf::index(c);
    leaf.value_mask.set(idx);
    return leaf.voxels[idx];
  }

  const Leaf* find_leaf(const GridCoord& c) const {
    auto it = root_.find(upper_key(c));
    if (it == root_.end()) return nullptr;
    const Lower* lower = it->second->children[upper_child_index(c)].get();
    if (!lower) return nullptr;
    return lower->children[lower_child_index(c)].get();
  }
  Leaf* find_leaf(const GridCoord& c) {
    return const_cast<Leaf*>(std::as_const(*this).find_leaf(c));
  }

  Leaf& touch_leaf(const GridCoord& c) {
    auto& upper = root_[upper_key(c)];
    if (!upper) upper = std::make_unique<Upper>();
    auto& lower = upper->children[upper_child_index(c)];
    if (!lower) {
      lower = std::make_unique<Lower>();
      ++lower_count_;
    }
    auto& leaf = lower->children[lower_child_index(c)];
    if (!leaf) {
      leaf = std::make_unique<Leaf>();
      leaf->origin = leaf_origin(c);
      leaves_.push_back(leaf.get());
    }
    return *leaf;
  }

  /// All allocated leaves in allocation order.
  std::span<Leaf* const> leaves() const { return leaves_; }

  void mark_active(Leaf& leaf) {
    if (!leaf.active_this_frame) {
      leaf.active_this_frame = true;
      active_.push_back(&leaf);
    }
  }
  /// Leaves marked active since the last clear_active(), in activation order.
  std::span<Leaf* const> active_leaves() const { return active_; }
  void clear_active() {
    for (Leaf* l : active_) l->active_this_frame = false;
    active_.clear();
  }

  NodeCounts node_counts() const { return {root_.size(), lower_count_, leaves_.size()}; }
  bool empty() const { return leaves_.empty(); }

  std::size_t voxel_count() const {
    std::size_t n = 0;
    for (const Leaf* l : leaves_) n += l->value_mask.count();
    return n;
  }

 private:
  struct Lower {
    std::array<std::unique_ptr<Leaf>, 1 << (3 * kLowerLog2)> children;
  };
  struct Upper {
    std::array<std::unique_ptr<Lower>, 1 << (3 * kUpperLog2)> children;
  };

  double voxel_size_;
  std::unordered_map<GridCoord, std::unique_ptr<Upper>, GridCoordHash> root_;
  std::vector<Leaf*> leaves_;
  std::vector<Leaf*> active_;
  std::size_t lower_count_ = 0;
};

using GlobalGrid = SparseGrid<VoxelState>;

}  // namespace gpfield
