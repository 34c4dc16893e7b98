#include "gpfield/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "gpfield/pipeline.hpp"

namespace gpfield {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'P', 'F', 'M', 'A', 'P', '0', '1'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoFailure("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoFailure("failed writing " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoFailure("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) throw IoFailure("snapshot is truncated");
  }

 private:
  std::ifstream in_;
};

void put_coord(Writer& w, const GridCoord& c) {
  w.put(c.i);
  w.put(c.j);
  w.put(c.k);
}

GridCoord get_coord(ByteReader& r) {
  GridCoord c;
  c.i = r.get<std::int32_t>();
  c.j = r.get<std::int32_t>();
  c.k = r.get<std::int32_t>();
  return c;
}

}  // namespace

void save_snapshot(const std::filesystem::path& path, const PipelineConfig& cfg, const GlobalGrid& grid,
                   const CrossingLists& crossings) {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  const std::string text = format_config(cfg);
  w.put(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.put(grid.voxel_size());

  std::vector<const GlobalGrid::Leaf*> leaves(grid.leaves().begin(), grid.leaves().end());
  std::sort(leaves.begin(), leaves.end(), [](auto* a, auto* b) { return a->origin < b->origin; });
  w.put(static_cast<std::uint64_t>(leaves.size()));
  for (const auto* leaf : leaves) {
    put_coord(w, leaf->origin);
    for (int word = 0; word < 8; ++word) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 64; ++b)
        if (leaf->value_mask.test(word * 64 + b)) bits |= std::uint64_t{1} << b;
      w.put(bits);
    }
    for (int idx = 0; idx < GlobalGrid::kLeafVoxels; ++idx) {
      const VoxelState* s = leaf->get(idx);
      if (!s) continue;
      w.put(s->distance);
      w.put(s->weight);
      for (float p : s->property) w.put(p);
      w.put(s->property_weight);
      w.put(static_cast<std::uint8_t>(s->observed ? 1 : 0));
    }
  }

  w.put(static_cast<std::uint64_t>(crossings.size()));
  for (const auto& [origin, pts] : crossings) {
    put_coord(w, origin);
    w.put(static_cast<std::uint64_t>(pts.size()));
    for (const Vec3& p : pts)
      for (int a = 0; a < 3; ++a) w.put(p[a]);
  }
  w.finish();
}

void save_snapshot(const std::filesystem::path& path, const Mapper& mapper) {
  save_snapshot(path, mapper.config(), mapper.grid(), mapper.field().crossings());
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  ByteReader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoFailure(path.string() + " is not a map snapshot");

  const auto text_len = r.get<std::uint32_t>();
  if (text_len > (1u << 20)) throw IoFailure("snapshot config block is implausibly large");
  std::string text(text_len, '\0');
  r.bytes(text.data(), text_len);
  PipelineConfig cfg;
  try {
    cfg = parse_config(text);
  } catch (const InvalidArgument& e) {
    throw IoFailure(std::string("snapshot config: ") + e.what());
  }

  Snapshot snap{cfg, GlobalGrid(r.get<double>()), {}};
  const auto leaf_count = r.get<std::uint64_t>();
  for (std::uint64_t n = 0; n < leaf_count; ++n) {
    const GridCoord origin = get_coord(r);
    if (GlobalGrid::leaf_origin(origin) != origin) throw IoFailure("snapshot leaf origin is not leaf-aligned");
    std::uint64_t words[8];
    for (auto& w : words) w = r.get<std::uint64_t>();
    GlobalGrid::Leaf& leaf = snap.grid.touch_leaf(origin);
    for (int idx = 0; idx < GlobalGrid::kLeafVoxels; ++idx) {
      if (!((words[idx / 64] >> (idx % 64)) & 1)) continue;
      VoxelState s;
      s.distance = r.get<float>();
      s.weight = r.get<float>();
      for (float& p : s.property) p = r.get<float>();
      s.property_weight = r.get<float>();
      s.observed = r.get<std::uint8_t>() != 0;
      leaf.voxels[idx] = s;
      leaf.value_mask.set(idx);
    }
  }

  const auto list_count = r.get<std::uint64_t>();
  for (std::uint64_t n = 0; n < list_count; ++n) {
    const GridCoord origin = get_coord(r);
    const auto count = r.get<std::uint64_t>();
    if (count > GlobalGrid::kLeafVoxels * 64ull) throw IoFailure("snapshot crossing list is implausibly large");
    std::vector<Vec3> pts(count);
    for (Vec3& p : pts)
      for (int a = 0; a < 3; ++a) p[a] = r.get<double>();
    snap.crossings[origin] = std::move(pts);
  }
  return snap;
}

Mapper restore_mapper(Snapshot snap) {
  Mapper m(snap.config);
  m.restore(std::move(snap.grid), snap.crossings);
  return m;
}

}  // namespace gpfield
