#include "gpfield/scene.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <tbb/parallel_for.h>

namespace gpfield {

double Primitive::sdf(const Vec3& p) const {
  switch (kind) {
    case Kind::Sphere:
      return (p - center).norm() - radius;
    case Kind::Box: {
      const Vec3 q = (p - center).cwiseAbs() - half_extents;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
    case Kind::Plane:
      return normal.dot(p) - offset;
  }
  return std::numeric_limits<double>::infinity();
}

Primitive Primitive::sphere(const Vec3& c, double r) {
  Primitive p;
  p.kind = Kind::Sphere;
  p.center = c;
  p.radius = r;
  return p;
}

Primitive Primitive::box(const Vec3& c, const Vec3& half) {
  Primitive p;
  p.kind = Kind::Box;
  p.center = c;
  p.half_extents = half;
  return p;
}

Primitive Primitive::plane(const Vec3& n, double offset) {
  Primitive p;
  p.kind = Kind::Plane;
  p.normal = n.normalized();
  p.offset = offset;
  return p;
}

double scene_sdf(const SyntheticScene& scene, const Vec3& p, double t) {
  double d = std::numeric_limits<double>::infinity();
  for (const Primitive& prim : scene.primitives)
    if (prim.active(t)) d = std::min(d, prim.sdf(p));
  return d;
}

int closest_primitive(const SyntheticScene& scene, const Vec3& p, double t) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    if (!scene.primitives[i].active(t)) continue;
    const double d = scene.primitives[i].sdf(p);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

std::vector<Vec3> SensorModel::ray_directions() const {
  std::vector<Vec3> dirs;
  if (kind == Kind::Pinhole) {
    dirs.reserve(static_cast<std::size_t>(width) * height);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u)
        dirs.push_back(Vec3((u + 0.5 - 0.5 * width) / focal, (v + 0.5 - 0.5 * height) / focal, 1.0).normalized());
  } else {
    dirs.reserve(elevations_deg.size() * static_cast<std::size_t>(azimuth_count));
    for (double el_deg : elevations_deg) {
      const double el = el_deg * std::numbers::pi / 180.0;
      for (int a = 0; a < azimuth_count; ++a) {
        const double az = 2.0 * std::numbers::pi * a / azimuth_count;
        dirs.push_back({std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)});
      }
    }
  }
  return dirs;
}

namespace {

constexpr int kMaxTraceSteps = 256;
constexpr double kHitTolerance = 1e-5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Frame render_frame(const SyntheticScene& scene, const SensorModel& sensor, const Pose& pose, double t) {
  const std::vector<Vec3> dirs = sensor.ray_directions();
  std::vector<double> range(dirs.size(), -1.0);
  std::vector<int> hit_prim(dirs.size(), -1);

  const std::uint64_t frame_seed = splitmix64(sensor.seed ^ splitmix64(std::bit_cast<std::uint64_t>(t)));
  tbb::parallel_for(std::size_t{0}, dirs.size(), [&](std::size_t r) {
    const Vec3 dir = pose.rotation * dirs[r];
    double s = 0.0;
    for (int step = 0; step < kMaxTraceSteps && s <= sensor.max_range; ++step) {
      const Vec3 p = pose.translation + s * dir;
      const double d = scene_sdf(scene, p, t);
      if (std::abs(d) < kHitTolerance) {
        range[r] = s;
        hit_prim[r] = closest_primitive(scene, p, t);
        break;
      }
      if (d < 0.0) break;  // sensor inside an object
      s += d;
    }
    if (range[r] >= 0.0 && sensor.noise_sigma > 0.0) {
      std::mt19937_64 rng(splitmix64(frame_seed ^ r));
      std::normal_distribution<double> noise(0.0, sensor.noise_sigma);
      range[r] += noise(rng);
    }
  });

  Frame f;
  f.pose = pose;
  f.timestamp = t;
  f.channels = scene.channels;
  for (std::size_t r = 0; r < dirs.size(); ++r) {
    if (range[r] <= 0.0 || range[r] > sensor.max_range) continue;
    f.points.push_back(range[r] * dirs[r]);
    if (f.channels > 0) f.properties.push_back(scene.primitives[hit_prim[r]].property);
  }
  return f;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up);
  if (right.norm() < 1e-12) right = fwd.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = fwd.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = fwd;
  p.translation = eye;
  return p;
}

std::vector<Pose> orbit_trajectory(const Vec3& center, double radius, int n_frames, double height) {
  if (n_frames < 1) throw InvalidArgument("orbit_trajectory needs at least one frame");
  std::vector<Pose> poses;
  poses.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n_frames;
    const Vec3 eye = center + Vec3(radius * std::cos(a), radius * std::sin(a), height);
    poses.push_back(look_at(eye, center));
  }
  return poses;
}

std::vector<Vec3> sample_sphere_surface(const Vec3& center, double radius, int n) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden * i;
    pts.push_back(center + radius * Vec3(rho * std::cos(a), rho * std::sin(a), z));
  }
  return pts;
}

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("bad number '" + item + "'");
    }
  }
  return out;
}

Vec3 parse_vec3(const std::string& s) {
  const auto v = parse_list(s);
  if (v.size() != 3) throw InvalidArgument("expected x,y,z, got '" + s + "'");
  return {v[0], v[1], v[2]};
}

double parse_scalar(const std::string& s) {
  const auto v = parse_list(s);
  if (v.size() != 1) throw InvalidArgument("expected a number, got '" + s + "'");
  return v[0];
}

}  // namespace

SceneDescription parse_scene(const std::string& text) {
  SceneDescription desc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream words(line);
    std::string verb;
    if (!(words >> verb)) continue;

    std::string sub;
    std::map<std::string, std::string> kv;
    for (std::string w; words >> w;) {
      const auto eq = w.find('=');
      if (eq == std::string::npos) {
        sub = w;
        continue;
      }
      kv[w.substr(0, eq)] = w.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) throw InvalidArgument("line " + std::to_string(line_no) + ": missing " + key);
      return it->second;
    };
    auto has = [&](const std::string& key) { return kv.count(key) != 0; };

    try {
      if (verb == "sphere" || verb == "box" || verb == "plane") {
        Primitive p;
        if (verb == "sphere") p = Primitive::sphere(parse_vec3(need("center")), parse_scalar(need("radius")));
        if (verb == "box") p = Primitive::box(parse_vec3(need("center")), parse_vec3(need("half")));
        if (verb == "plane") p = Primitive::plane(parse_vec3(need("normal")), parse_scalar(need("offset")));
        if (has("property")) {
          const auto v = parse_list(kv["property"]);
          if (v.empty() || v.size() > kMaxChannels) throw InvalidArgument("property needs 1-3 values");
          for (std::size_t c = 0; c < v.size(); ++c) p.property[c] = static_cast<float>(v[c]);
          desc.scene.channels = std::max(desc.scene.channels, static_cast<int>(v.size()));
        }
        if (has("active")) {
          const auto v = parse_list(kv["active"]);
          if (v.size() != 2) throw InvalidArgument("active needs from,until");
          p.active_from = v[0];
          p.active_until = v[1];
        }
        desc.scene.primitives.push_back(p);
      } else if (verb == "sensor") {
        SensorModel& s = desc.sensor;
        if (sub == "lidar") s.kind = SensorModel::Kind::Lidar;
        else if (sub == "pinhole" || sub.empty()) s.kind = SensorModel::Kind::Pinhole;
        else throw InvalidArgument("unknown sensor kind '" + sub + "'");
        if (has("width")) s.width = static_cast<int>(parse_scalar(kv["width"]));
        if (has("height")) s.height = static_cast<int>(parse_scalar(kv["height"]));
        if (has("focal")) s.focal = parse_scalar(kv["focal"]);
        if (has("azimuth")) s.azimuth_count = static_cast<int>(parse_scalar(kv["azimuth"]));
        if (has("elevations")) s.elevations_deg = parse_list(kv["elevations"]);
        if (has("max_range")) s.max_range = parse_scalar(kv["max_range"]);
        if (has("noise")) s.noise_sigma = parse_scalar(kv["noise"]);
        if (has("seed")) s.seed = static_cast<std::uint64_t>(parse_scalar(kv["seed"]));
      } else if (verb == "orbit") {
        const auto poses = orbit_trajectory(parse_vec3(need("center")), parse_scalar(need("radius")),
                                            static_cast<int>(parse_scalar(need("frames"))),
                                            has("height") ? parse_scalar(kv["height"]) : 0.0);
        desc.trajectory.insert(desc.trajectory.end(), poses.begin(), poses.end());
      } else if (verb == "linear") {
        const Vec3 from = parse_vec3(need("from")), to = parse_vec3(need("to"));
        const Vec3 look = parse_vec3(need("look"));
        const int n = static_cast<int>(parse_scalar(need("frames")));
        if (n < 1) throw InvalidArgument("frames must be >= 1");
        for (int i = 0; i < n; ++i) {
          const Vec3 eye = n == 1 ? from : Vec3(from + (to - from) * (static_cast<double>(i) / (n - 1)));
          desc.trajectory.push_back(look_at(eye, eye + look));
        }
      } else if (verb == "static") {
        const Pose p = look_at(parse_vec3(need("eye")), parse_vec3(need("target")));
        const int n = static_cast<int>(parse_scalar(need("frames")));
        desc.trajectory.insert(desc.trajectory.end(), static_cast<std::size_t>(std::max(n, 0)), p);
      } else {
        throw InvalidArgument("unknown directive '" + verb + "'");
      }
    } catch (const InvalidArgument& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw InvalidArgument("line " + std::to_string(line_no) + ": " + msg);
    }
  }
  return desc;
}

SceneDescription load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

}  // namespace gpfield
