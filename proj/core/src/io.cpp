#include "gpfield/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gpfield/ply.hpp"

namespace gpfield {

namespace {

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string());
  return in;
}

bool split_numbers(std::string line, std::vector<double>& out) {
  if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
  out.clear();
  std::istringstream words(line);
  std::string w;
  while (words >> w) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(w, &used));
      if (used != w.size()) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

}  // namespace

Frame read_xyz_frame(std::istream& in) {
  Frame f;
  std::string line;
  std::vector<double> v;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_numbers(line, v)) throw IoFailure("xyz line " + std::to_string(line_no) + ": not numeric");
    if (v.empty()) continue;
    if (v.size() < 3 || v.size() > 3 + static_cast<std::size_t>(kMaxChannels))
      throw IoFailure("xyz line " + std::to_string(line_no) + ": expected 3 to 6 values");
    if (first) {
      f.channels = static_cast<int>(v.size()) - 3;
      first = false;
    } else if (static_cast<int>(v.size()) - 3 != f.channels) {
      throw IoFailure("xyz line " + std::to_string(line_no) + ": inconsistent column count");
    }
    f.points.emplace_back(v[0], v[1], v[2]);
    if (f.channels > 0) {
      Properties p{};
      for (int c = 0; c < f.channels; ++c) p[c] = static_cast<float>(v[3 + c]);
      f.properties.push_back(p);
    }
  }
  return f;
}

Frame load_xyz_frame(const std::filesystem::path& path) {
  auto in = open_text(path);
  return read_xyz_frame(in);
}

Frame load_ply_frame(const std::filesystem::path& path) {
  const TriangleMesh m = read_ply(path);
  Frame f;
  f.points = m.vertices;
  f.channels = m.channels;
  if (f.channels > 0) f.properties = m.vertex_properties;
  return f;
}

Frame load_frame(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ply" ? load_ply_frame(path) : load_xyz_frame(path);
}

void write_xyz_frame(std::ostream& out, const Frame& frame) {
  out << std::setprecision(17);
  for (std::size_t n = 0; n < frame.points.size(); ++n) {
    const Vec3& p = frame.points[n];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (frame.channels > 0 && n < frame.properties.size())
      for (int c = 0; c < frame.channels; ++c) out << ' ' << frame.properties[n][c];
    out << '\n';
  }
}

std::vector<StampedPose> read_trajectory(std::istream& in) {
  std::vector<StampedPose> out;
  std::string line;
  std::vector<double> v;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_numbers(line, v)) throw IoFailure("trajectory line " + std::to_string(line_no) + ": not numeric");
    if (v.empty()) continue;
    if (v.size() != 8) throw IoFailure("trajectory line " + std::to_string(line_no) + ": expected 8 values");
    const double qn = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
    if (!(qn > 1e-9)) throw IoFailure("trajectory line " + std::to_string(line_no) + ": zero quaternion");
    out.push_back({v[0], Pose::from_quaternion({v[1], v[2], v[3]}, v[4], v[5], v[6], v[7])});
  }
  return out;
}

std::vector<StampedPose> load_trajectory(const std::filesystem::path& path) {
  auto in = open_text(path);
  return read_trajectory(in);
}

void write_trajectory(std::ostream& out, const std::vector<StampedPose>& poses) {
  out << std::setprecision(17);
  for (const StampedPose& s : poses) {
    const Eigen::Quaterniond q(s.pose.rotation);
    const Vec3& t = s.pose.translation;
    out << s.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y() << ' '
        << q.z() << ' ' << q.w() << '\n';
  }
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
  std::error_code ec;
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".ply" || ext == ".xyz" || ext == ".txt") out.push_back(entry.path());
  }
  if (ec) throw IoFailure("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gpfield
