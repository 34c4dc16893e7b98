#include "gpfield/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace gpfield {

int PipelineConfig::channels() const {
  switch (property_kind) {
    case PropertyKind::None:
      return 0;
    case PropertyKind::Intensity:
      return 1;
    case PropertyKind::Rgb:
      return 3;
  }
  return 0;
}

KernelParams PipelineConfig::local_kernel() const {
  KernelParams k;
  k.sigma2 = sigma2;
  k.length_scale = effective_length_scale();
  k.noise2 = noise2;
  k.property_noise2 = property_noise2;
  k.d_max = d_max > 0.0 ? d_max : 3.0 * k.length_scale;
  k.variance_max = variance_max;
  return k;
}

GlobalFieldConfig PipelineConfig::global_field() const {
  GlobalFieldConfig g;
  g.voxel_size = voxel_size;
  g.kernel = local_kernel();
  g.kernel.d_max = global_d_max;
  g.nodes_per_query = nodes_per_query;
  g.lambda = lambda;
  g.sign_radius = sign_radius;
  g.gradient_mode = gradient_mode;
  return g;
}

FusionConfig PipelineConfig::fusion() const {
  FusionConfig f;
  f.voxel_size = voxel_size;
  f.surface_band = surface_band > 0.0 ? surface_band : 2.0 * voxel_size;
  f.variance_max = variance_max;
  f.weight_cap = weight_cap;
  f.channels = channels();
  return f;
}

TestPointConfig PipelineConfig::test_points() const {
  TestPointConfig t;
  t.voxel_size = voxel_size;
  t.band_width = band_width;
  t.normal_reach = normal_reach;
  t.normal_neighbors = normal_neighbors;
  return t;
}

std::vector<std::string> PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw InvalidArgument(std::string(name) + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0)) throw InvalidArgument(std::string(name) + " must not be negative");
  };
  positive(voxel_size, "voxel_size");
  non_negative(length_scale, "length_scale");
  positive(sigma2, "sigma2");
  non_negative(noise2, "noise2");
  non_negative(property_noise2, "property_noise2");
  non_negative(d_max, "d_max");
  positive(global_d_max, "global_d_max");
  positive(variance_max, "variance_max");
  non_negative(surface_band, "surface_band");
  positive(band_width, "band_width");
  non_negative(normal_reach, "normal_reach");
  positive(normal_neighbors, "normal_neighbors");
  positive(nodes_per_query, "Q");
  positive(lambda, "lambda");
  positive(weight_cap, "V_cap");
  non_negative(sign_radius, "sign_radius");

  std::vector<std::string> warnings;
  const double ratio = effective_length_scale() / voxel_size;
  if (ratio < 2.0 || ratio > 4.0) {
    std::ostringstream os;
    os << "length_scale is " << ratio << " voxels; 2 to 4 voxels is the recommended range";
    warnings.push_back(os.str());
  }
  return warnings;
}

namespace {

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidArgument("not a number '" + v + "'");
  return out;
}

int to_int(const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidArgument("not an integer '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("not a boolean '" + v + "'");
}

const char* kind_name(PropertyKind k) {
  switch (k) {
    case PropertyKind::Intensity:
      return "intensity";
    case PropertyKind::Rgb:
      return "rgb";
    case PropertyKind::None:
      break;
  }
  return "none";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(PipelineConfig&, const std::string&)>;
  auto dbl = [](double PipelineConfig::*m) -> Setter {
    return [m](PipelineConfig& c, const std::string& v) { c.*m = to_double(v); };
  };
  auto integer = [](int PipelineConfig::*m) -> Setter {
    return [m](PipelineConfig& c, const std::string& v) { c.*m = to_int(v); };
  };
  auto boolean = [](bool PipelineConfig::*m) -> Setter {
    return [m](PipelineConfig& c, const std::string& v) { c.*m = to_bool(v); };
  };
  static const std::map<std::string, Setter> setters = {
      {"voxel_size", dbl(&PipelineConfig::voxel_size)},
      {"length_scale", dbl(&PipelineConfig::length_scale)},
      {"sigma2", dbl(&PipelineConfig::sigma2)},
      {"noise2", dbl(&PipelineConfig::noise2)},
      {"property_noise2", dbl(&PipelineConfig::property_noise2)},
      {"d_max", dbl(&PipelineConfig::d_max)},
      {"global_d_max", dbl(&PipelineConfig::global_d_max)},
      {"variance_max", dbl(&PipelineConfig::variance_max)},
      {"surface_band", dbl(&PipelineConfig::surface_band)},
      {"band_width", integer(&PipelineConfig::band_width)},
      {"normal_reach", integer(&PipelineConfig::normal_reach)},
      {"normal_neighbors", integer(&PipelineConfig::normal_neighbors)},
      {"Q", integer(&PipelineConfig::nodes_per_query)},
      {"lambda", dbl(&PipelineConfig::lambda)},
      {"V_cap", dbl(&PipelineConfig::weight_cap)},
      {"sign_radius", integer(&PipelineConfig::sign_radius)},
      {"gradient_mode",
       [](PipelineConfig& c, const std::string& v) {
         if (v == "average") c.gradient_mode = GradientMode::Average;
         else if (v == "weighted") c.gradient_mode = GradientMode::Weighted;
         else if (v == "blend") c.gradient_mode = GradientMode::Blend;
         else throw InvalidArgument("unknown gradient mode '" + v + "'");
       }},
      {"eager_global_training", boolean(&PipelineConfig::eager_global_training)},
      {"property_kind",
       [](PipelineConfig& c, const std::string& v) {
         if (v == "none") c.property_kind = PropertyKind::None;
         else if (v == "intensity") c.property_kind = PropertyKind::Intensity;
         else if (v == "rgb") c.property_kind = PropertyKind::Rgb;
         else throw InvalidArgument("unknown property kind '" + v + "'");
       }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw InvalidArgument("unknown config key '" + key + "'");
  try {
    it->second(cfg, value);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("config " + key + ": " + e.what());
  }
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key=value");
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string format_config(const PipelineConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "voxel_size=" << c.voxel_size << "\n"
     << "length_scale=" << c.length_scale << "\n"
     << "sigma2=" << c.sigma2 << "\n"
     << "noise2=" << c.noise2 << "\n"
     << "property_noise2=" << c.property_noise2 << "\n"
     << "d_max=" << c.d_max << "\n"
     << "global_d_max=" << c.global_d_max << "\n"
     << "variance_max=" << c.variance_max << "\n"
     << "surface_band=" << c.surface_band << "\n"
     << "band_width=" << c.band_width << "\n"
     << "normal_reach=" << c.normal_reach << "\n"
     << "normal_neighbors=" << c.normal_neighbors << "\n"
     << "Q=" << c.nodes_per_query << "\n"
     << "lambda=" << c.lambda << "\n"
     << "V_cap=" << c.weight_cap << "\n"
     << "sign_radius=" << c.sign_radius << "\n"
     << "gradient_mode=" << kGradientModeNames[static_cast<int>(c.gradient_mode)] << "\n"
     << "eager_global_training=" << (c.eager_global_training ? "true" : "false") << "\n"
     << "property_kind=" << kind_name(c.property_kind) << "\n";
  return os.str();
}

}  // namespace gpfield
