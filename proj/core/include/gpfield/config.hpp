#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpfield/fusion.hpp"
#include "gpfield/global_field.hpp"
#include "gpfield/gp.hpp"
#include "gpfield/test_points.hpp"

namespace gpfield {

enum class PropertyKind { None, Intensity, Rgb };

struct PipelineConfig {
  double voxel_size = 0.05;
  double length_scale = 0.0;  // 0 selects 3 * voxel_size
  double sigma2 = 1.0;
  double noise2 = 1e-3;
  double property_noise2 = 1e-3;
  double d_max = 0.0;         // 0 selects 3 * length_scale
  double global_d_max = 2.0;
  double variance_max = 4e-5;
  double surface_band = 0.0;  // 0 selects 2 * voxel_size
  int band_width = 3;
  int normal_reach = 3;
  int normal_neighbors = 10;
  int nodes_per_query = 3;
  double lambda = 100.0;
  double weight_cap = 100.0;
  int sign_radius = 5;
  GradientMode gradient_mode = GradientMode::Blend;
  PropertyKind property_kind = PropertyKind::None;
  bool eager_global_training = false;

  int channels() const;
  double effective_length_scale() const { return length_scale > 0.0 ? length_scale : 3.0 * voxel_size; }

  KernelParams local_kernel() const;
  GlobalFieldConfig global_field() const;
  FusionConfig fusion() const;
  TestPointConfig test_points() const;

  /// Throws InvalidArgument for non-positive sizes and counts. Returns
  /// warnings for settings outside the recommended range.
  std::vector<std::string> validate() const;
};

/// Sets one field from its key=value spelling. Throws InvalidArgument for
/// unknown keys or malformed values.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Plain key=value lines; '#' starts a comment.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Every field as key=value lines, parseable by parse_config.
std::string format_config(const PipelineConfig& cfg);

}  // namespace gpfield
