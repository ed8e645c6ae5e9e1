#include "vesselsynth/presets.hpp"

#include <numbers>
#include <string>

namespace vesselsynth {

DatasetPreset dataset_preset(int variant) {
  DatasetPreset p;
  p.variant = variant;
  // Shared geometry.
  p.generator.image_size = 128;
  p.generator.circle_center = {64, 64};
  p.generator.circle_radius = 56.0;
  p.generator.max_nodes = 30;
  p.generator.max_children = 3;
  p.generator.mean_length = 14.0;
  p.generator.sigma_length = 4.0;
  p.generator.branch_angle = 0.5;
  p.generator.sigma_angle = 0.25;
  p.noise.patch_size = 48;
  p.noise.max_patches = 5;
  p.noise.bias_lo = 0.0;
  p.noise.bias_hi = 0.2;

  switch (variant) {
    case 1:
      p.generator.line_width = 3;
      p.generator.gray_lo = 0.5;
      p.generator.gray_hi = 1.0;
      p.noise.noise_mean = 0.08;
      p.noise.noise_sigma = 0.04;
      p.noise.amplitude = 0.08;
      p.noise.frequency = 2.0 * std::numbers::pi / 24.0;
      break;
    case 2:
      p.generator.line_width = 1;
      p.generator.gray_lo = 0.35;
      p.generator.gray_hi = 0.6;
      p.noise.noise_mean = 0.12;
      p.noise.noise_sigma = 0.08;
      p.noise.amplitude = 0.15;
      p.noise.frequency = 2.0 * std::numbers::pi / 16.0;
      break;
    default:
      throw ConfigError("dataset variant must be 1 or 2, got " + std::to_string(variant));
  }
  return p;
}

}  // namespace vesselsynth
