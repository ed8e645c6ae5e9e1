#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vesselsynth/image.hpp"
#include "vesselsynth/random.hpp"
#include "vesselsynth/synthgen.hpp"

namespace vesselsynth::noise {

/// Background noise parameters: a global uniform bias plus i.i.d. Gaussian
/// field, and smooth sinusoidal fields inside random non-overlapping patches.
struct NoiseConfig {
  double noise_mean = 0.12;
  double noise_sigma = 0.08;
  int max_patches = 5;           ///< patch count n is drawn from {0, ..., max_patches - 1}
  int patch_size = 48;
  double frequency = 0.39269908169872414;  ///< radians per pixel of distance
  double amplitude = 0.15;
  double bias_lo = 0.0;
  double bias_hi = 0.2;
  std::uint64_t seed = 0;

  void validate(int image_size) const;
};

/// Axis-aligned square with top-left corner (x, y).
struct Rect {
  int x = 0;
  int y = 0;
  int size = 0;

  bool intersects(const Rect& o) const {
    return x < o.x + o.size && o.x < x + size && y < o.y + o.size && o.y < y + size;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PatchSelection {
  std::vector<Rect> patches;
  int requested = 0;  ///< n drawn before placement; patches.size() may fall short
};

/// Placement attempts per patch before giving up on it.
inline constexpr int kPatchRetries = 64;

/// Adds one uniform bias b and a Normal(noise_mean, noise_sigma) field, then clips to [0, 1].
void add_global_noise(GrayImage& image, const NoiseConfig& cfg, Rng& rng);

PatchSelection select_patches(Rng& rng, int image_size, int patch_size, int max_patches);

/// Adds amplitude * sin(frequency * d + phase) inside `patch`, d being the
/// Euclidean distance from the patch's top-left corner. Clips to [0, 1].
void add_sine_patch(GrayImage& image, const Rect& patch, double amplitude, double frequency, double phase);

/// One uniform phase in [0, 2 pi) per patch.
void add_local_sine(GrayImage& image, std::span<const Rect> patches, const NoiseConfig& cfg, Rng& rng);

/// generate_raw, then local sine patches, then global noise. The label is the raw one.
synth::Sample make_sample(const synth::GeneratorConfig& gen_cfg, const NoiseConfig& noise_cfg,
                          std::uint64_t seed);

/// Fraction of label pixels equal to 1.
double label_fraction(const Mask& label);

}  // namespace vesselsynth::noise
