#include "vesselsynth/noisegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace vesselsynth::noise {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("noise config: ") + what);
}

float clip01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

void NoiseConfig::validate(int image_size) const {
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(amplitude >= 0.0, "amplitude must be >= 0");
  require(frequency > 0.0, "frequency must be > 0");
  require(max_patches >= 0, "max_patches must be >= 0");
  require(patch_size >= 1 && patch_size <= image_size, "patch_size must be in [1, image_size]");
  require(bias_lo <= bias_hi, "bias range must satisfy bias_lo <= bias_hi");
}

void add_global_noise(GrayImage& image, const NoiseConfig& cfg, Rng& rng) {
  const double bias = uniform_real(rng, cfg.bias_lo, cfg.bias_hi);
  for (float& px : image.pixels) px = clip01(px + normal(rng, cfg.noise_mean, cfg.noise_sigma) + bias);
}

PatchSelection select_patches(Rng& rng, int image_size, int patch_size, int max_patches) {
  PatchSelection out;
  if (max_patches < 1 || patch_size > image_size) return out;
  out.requested = uniform_int(rng, 0, max_patches - 1);
  const int last = image_size - patch_size;
  for (int i = 0; i < out.requested; ++i) {
    for (int attempt = 0; attempt < kPatchRetries; ++attempt) {
      const Rect r{uniform_int(rng, 0, last), uniform_int(rng, 0, last), patch_size};
      const bool clash = std::any_of(out.patches.begin(), out.patches.end(),
                                     [&](const Rect& p) { return p.intersects(r); });
      if (!clash) {
        out.patches.push_back(r);
        break;
      }
    }
  }
  return out;
}

void add_sine_patch(GrayImage& image, const Rect& patch, double amplitude, double frequency, double phase) {
  for (int dy = 0; dy < patch.size; ++dy) {
    for (int dx = 0; dx < patch.size; ++dx) {
      const int x = patch.x + dx;
      const int y = patch.y + dy;
      if (!image.contains(x, y)) continue;
      const double dist = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
      image(x, y) = clip01(image(x, y) + amplitude * std::sin(frequency * dist + phase));
    }
  }
}

void add_local_sine(GrayImage& image, std::span<const Rect> patches, const NoiseConfig& cfg, Rng& rng) {
  for (const Rect& patch : patches) {
    const double phase = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    add_sine_patch(image, patch, cfg.amplitude, cfg.frequency, phase);
  }
}

synth::Sample make_sample(const synth::GeneratorConfig& gen_cfg, const NoiseConfig& noise_cfg,
                          std::uint64_t seed) {
  noise_cfg.validate(gen_cfg.image_size);
  synth::Sample sample = synth::generate_raw(gen_cfg, seed);
  // The noise stream is independent of the geometry stream.
  Rng rng(derive_seed(seed, 0x6e6f697365ULL));
  const PatchSelection sel = select_patches(rng, gen_cfg.image_size, noise_cfg.patch_size, noise_cfg.max_patches);
  add_local_sine(sample.image, sel.patches, noise_cfg, rng);
  add_global_noise(sample.image, noise_cfg, rng);
  return sample;
}

double label_fraction(const Mask& label) {
  if (label.pixels.empty()) return 0.0;
  const auto on = std::count(label.pixels.begin(), label.pixels.end(), std::uint8_t{1});
  return static_cast<double>(on) / static_cast<double>(label.pixels.size());
}

}  // namespace vesselsynth::noise
