#pragma once

#include "vesselsynth/noisegen.hpp"
#include "vesselsynth/synthgen.hpp"

namespace vesselsynth {

/// Bundled generator + noise parameter blocks.
///
/// Variant 1: wide (3 px), high-contrast lines under mild noise.
/// Variant 2: thin (1 px), low-contrast lines under heavier noise.
struct DatasetPreset {
  int variant = 2;
  synth::GeneratorConfig generator;
  noise::NoiseConfig noise;
};

/// Throws ConfigError for anything but 1 or 2.
DatasetPreset dataset_preset(int variant);

}  // namespace vesselsynth
