#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vesselsynth/nn/network.hpp"
#include "vesselsynth/random.hpp"

namespace vesselsynth::nn {

/// Everything besides the weights needed to continue training bit-identically.
struct TrainingState {
  std::uint64_t iteration = 0;
  Rng rng;
};

struct Checkpoint {
  Network<float> network;
  TrainingState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Byte layout (all integers and floats little-endian):
//
//   char[8]  magic "VSNNCKPT"
//   u32      format version
//   u32      layer count L
//   L x layer record:
//     u8 kind: 0 conv, 1 batchnorm, 2 relu, 3 maxpool, 4 upsample, 5 concat
//     conv:      i32 kernel, i32 in, i32 out, i32 stride, i32 pad
//     batchnorm: i32 channels, u8 running statistics initialized
//     concat:    i32 source layer
//   u64      iteration
//   u32 n, char[n]  RNG state (decimal words of the mt19937_64 state)
//   parameter blobs in layer order, each f32[]:
//     conv:      weights, bias, weight velocity, bias velocity
//     batchnorm: gamma, beta, running mean, running var, gamma velocity, beta velocity
//   char[4]  trailer "END\0"
std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net, const TrainingState& state);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, const TrainingState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vesselsynth::nn
