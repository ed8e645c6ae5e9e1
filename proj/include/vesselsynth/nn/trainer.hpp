#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "vesselsynth/nn/checkpoint.hpp"
#include "vesselsynth/nn/network.hpp"
#include "vesselsynth/noisegen.hpp"
#include "vesselsynth/synthgen.hpp"

namespace vesselsynth::nn {

/// Source of training pairs. Any randomness must come from the supplied RNG
/// so that a checkpointed RNG state reproduces the stream.
class SampleStream {
 public:
  virtual ~SampleStream() = default;
  virtual synth::Sample next(Rng& rng) = 0;
};

/// Generates a fresh noisy sample per draw; the sample seed is one RNG word.
class GeneratedStream final : public SampleStream {
 public:
  GeneratedStream(synth::GeneratorConfig gen, noise::NoiseConfig noise);
  synth::Sample next(Rng& rng) override;

 private:
  synth::GeneratorConfig gen_;
  noise::NoiseConfig noise_;
};

struct TrainOptions {
  std::uint64_t iterations = 0;  ///< iterations to run from the current state
  int batch_size = 2;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t checkpoint_every = 0;  ///< 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  std::ostream* loss_csv = nullptr;  ///< receives `iteration,loss` rows (no header)
};

struct TrainReport {
  std::vector<double> losses;
  std::vector<std::filesystem::path> checkpoints;
};

struct Batch {
  Tensor<float> images;  ///< (n, 1, H, W)
  Tensor<float> labels;  ///< (n, 1, H, W), 0 or 1
};

/// All samples must share one image size.
Batch make_batch(std::span<const synth::Sample> samples);

/// v <- momentum v - lr g; w <- w + v, for every parameter.
void sgd_momentum_step(Network<float>& net, double learning_rate, double momentum);

/// One forward/backward/update on a batch; returns the loss before the update.
/// Throws NumericalError (with activation norms) on a non-finite loss.
double train_step(Network<float>& net, const Batch& batch, double learning_rate, double momentum,
                  std::uint64_t iteration);

/// Runs `options.iterations` steps, advancing `state`. Deterministic given
/// (network, state, stream, options).
TrainReport train(Network<float>& net, TrainingState& state, SampleStream& stream, const TrainOptions& options);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t iteration);

}  // namespace vesselsynth::nn
