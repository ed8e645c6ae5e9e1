#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vesselsynth/dataio.hpp"
#include "vesselsynth/eval.hpp"
#include "vesselsynth/image.hpp"
#include "vesselsynth/nn/network.hpp"
#include "vesselsynth/noisegen.hpp"
#include "vesselsynth/synthgen.hpp"

namespace vesselsynth::pipeline {

/// (1, 1, H, W) copy of the image.
nn::Tensor<float> to_tensor(const GrayImage& image);
/// Channel `c` of batch item `n`.
GrayImage tensor_plane(const nn::Tensor<float>& t, int n = 0, int c = 0);

enum class PredictMode {
  valid,   ///< output is smaller than the input; truth and FOV are center-cropped to it
  mirror,  ///< input is mirror-padded so the output covers the whole image
};

/// Vessel probability at the network's output resolution. The map is
/// centered on the input: offset (in - out) / 2 on each axis.
GrayImage predict_valid(nn::Network<float>& net, const GrayImage& input);

/// Vessel probability with the same size as `input`, computed on a
/// reflect-101 padded copy.
GrayImage predict_mirror(nn::Network<float>& net, const GrayImage& input);

GrayImage predict(nn::Network<float>& net, const GrayImage& input, PredictMode mode);

/// Network input for a fundus image: 1 - gray.
GrayImage preprocess(const GrayImage& gray);

struct CaseResult {
  eval::ImageMetrics metrics;
  std::optional<eval::RocCurve> roc;  ///< empty when the FOV holds one class only
  GrayImage prob;                     ///< same shape as truth and fov below
  Mask truth;
  Mask fov;
};

/// preprocess -> predict -> crop truth/FOV to the map (valid mode) -> metrics.
CaseResult evaluate_case(nn::Network<float>& net, const io::FundusCase& c, PredictMode mode, double threshold,
                         eval::ThresholdStrategy strategy = eval::ThresholdStrategy::all_distinct());

/// `count` seeds from derive_seed(base, i).
std::vector<std::uint64_t> heldout_seeds(std::uint64_t base, int count);

/// Mean per-image AUC on generated samples (no inversion). Truth is center
/// cropped to the network output and the FOV is the whole cropped frame.
double synthetic_auc(nn::Network<float>& net, const synth::GeneratorConfig& gen, const noise::NoiseConfig& noise,
                     std::span<const std::uint64_t> seeds);

}  // namespace vesselsynth::pipeline
