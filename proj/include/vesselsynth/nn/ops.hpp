#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vesselsynth/nn/tensor.hpp"

namespace vesselsynth::nn {

/// floor((in + 2 pad - kernel) / stride) + 1, or <= 0 when the window does not fit.
int conv_output_extent(int in, int kernel, int stride, int pad);

// ---- convolution (cross-correlation) --------------------------------------

template <typename T>
struct ConvGrads {
  Tensor<T> d_input;
  Tensor<T> d_weights;
  std::vector<T> d_bias;
};

/// weights: (out_ch, in_ch, k, k); bias: out_ch values.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias, int stride,
                         int pad);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, int stride, int pad,
                             const Tensor<T>& d_out);

// ---- batch normalization ---------------------------------------------------

enum class Mode { train, infer };

template <typename T>
struct BatchNormParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;  ///< unbiased estimate
  bool stats_initialized = false;

  explicit BatchNormParams(int channels = 0)
      : gamma(channels, T(1)), beta(channels, T(0)), running_mean(channels, T(0)), running_var(channels, T(1)) {}
  int channels() const { return static_cast<int>(gamma.size()); }
};

inline constexpr double kBatchNormEps = 1e-5;
/// Weight of the newest batch in the running statistics.
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;  ///< x_hat, before scale and shift
  std::vector<T> inv_std;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> d_input;
  std::vector<T> d_gamma;
  std::vector<T> d_beta;
};

/// Train mode normalizes with batch statistics over (n, h, w) and updates
/// the running statistics (the first update copies the batch statistics).
/// Infer mode uses the running statistics and throws NumericalError if none
/// have been recorded yet. `cache` may be null.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                            BatchNormCache<T>* cache = nullptr, bool update_running = true);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma,
                                     const Tensor<T>& d_out);

// ---- pointwise / resampling ------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& d_out);

/// 2x2, stride 2; odd trailing rows/columns are dropped (floor semantics).
template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  ///< flat input index per output element
};

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& d_out);

/// 2x nearest neighbour.
template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& d_out);

// ---- crop + concatenate ----------------------------------------------------

template <typename T>
Tensor<T> center_crop(const Tensor<T>& input, int h, int w);

/// Output channels are [deep..., cropped skip...].
template <typename T>
Tensor<T> crop_concat_forward(const Tensor<T>& deep, const Tensor<T>& skip);

/// Returns (d_deep, d_skip); d_skip is zero outside the cropped window.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> crop_concat_backward(const Tensor<T>& d_out, int deep_channels,
                                                     const Shape& skip_shape);

// ---- pixel-wise softmax ----------------------------------------------------

/// Per-pixel two-class softmax; output has the same (n, 2, h, w) shape.
template <typename T>
Tensor<T> softmax2(const Tensor<T>& logits);

/// Class-1 probability, shape (n, 1, h, w).
template <typename T>
Tensor<T> vessel_probability(const Tensor<T>& logits);

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> d_logits;
};

/// Mean cross-entropy over all output pixels. `labels` is (n, 1, H, W) with
/// values in {0, 1}; larger label maps are center-cropped to the logits.
template <typename T>
LossResult<T> pixelwise_softmax_ce(const Tensor<T>& logits, const Tensor<T>& labels);

}  // namespace vesselsynth::nn
