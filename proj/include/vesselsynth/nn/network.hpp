#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vesselsynth/nn/network_spec.hpp"
#include "vesselsynth/nn/ops.hpp"
#include "vesselsynth/nn/tensor.hpp"

namespace vesselsynth::nn {

template <typename T>
struct ConvParams {
  Tensor<T> weights;  ///< (out, in, k, k)
  std::vector<T> bias;
};

/// Learnable parameter with its gradient and momentum buffers.
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
  std::span<T> velocity;
};

/// Trainable state of one layer; only the members matching the layer kind are used.
template <typename T>
struct LayerState {
  ConvParams<T> conv;
  ConvParams<T> conv_grad;
  ConvParams<T> conv_velocity;
  BatchNormParams<T> bn;
  std::vector<T> bn_grad_gamma, bn_grad_beta;
  std::vector<T> bn_velocity_gamma, bn_velocity_beta;
};

/// Fully-convolutional segmentation network built from a NetworkSpec.
///
/// forward() in train mode keeps every activation for the following
/// backward(); gradients accumulate until zero_grad().
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }

  /// He-scaled Gaussian conv weights, zero biases, gamma 1, beta 0.
  void initialize(std::uint64_t seed);

  /// Returns logits (n, 2, h', w'). Throws ShapeError if the input is smaller
  /// than min_input_extent() or has the wrong channel count.
  Tensor<T> forward(const Tensor<T>& input, Mode mode);

  /// Backpropagates d_logits from the last train-mode forward. Returns d_input.
  Tensor<T> backward(const Tensor<T>& d_logits);

  /// Infer-mode forward followed by the per-pixel class-1 softmax, (n, 1, h', w').
  Tensor<T> predict(const Tensor<T>& input);

  Shape output_shape(const Shape& input) const;

  void zero_grad();
  std::vector<ParamRef<T>> parameters();

  std::vector<LayerState<T>>& layer_states() { return states_; }
  const std::vector<LayerState<T>>& layer_states() const { return states_; }

  /// L2 norm of every cached activation, for diagnostics after a failure.
  std::vector<double> activation_norms() const;

  /// Relu on/off states and max-pool argmax indices of the last train-mode
  /// forward. Equal patterns mean both inputs lie in one smooth piece.
  std::vector<std::uint32_t> switch_pattern() const;

  template <typename U>
  Network<U> cast() const;

 private:
  void check_input(const Shape& s) const;

  NetworkSpec spec_;
  std::vector<LayerState<T>> states_;

  // Per-layer caches from the last train-mode forward.
  Tensor<T> input_;
  std::vector<Tensor<T>> outputs_;
  std::vector<BatchNormCache<T>> bn_caches_;
  std::vector<std::vector<std::uint32_t>> pool_argmax_;
};

extern template class Network<float>;
extern template class Network<double>;

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out(spec_);
  auto& dst = out.layer_states();
  const auto conv_cast = [](const ConvParams<T>& p) {
    return ConvParams<U>{p.weights.template cast<U>(), std::vector<U>(p.bias.begin(), p.bias.end())};
  };
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const LayerState<T>& s = states_[i];
    if (!s.conv.weights.empty()) {
      dst[i].conv = conv_cast(s.conv);
      dst[i].conv_velocity = conv_cast(s.conv_velocity);
    }
    dst[i].bn.gamma.assign(s.bn.gamma.begin(), s.bn.gamma.end());
    dst[i].bn.beta.assign(s.bn.beta.begin(), s.bn.beta.end());
    dst[i].bn.running_mean.assign(s.bn.running_mean.begin(), s.bn.running_mean.end());
    dst[i].bn.running_var.assign(s.bn.running_var.begin(), s.bn.running_var.end());
    dst[i].bn.stats_initialized = s.bn.stats_initialized;
    dst[i].bn_velocity_gamma.assign(s.bn_velocity_gamma.begin(), s.bn_velocity_gamma.end());
    dst[i].bn_velocity_beta.assign(s.bn_velocity_beta.begin(), s.bn_velocity_beta.end());
  }
  return out;
}

}  // namespace vesselsynth::nn
