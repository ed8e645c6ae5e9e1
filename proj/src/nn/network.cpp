#include "vesselsynth/nn/network.hpp"

#include <cmath>

#include "vesselsynth/random.hpp"

namespace vesselsynth::nn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

template <typename T>
void accumulate(Tensor<T>& into, Tensor<T>&& from) {
  if (into.empty()) {
    into = std::move(from);
    return;
  }
  require_same_shape(into.shape(), from.shape(), "gradient accumulation");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

template <typename T>
void add_to(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  states_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerState<T>& s = states_[i];
    if (const auto* c = std::get_if<layer::Conv>(&spec_.layers[i])) {
      const Shape ws{c->out_channels, c->in_channels, c->kernel, c->kernel};
      s.conv = {Tensor<T>(ws), std::vector<T>(c->out_channels, T(0))};
      s.conv_grad = s.conv;
      s.conv_velocity = s.conv;
    } else if (const auto* b = std::get_if<layer::BatchNorm>(&spec_.layers[i])) {
      s.bn = BatchNormParams<T>(b->channels);
      s.bn_grad_gamma.assign(b->channels, T(0));
      s.bn_grad_beta.assign(b->channels, T(0));
      s.bn_velocity_gamma.assign(b->channels, T(0));
      s.bn_velocity_beta.assign(b->channels, T(0));
    }
  }
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerState<T>& s = states_[i];
    if (const auto* c = std::get_if<layer::Conv>(&spec_.layers[i])) {
      const double stddev = std::sqrt(2.0 / (c->in_channels * c->kernel * c->kernel));
      for (T& w : s.conv.weights.values()) w = static_cast<T>(normal(rng, 0.0, stddev));
      std::fill(s.conv.bias.begin(), s.conv.bias.end(), T(0));
    } else if (std::holds_alternative<layer::BatchNorm>(spec_.layers[i])) {
      s.bn = BatchNormParams<T>(s.bn.channels());
    }
  }
}

template <typename T>
void Network<T>::check_input(const Shape& s) const {
  if (s.c != spec_.input_channels())
    throw ShapeError("network input has " + std::to_string(s.c) + " channels, expected " +
                     std::to_string(spec_.input_channels()));
  if (!spec_.plan(s.h, s.w))
    throw ShapeError("network input " + s.str() + " is too small; minimum spatial size is " +
                     std::to_string(spec_.min_input_extent()) + "x" + std::to_string(spec_.min_input_extent()));
}

template <typename T>
Shape Network<T>::output_shape(const Shape& input) const {
  check_input(input);
  const auto p = spec_.plan(input.h, input.w);
  return Shape{input.n, p->channels.back(), p->height.back(), p->width.back()};
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, Mode mode) {
  check_input(input.shape());
  const std::size_t count = spec_.layers.size();
  input_ = input;
  outputs_.assign(count, Tensor<T>());
  bn_caches_.assign(count, BatchNormCache<T>());
  pool_argmax_.assign(count, {});
  const bool train = mode == Mode::train;

  for (std::size_t i = 0; i < count; ++i) {
    const Tensor<T>& in = i == 0 ? input_ : outputs_[i - 1];
    LayerState<T>& s = states_[i];
    outputs_[i] = std::visit(
        Overloaded{
            [&](const layer::Conv& c) {
              return conv2d_forward<T>(in, s.conv.weights, s.conv.bias, c.stride, c.pad);
            },
            [&](const layer::BatchNorm&) {
              return batchnorm_forward<T>(in, s.bn, mode, train ? &bn_caches_[i] : nullptr);
            },
            [&](const layer::Relu&) { return relu_forward(in); },
            [&](const layer::MaxPool&) {
              PoolResult<T> r = maxpool2_forward(in);
              if (train) pool_argmax_[i] = std::move(r.argmax);
              return std::move(r.output);
            },
            [&](const layer::Upsample&) { return upsample2_forward(in); },
            [&](const layer::CropConcat& cc) {
              return crop_concat_forward(in, outputs_[static_cast<std::size_t>(cc.source)]);
            },
        },
        spec_.layers[i]);
  }
  return outputs_.back();
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& d_logits) {
  const std::size_t count = spec_.layers.size();
  if (outputs_.size() != count || outputs_.back().empty())
    throw ShapeError("backward called without a preceding forward pass");
  require_same_shape(d_logits.shape(), outputs_.back().shape(), "network backward");

  std::vector<Tensor<T>> grads(count);
  grads.back() = d_logits;
  for (std::size_t i = count; i-- > 0;) {
    const Tensor<T>& in = i == 0 ? input_ : outputs_[i - 1];
    Tensor<T> d = std::move(grads[i]);
    if (d.empty()) d = Tensor<T>(outputs_[i].shape());
    LayerState<T>& s = states_[i];
    Tensor<T> d_in = std::visit(
        Overloaded{
            [&](const layer::Conv& c) {
              ConvGrads<T> g = conv2d_backward(in, s.conv.weights, c.stride, c.pad, d);
              add_to<T>(s.conv_grad.weights.values(), g.d_weights.values());
              add_to<T>(s.conv_grad.bias, g.d_bias);
              return std::move(g.d_input);
            },
            [&](const layer::BatchNorm&) {
              if (bn_caches_[i].normalized.empty())
                throw ShapeError("backward requires a train-mode forward pass");
              BatchNormGrads<T> g = batchnorm_backward<T>(bn_caches_[i], s.bn.gamma, d);
              add_to<T>(s.bn_grad_gamma, g.d_gamma);
              add_to<T>(s.bn_grad_beta, g.d_beta);
              return std::move(g.d_input);
            },
            [&](const layer::Relu&) { return relu_backward(in, d); },
            [&](const layer::MaxPool&) { return maxpool2_backward(in.shape(), pool_argmax_[i], d); },
            [&](const layer::Upsample&) { return upsample2_backward(d); },
            [&](const layer::CropConcat& cc) {
              const auto src = static_cast<std::size_t>(cc.source);
              auto [d_deep, d_skip] = crop_concat_backward(d, in.shape().c, outputs_[src].shape());
              accumulate(grads[src], std::move(d_skip));
              return std::move(d_deep);
            },
        },
        spec_.layers[i]);
    if (i == 0) return d_in;
    accumulate(grads[i - 1], std::move(d_in));
  }
  return {};
}

template <typename T>
Tensor<T> Network<T>::predict(const Tensor<T>& input) {
  return vessel_probability(forward(input, Mode::infer));
}

template <typename T>
void Network<T>::zero_grad() {
  for (LayerState<T>& s : states_) {
    s.conv_grad.weights.fill(T(0));
    std::fill(s.conv_grad.bias.begin(), s.conv_grad.bias.end(), T(0));
    std::fill(s.bn_grad_gamma.begin(), s.bn_grad_gamma.end(), T(0));
    std::fill(s.bn_grad_beta.begin(), s.bn_grad_beta.end(), T(0));
  }
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::parameters() {
  std::vector<ParamRef<T>> out;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    LayerState<T>& s = states_[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (std::holds_alternative<layer::Conv>(spec_.layers[i])) {
      out.push_back({prefix + "weight", s.conv.weights.values(), s.conv_grad.weights.values(),
                     s.conv_velocity.weights.values()});
      out.push_back({prefix + "bias", s.conv.bias, s.conv_grad.bias, s.conv_velocity.bias});
    } else if (std::holds_alternative<layer::BatchNorm>(spec_.layers[i])) {
      out.push_back({prefix + "gamma", s.bn.gamma, s.bn_grad_gamma, s.bn_velocity_gamma});
      out.push_back({prefix + "beta", s.bn.beta, s.bn_grad_beta, s.bn_velocity_beta});
    }
  }
  return out;
}

template <typename T>
std::vector<double> Network<T>::activation_norms() const {
  std::vector<double> out;
  out.reserve(outputs_.size());
  for (const Tensor<T>& t : outputs_) out.push_back(std::sqrt(t.squared_norm()));
  return out;
}

template <typename T>
std::vector<std::uint32_t> Network<T>::switch_pattern() const {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    if (std::holds_alternative<layer::Relu>(spec_.layers[i])) {
      for (T v : outputs_[i].values()) out.push_back(v > T(0) ? 1u : 0u);
    } else if (std::holds_alternative<layer::MaxPool>(spec_.layers[i])) {
      out.insert(out.end(), pool_argmax_[i].begin(), pool_argmax_[i].end());
    }
  }
  return out;
}

template class Network<float>;
template class Network<double>;

}  // namespace vesselsynth::nn
