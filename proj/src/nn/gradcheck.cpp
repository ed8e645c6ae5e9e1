#include "vesselsynth/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vesselsynth/nn/network.hpp"
#include "vesselsynth/nn/ops.hpp"
#include "vesselsynth/random.hpp"

namespace vesselsynth::nn {

namespace {

using TensorD = Tensor<double>;

TensorD random_tensor(Rng& rng, Shape s, double sigma = 1.0) {
  TensorD t(s);
  for (double& v : t.values()) v = normal(rng, 0.0, sigma);
  return t;
}

double dot(const TensorD& a, const TensorD& b) {
  require_same_shape(a.shape(), b.shape(), "gradcheck projection");
  return std::inner_product(a.data(), a.data() + a.size(), b.data(), 0.0);
}

GradCheckResult make_result(std::string name, double tol) { return GradCheckResult{std::move(name), 0.0, tol, 0}; }

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

namespace {

double max_abs(std::span<const double> v) {
  double largest = 0.0;
  for (double a : v) largest = std::max(largest, std::abs(a));
  return largest;
}

}  // namespace

void compare_with_finite_differences(std::span<double> values, std::span<const double> analytic,
                                     const std::function<double()>& loss, GradCheckResult& result, double step,
                                     double scale) {
  const double floor = kRelativeFloor * std::max(scale, max_abs(analytic));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = loss();
    values[i] = saved - step;
    const double minus = loss();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric, floor));
    ++result.checked;
  }
}

void compare_skipping_kinks(std::span<double> values, std::span<const double> analytic,
                            const std::function<double()>& loss,
                            const std::function<std::vector<std::uint32_t>()>& pattern, GradCheckResult& result,
                            double step, double scale) {
  const double floor = kRelativeFloor * std::max(scale, max_abs(analytic));
  loss();
  const std::vector<std::uint32_t> center = pattern();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = loss();
    const bool plus_smooth = pattern() == center;
    values[i] = saved - step;
    const double minus = loss();
    const bool minus_smooth = pattern() == center;
    values[i] = saved;
    if (!plus_smooth || !minus_smooth) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * step);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric, floor));
    ++result.checked;
  }
}

GradCheckResult check_conv2d(std::uint64_t seed, int stride, int pad) {
  Rng rng(seed);
  TensorD input = random_tensor(rng, {2, 3, 8, 8});
  TensorD weights = random_tensor(rng, {4, 3, 3, 3});
  std::vector<double> bias(4);
  for (double& b : bias) b = normal(rng, 0.0, 1.0);
  const TensorD probe = conv2d_forward<double>(input, weights, bias, stride, pad);
  const TensorD proj = random_tensor(rng, probe.shape());
  const auto loss = [&] { return dot(conv2d_forward<double>(input, weights, bias, stride, pad), proj); };

  const ConvGrads<double> g = conv2d_backward(input, weights, stride, pad, proj);
  GradCheckResult r = make_result("conv2d(stride=" + std::to_string(stride) + ",pad=" + std::to_string(pad) + ")",
                                  kLayerTolerance);
  compare_with_finite_differences(input.values(), g.d_input.values(), loss, r);
  compare_with_finite_differences(weights.values(), g.d_weights.values(), loss, r);
  compare_with_finite_differences(bias, g.d_bias, loss, r);
  return r;
}

GradCheckResult check_batchnorm(std::uint64_t seed) {
  Rng rng(seed);
  TensorD input = random_tensor(rng, {2, 3, 8, 8});
  // Distinct per-channel offsets and scales.
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 64; ++i) input.plane(n, c)[i] = input.plane(n, c)[i] * (1.0 + c) + 0.5 * c;
  BatchNormParams<double> params(3);
  for (int c = 0; c < 3; ++c) {
    // |gamma| in [0.5, 1.5]: a near-zero gamma shrinks the channel's
    // gradient to the level of finite-difference roundoff.
    params.gamma[c] = (uniform_int(rng, 0, 1) ? 1.0 : -1.0) * uniform_real(rng, 0.5, 1.5);
    params.beta[c] = normal(rng, 0.0, 0.5);
  }
  BatchNormCache<double> cache;
  const TensorD probe = batchnorm_forward(input, params, Mode::train, &cache, false);
  const TensorD proj = random_tensor(rng, probe.shape());
  const auto loss = [&] { return dot(batchnorm_forward<double>(input, params, Mode::train, nullptr, false), proj); };

  const BatchNormGrads<double> g = batchnorm_backward<double>(cache, params.gamma, proj);
  GradCheckResult r = make_result("batchnorm(train)", kLayerTolerance);
  compare_with_finite_differences(input.values(), g.d_input.values(), loss, r);
  compare_with_finite_differences(params.gamma, g.d_gamma, loss, r);
  compare_with_finite_differences(params.beta, g.d_beta, loss, r);
  return r;
}

GradCheckResult check_relu(std::uint64_t seed) {
  Rng rng(seed);
  TensorD input = random_tensor(rng, {2, 3, 6, 6});
  // Keep every entry well away from the kink at 0.
  for (double& v : input.values()) v = v >= 0.0 ? v + 0.05 : v - 0.05;
  const TensorD proj = random_tensor(rng, input.shape());
  const auto loss = [&] { return dot(relu_forward(input), proj); };
  const TensorD d_in = relu_backward(input, proj);
  GradCheckResult r = make_result("relu", kLayerTolerance);
  compare_with_finite_differences(input.values(), d_in.values(), loss, r);
  return r;
}

GradCheckResult check_maxpool(std::uint64_t seed) {
  Rng rng(seed);
  // Odd height exercises floor semantics. Values are a shuffled ladder with
  // spacing 0.01, so no window has a near-tie.
  TensorD input(Shape{2, 3, 9, 8});
  std::vector<double> ladder(input.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) ladder[i] = 0.01 * static_cast<double>(i) - 2.0;
  for (std::size_t i = ladder.size(); i > 1; --i)
    std::swap(ladder[i - 1], ladder[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1))]);
  std::copy(ladder.begin(), ladder.end(), input.data());
  const PoolResult<double> probe = maxpool2_forward(input);
  const TensorD proj = random_tensor(rng, probe.output.shape());
  const auto loss = [&] { return dot(maxpool2_forward(input).output, proj); };
  const TensorD d_in = maxpool2_backward(input.shape(), probe.argmax, proj);
  GradCheckResult r = make_result("maxpool2", kLayerTolerance);
  compare_with_finite_differences(input.values(), d_in.values(), loss, r);
  return r;
}

GradCheckResult check_upsample(std::uint64_t seed) {
  Rng rng(seed);
  TensorD input = random_tensor(rng, {2, 3, 5, 4});
  const TensorD proj = random_tensor(rng, {2, 3, 10, 8});
  const auto loss = [&] { return dot(upsample2_forward(input), proj); };
  const TensorD d_in = upsample2_backward(proj);
  GradCheckResult r = make_result("upsample2", kLayerTolerance);
  compare_with_finite_differences(input.values(), d_in.values(), loss, r);
  return r;
}

GradCheckResult check_crop_concat(std::uint64_t seed) {
  Rng rng(seed);
  TensorD deep = random_tensor(rng, {2, 2, 6, 6});
  TensorD skip = random_tensor(rng, {2, 3, 10, 9});
  TensorD weights = random_tensor(rng, {2, 5, 3, 3});
  const std::vector<double> bias{0.1, -0.2};
  const auto head = [&] { return conv2d_forward<double>(crop_concat_forward(deep, skip), weights, bias, 1, 0); };
  const TensorD proj = random_tensor(rng, head().shape());
  const auto loss = [&] { return dot(head(), proj); };

  const TensorD joined = crop_concat_forward(deep, skip);
  const ConvGrads<double> g = conv2d_backward(joined, weights, 1, 0, proj);
  const auto [d_deep, d_skip] = crop_concat_backward(g.d_input, deep.shape().c, skip.shape());
  GradCheckResult r = make_result("crop_concat+conv", kLayerTolerance);
  compare_with_finite_differences(deep.values(), d_deep.values(), loss, r);
  compare_with_finite_differences(skip.values(), d_skip.values(), loss, r);
  compare_with_finite_differences(weights.values(), g.d_weights.values(), loss, r);
  return r;
}

GradCheckResult check_softmax_ce(std::uint64_t seed) {
  Rng rng(seed);
  TensorD logits = random_tensor(rng, {2, 2, 5, 5});
  TensorD labels(Shape{2, 1, 7, 7});
  for (double& v : labels.values()) v = uniform_int(rng, 0, 1);
  const auto loss = [&] { return pixelwise_softmax_ce(logits, labels).loss; };
  const LossResult<double> g = pixelwise_softmax_ce(logits, labels);
  GradCheckResult r = make_result("softmax_ce", kSoftmaxTolerance);
  compare_with_finite_differences(logits.values(), g.d_logits.values(), loss, r);
  return r;
}

GradCheckResult check_network(std::uint64_t seed) {
  const NetworkSpec spec = NetworkSpec::parse(
      "conv 3 1 4; bn 4; relu; conv 3 4 4; bn 4; relu; maxpool; conv 3 4 6; bn 6; relu; upsample; concat 5; "
      "conv 3 10 4; relu; conv 1 4 2");
  Network<double> net(spec);
  net.initialize(seed);
  Rng rng(derive_seed(seed, 1));
  for (ParamRef<double>& p : net.parameters())
    if (p.name.ends_with("gamma") || p.name.ends_with("beta"))
      for (double& v : p.value) v += normal(rng, 0.0, 0.2);
  TensorD input = random_tensor(rng, {2, 1, 16, 16});
  TensorD labels(Shape{2, 1, 16, 16});
  for (double& v : labels.values()) v = uniform_int(rng, 0, 1);

  const auto loss = [&] { return pixelwise_softmax_ce(net.forward(input, Mode::train), labels).loss; };
  const auto pattern = [&] { return net.switch_pattern(); };
  net.zero_grad();
  const LossResult<double> l = pixelwise_softmax_ce(net.forward(input, Mode::train), labels);
  const TensorD d_input = net.backward(l.d_logits);

  GradCheckResult r = make_result("network", kNetworkTolerance);
  // A conv bias feeding batchnorm has an exactly zero gradient; its entries
  // are judged on the scale of the largest parameter gradient.
  double scale = 0.0;
  for (ParamRef<double>& p : net.parameters()) scale = std::max(scale, max_abs(p.grad));
  for (ParamRef<double>& p : net.parameters()) {
    const std::vector<double> analytic(p.grad.begin(), p.grad.end());
    compare_skipping_kinks(p.value, analytic, loss, pattern, r, kFiniteDifferenceStep, scale);
  }
  compare_skipping_kinks(input.values(), d_input.values(), loss, pattern, r);
  return r;
}

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed) {
  return {
      check_conv2d(derive_seed(seed, 1), 1, 0), check_conv2d(derive_seed(seed, 2), 2, 1),
      check_batchnorm(derive_seed(seed, 3)),    check_relu(derive_seed(seed, 4)),
      check_maxpool(derive_seed(seed, 5)),      check_upsample(derive_seed(seed, 6)),
      check_crop_concat(derive_seed(seed, 7)),  check_softmax_ce(derive_seed(seed, 8)),
      check_network(derive_seed(seed, 9)),
  };
}

}  // namespace vesselsynth::nn
