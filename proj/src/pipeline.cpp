#include "vesselsynth/pipeline.hpp"

#include <algorithm>

#include "vesselsynth/random.hpp"

namespace vesselsynth::pipeline {

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

GrayImage pad_reflect(const GrayImage& src, int pad_x, int pad_y) {
  GrayImage out(src.width + 2 * pad_x, src.height + 2 * pad_y);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out(x, y) = src(reflect101(x - pad_x, src.width), reflect101(y - pad_y, src.height));
  return out;
}

}  // namespace

nn::Tensor<float> to_tensor(const GrayImage& image) {
  nn::Tensor<float> t(nn::Shape{1, 1, image.height, image.width});
  std::copy(image.pixels.begin(), image.pixels.end(), t.data());
  return t;
}

GrayImage tensor_plane(const nn::Tensor<float>& t, int n, int c) {
  GrayImage out(t.shape().w, t.shape().h);
  const float* p = t.plane(n, c);
  std::copy(p, p + out.size(), out.pixels.begin());
  return out;
}

GrayImage predict_valid(nn::Network<float>& net, const GrayImage& input) {
  return tensor_plane(net.predict(to_tensor(input)));
}

GrayImage predict_mirror(nn::Network<float>& net, const GrayImage& input) {
  const nn::NetworkSpec& spec = net.spec();
  // Smallest symmetric padding per axis whose output covers the input.
  const auto find_pad = [&](int extent, int other) {
    for (int p = 0; p <= 4 * spec.min_input_extent() + 64; ++p) {
      const auto plan = spec.plan(extent + 2 * p, std::max(other, spec.min_input_extent()));
      if (plan && plan->height.back() >= extent) return p;
    }
    throw ShapeError("predict_mirror: no padding makes the output cover the input");
  };
  const int pad_y = find_pad(input.height, input.width);
  const int pad_x = find_pad(input.width, input.height);
  const GrayImage prob = predict_valid(net, pad_reflect(input, pad_x, pad_y));
  return center_crop(prob, input.width, input.height);
}

GrayImage predict(nn::Network<float>& net, const GrayImage& input, PredictMode mode) {
  return mode == PredictMode::mirror ? predict_mirror(net, input) : predict_valid(net, input);
}

GrayImage preprocess(const GrayImage& gray) { return io::invert(gray); }

CaseResult evaluate_case(nn::Network<float>& net, const io::FundusCase& c, PredictMode mode, double threshold,
                         eval::ThresholdStrategy strategy) {
  CaseResult r;
  r.prob = predict(net, preprocess(c.image), mode);
  r.truth = center_crop(c.truth, r.prob.width, r.prob.height);
  r.fov = center_crop(c.fov, r.prob.width, r.prob.height);
  r.metrics = eval::evaluate_image(c.id, r.prob, r.truth, r.fov, threshold, strategy);
  if (r.metrics.auc) r.roc = eval::roc(r.prob, r.truth, r.fov, strategy);
  return r;
}

std::vector<std::uint64_t> heldout_seeds(std::uint64_t base, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(i)));
  return seeds;
}

double synthetic_auc(nn::Network<float>& net, const synth::GeneratorConfig& gen, const noise::NoiseConfig& noise,
                     std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("synthetic_auc: no seeds");
  double sum = 0.0;
  for (std::uint64_t seed : seeds) {
    const synth::Sample s = noise::make_sample(gen, noise, seed);
    const GrayImage prob = predict_valid(net, s.image);
    const Mask truth = center_crop(s.label, prob.width, prob.height);
    const Mask fov(prob.width, prob.height, 1);
    sum += eval::auc(eval::roc(prob, truth, fov));
  }
  return sum / static_cast<double>(seeds.size());
}

}  // namespace vesselsynth::pipeline
