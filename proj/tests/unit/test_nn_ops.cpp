#include <cmath>
#include <numbers>
#include <numeric>

#include <doctest.h>

#include "support.hpp"
#include "vesselsynth/errors.hpp"
#include "vesselsynth/nn/gradcheck.hpp"
#include "vesselsynth/nn/ops.hpp"

using namespace vesselsynth;
using namespace vesselsynth::nn;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(s);
  for (auto& v : t.values()) v = normal(rng, 0.0, 1.0);
  return t;
}

double sum(const Tensor<double>& t) { return std::accumulate(t.values().begin(), t.values().end(), 0.0); }

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("tensor indexing is NCHW") {
  Tensor<float> t(Shape{2, 3, 4, 5});
  CHECK(t.size() == 120);
  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t[119] == 7.0f);
  t.at(1, 0, 0, 0) = 1.0f;
  CHECK(t[60] == 1.0f);
  CHECK(t.plane(1, 2)[19] == 7.0f);
  CHECK(Shape{2, 3, 4, 5}.str().find('5') != std::string::npos);
  CHECK_THROWS_AS(require_same_shape(Shape{1, 1, 2, 2}, Shape{1, 1, 2, 3}, "test"), ShapeError);
}

TEST_CASE("conv of ones with a 3x3 ones kernel is 9") {
  const Tensor<double> in(Shape{1, 1, 3, 3}, 1.0);
  const Tensor<double> w(Shape{1, 1, 3, 3}, 1.0);
  const std::vector<double> b{0.0};
  const auto out = conv2d_forward<double>(in, w, b, 1, 0);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out[0] == 9.0);
}

TEST_CASE("identity kernel with pad 1 reproduces the input") {
  const auto in = random_tensor(Shape{2, 3, 7, 6}, 1);
  Tensor<double> w(Shape{3, 3, 3, 3}, 0.0);
  for (int c = 0; c < 3; ++c) w.at(c, c, 1, 1) = 1.0;
  const std::vector<double> b(3, 0.0);
  const auto out = conv2d_forward<double>(in, w, b, 1, 1);
  CHECK(out == in);
}

TEST_CASE("conv output extent and bias") {
  CHECK(conv_output_extent(8, 3, 1, 0) == 6);
  CHECK(conv_output_extent(8, 3, 2, 1) == 4);
  CHECK(conv_output_extent(7, 3, 2, 0) == 3);
  CHECK(conv_output_extent(2, 3, 1, 0) <= 0);
  const Tensor<double> in(Shape{1, 2, 5, 5}, 0.0);
  const Tensor<double> w(Shape{4, 2, 3, 3}, 1.0);
  const std::vector<double> b{1.0, 2.0, 3.0, 4.0};
  const auto out = conv2d_forward<double>(in, w, b, 2, 1);
  CHECK(out.shape() == Shape{1, 4, 3, 3});
  CHECK(out.at(0, 3, 2, 2) == 4.0);
}

TEST_CASE("conv matches a direct loop on random data") {
  const auto in = random_tensor(Shape{2, 3, 9, 8}, 2);
  const auto w = random_tensor(Shape{4, 3, 3, 3}, 3);
  const std::vector<double> b{0.1, -0.2, 0.3, 0.0};
  const int stride = 2, pad = 1;
  const auto out = conv2d_forward<double>(in, w, b, stride, pad);
  const Shape s = out.shape();
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < s.c; ++o)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          double acc = b[static_cast<std::size_t>(o)];
          for (int c = 0; c < 3; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = y * stride - pad + ky, ix = x * stride - pad + kx;
                if (iy < 0 || ix < 0 || iy >= 9 || ix >= 8) continue;
                acc += in.at(n, c, iy, ix) * w.at(o, c, ky, kx);
              }
          CHECK(out.at(n, o, y, x) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv shape mismatch names both shapes") {
  const Tensor<double> in(Shape{1, 2, 5, 5});
  const Tensor<double> w(Shape{1, 3, 3, 3});
  const std::vector<double> b{0.0};
  try {
    conv2d_forward<double>(in, w, b, 1, 0);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(in.shape().str()) != std::string::npos);
    CHECK(msg.find(w.shape().str()) != std::string::npos);
  }
}

TEST_CASE("batchnorm train mode normalizes each channel") {
  auto in = random_tensor(Shape{3, 4, 6, 5}, 4);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = in[i] * 3.0 + 2.0;
  BatchNormParams<double> p(4);
  BatchNormCache<double> cache;
  batchnorm_forward<double>(in, p, Mode::train, &cache);
  const Shape s = in.shape();
  for (int c = 0; c < s.c; ++c) {
    double m = 0.0, v = 0.0;
    const double count = static_cast<double>(s.n) * s.h * s.w;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) m += cache.normalized.plane(n, c)[i];
    m /= count;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) v += std::pow(cache.normalized.plane(n, c)[i] - m, 2);
    v /= count;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-4);
  }
  CHECK(p.stats_initialized);
}

TEST_CASE("batchnorm of standardized input with gamma 1, beta 0") {
  auto in = random_tensor(Shape{2, 2, 8, 8}, 5);
  const Shape s = in.shape();
  const double count = static_cast<double>(s.n) * s.h * s.w;
  for (int c = 0; c < s.c; ++c) {
    double m = 0.0, v = 0.0;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) m += in.plane(n, c)[i];
    m /= count;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) v += std::pow(in.plane(n, c)[i] - m, 2);
    v /= count;
    // Variance 1 - eps puts exactly 1 under the square root.
    const double scale = std::sqrt((1.0 - kBatchNormEps) / v);
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.plane(); ++i) in.plane(n, c)[i] = (in.plane(n, c)[i] - m) * scale;
  }
  BatchNormParams<double> p(2);
  const auto out = batchnorm_forward<double>(in, p, Mode::train);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(std::abs(out[i] - in[i]) < 1e-6);
}

TEST_CASE("batchnorm running statistics and infer mode") {
  BatchNormParams<double> p(1);
  const auto in = random_tensor(Shape{2, 1, 4, 4}, 6);
  CHECK_THROWS_AS(batchnorm_forward<double>(in, p, Mode::infer), NumericalError);
  batchnorm_forward<double>(in, p, Mode::train);
  double m = sum(in) / 32.0, v = 0.0;
  for (double x : in.values()) v += (x - m) * (x - m);
  v /= 31.0;
  CHECK(p.running_mean[0] == doctest::Approx(m));
  CHECK(p.running_var[0] == doctest::Approx(v));
  Tensor<double> shifted = in;
  for (auto& x : shifted.values()) x += 1.0;
  batchnorm_forward<double>(shifted, p, Mode::train);
  CHECK(p.running_mean[0] == doctest::Approx(m + kBatchNormMomentum));
  const auto out = batchnorm_forward<double>(in, p, Mode::infer);
  CHECK(out[0] == doctest::Approx((in[0] - p.running_mean[0]) / std::sqrt(p.running_var[0] + kBatchNormEps)));
}

TEST_CASE("relu") {
  Tensor<double> in(Shape{1, 1, 1, 3});
  in[0] = -1.0;
  in[1] = 0.0;
  in[2] = 2.0;
  const auto out = relu_forward(in);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 2.0);
  const Tensor<double> d(Shape{1, 1, 1, 3}, 1.0);
  const auto back = relu_backward(in, d);
  CHECK(back[0] == 0.0);
  CHECK(back[2] == 1.0);
  in[0] = std::nan("");
  CHECK(std::isnan(relu_forward(in)[0]));
}

TEST_CASE("maxpool routes the whole gradient to the argmax positions") {
  const auto in = random_tensor(Shape{2, 3, 9, 7}, 7);
  const auto pool = maxpool2_forward(in);
  CHECK(pool.output.shape() == Shape{2, 3, 4, 3});
  const auto d_out = random_tensor(pool.output.shape(), 8);
  const auto d_in = maxpool2_backward(in.shape(), pool.argmax, d_out);
  CHECK(sum(d_in) == doctest::Approx(sum(d_out)).epsilon(1e-12));
  std::size_t nonzero = 0;
  for (double v : d_in.values()) nonzero += v != 0.0;
  CHECK(nonzero == d_out.size());
  for (std::size_t i = 0; i < pool.argmax.size(); ++i) CHECK(in[pool.argmax[i]] == pool.output[i]);
  // Odd trailing row/column never receives gradient.
  for (int c = 0; c < 3; ++c) CHECK(d_in.at(0, c, 8, 0) == 0.0);
}

TEST_CASE("upsample after maxpool is the identity on a constant image") {
  for (int size : {8, 9}) {
    const Tensor<double> in(Shape{1, 2, size, size}, 0.375);
    const auto out = upsample2_forward(maxpool2_forward(in).output);
    CHECK(out.shape() == Shape{1, 2, 8, 8});
    CHECK(out == center_crop(in, 8, 8));
  }
}

TEST_CASE("upsample backward sums each 2x2 block") {
  const auto d_out = random_tensor(Shape{1, 1, 4, 6}, 9);
  const auto d_in = upsample2_backward(d_out);
  CHECK(d_in.shape() == Shape{1, 1, 2, 3});
  CHECK(d_in.at(0, 0, 1, 2) ==
        doctest::Approx(d_out.at(0, 0, 2, 4) + d_out.at(0, 0, 2, 5) + d_out.at(0, 0, 3, 4) + d_out.at(0, 0, 3, 5)));
}

TEST_CASE("crop_concat of equal sizes is plain concatenation") {
  const auto deep = random_tensor(Shape{2, 2, 5, 5}, 10);
  const auto skip = random_tensor(Shape{2, 3, 5, 5}, 11);
  const auto out = crop_concat_forward(deep, skip);
  CHECK(out.shape() == Shape{2, 5, 5, 5});
  CHECK(out.at(1, 1, 4, 4) == deep.at(1, 1, 4, 4));
  CHECK(out.at(1, 4, 0, 3) == skip.at(1, 2, 0, 3));
}

TEST_CASE("crop_concat centers the skip crop") {
  Tensor<double> skip(Shape{1, 1, 10, 10});
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) skip.at(0, 0, y, x) = 100 * y + x;
  const Tensor<double> deep(Shape{1, 1, 6, 6}, -1.0);
  const auto out = crop_concat_forward(deep, skip);
  CHECK(out.shape() == Shape{1, 2, 6, 6});
  CHECK(out.at(0, 1, 0, 0) == 202.0);
  CHECK(out.at(0, 1, 5, 5) == 707.0);

  const Tensor<double> d_out(out.shape(), 1.0);
  const auto [d_deep, d_skip] = crop_concat_backward(d_out, 1, skip.shape());
  CHECK(d_deep.shape() == deep.shape());
  CHECK(d_skip.shape() == skip.shape());
  CHECK(sum(d_skip) == 36.0);
  CHECK(d_skip.at(0, 0, 1, 1) == 0.0);
  CHECK(d_skip.at(0, 0, 2, 2) == 1.0);
  CHECK(d_skip.at(0, 0, 7, 7) == 1.0);
  CHECK(d_skip.at(0, 0, 8, 8) == 0.0);
}

TEST_CASE("crop_concat rejects a smaller skip") {
  const Tensor<double> deep(Shape{1, 1, 6, 6});
  const Tensor<double> skip(Shape{1, 1, 5, 8});
  CHECK_THROWS_AS(crop_concat_forward(deep, skip), ShapeError);
}

TEST_CASE("softmax-CE of equal logits is ln 2") {
  const Tensor<double> logits(Shape{2, 2, 3, 4}, 0.7);
  Rng rng(1);
  Tensor<double> labels(Shape{2, 1, 3, 4});
  for (auto& v : labels.values()) v = uniform_int(rng, 0, 1);
  CHECK(pixelwise_softmax_ce(logits, labels).loss == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("softmax-CE goes to zero with a growing margin") {
  Tensor<double> labels(Shape{1, 1, 2, 2}, 1.0);
  labels[0] = 0.0;
  double previous = 1.0;
  for (double margin : {1.0, 5.0, 20.0, 50.0}) {
    Tensor<double> logits(Shape{1, 2, 2, 2});
    for (int i = 0; i < 4; ++i) {
      const bool vessel = labels[static_cast<std::size_t>(i)] == 1.0;
      logits.at(0, vessel ? 1 : 0, i / 2, i % 2) = margin;
    }
    const double loss = pixelwise_softmax_ce(logits, labels).loss;
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-20);
}

TEST_CASE("softmax channels sum to one") {
  auto logits = random_tensor(Shape{2, 2, 5, 5}, 12);
  for (auto& v : logits.values()) v *= 10.0;
  const auto sm = softmax2(logits);
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) CHECK(std::abs(sm.at(n, 0, y, x) + sm.at(n, 1, y, x) - 1.0) < 1e-6);
  const auto p = vessel_probability(logits);
  CHECK(p.shape() == Shape{2, 1, 5, 5});
  CHECK(p.at(1, 0, 3, 3) == sm.at(1, 1, 3, 3));
}

TEST_CASE("softmax-CE crops larger labels and rejects non-binary ones") {
  const Tensor<double> logits(Shape{1, 2, 2, 2}, 0.0);
  Tensor<double> labels(Shape{1, 1, 4, 4}, 0.0);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) labels.at(0, 0, y, x) = 1.0;
  auto r = pixelwise_softmax_ce(logits, labels);
  // Cropped labels are all 1: d_logits channel 1 is (0.5 - 1) / 4.
  CHECK(r.d_logits.at(0, 1, 0, 0) == doctest::Approx(-0.125));
  labels.at(0, 0, 1, 1) = 0.5;
  CHECK_THROWS_AS(pixelwise_softmax_ce(logits, labels), DataError);
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(1e-9, 0.0, 1e-3) == doctest::Approx(1e-6));
}

TEST_CASE("per-layer gradient checks across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<GradCheckResult> results{
        check_conv2d(seed, 1, 0), check_conv2d(seed, 2, 1), check_batchnorm(seed), check_relu(seed),
        check_maxpool(seed),      check_upsample(seed),     check_crop_concat(seed), check_softmax_ce(seed)};
    for (const auto& r : results) {
      INFO(r.name << " seed " << seed << " err " << r.max_relative_error);
      CHECK(r.checked > 0);
      CHECK(r.passed());
      CHECK(r.tolerance <= (r.name.find("softmax") != std::string::npos ? 1e-6 : 1e-5));
    }
  }
}

TEST_CASE("gradient check catches a wrong gradient") {
  std::vector<double> x{0.3, -1.2, 2.0};
  const std::vector<double> wrong{2 * 0.3, 2 * -1.2, 2 * 2.0 * 1.001};
  GradCheckResult r;
  r.tolerance = kLayerTolerance;
  compare_with_finite_differences(
      x, wrong, [&] { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }, r);
  CHECK(r.checked == 3);
  CHECK_FALSE(r.passed());
}

}
