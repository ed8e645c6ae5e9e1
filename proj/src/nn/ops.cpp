#include "vesselsynth/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace vesselsynth::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

struct ConvGeometry {
  int channels, height, width, kernel, stride, pad, out_h, out_w;
  int rows() const { return channels * kernel * kernel; }
};

// Upper bound on im2col buffer entries; output rows are processed in blocks.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

int rows_per_block(const ConvGeometry& g) {
  const std::size_t per_row = static_cast<std::size_t>(g.rows()) * static_cast<std::size_t>(g.out_w);
  return static_cast<int>(std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_row, 1), 1,
                                                  static_cast<std::size_t>(g.out_h)));
}

// Unfolds output rows [oy0, oy1) of one image (channels x height x width)
// into a (C k k) x ((oy1 - oy0) out_w) matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, int oy0, int oy1, T* col) {
  const std::size_t cols = static_cast<std::size_t>(oy1 - oy0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        T* row = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          T* dst = row + static_cast<std::size_t>(oy - oy0) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.width;
          if (g.stride == 1 && g.pad == 0) {
            std::memcpy(dst, src + kj, sizeof(T) * static_cast<std::size_t>(g.out_w));
            continue;
          }
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates the block's columns back into the image.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, int oy0, int oy1, T* image) {
  const std::size_t cols = static_cast<std::size_t>(oy1 - oy0) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy - oy0) * g.out_w;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weights, int stride, int pad) {
  const Shape& in = input.shape();
  const Shape& ws = weights.shape();
  if (ws.c != in.c || ws.h != ws.w)
    throw ShapeError("conv2d: weights " + ws.str() + " do not match input " + in.str());
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  const ConvGeometry g{in.c, in.h, in.w, ws.h, stride, pad, conv_output_extent(in.h, ws.h, stride, pad),
                       conv_output_extent(in.w, ws.h, stride, pad)};
  if (g.out_h < 1 || g.out_w < 1)
    throw ShapeError("conv2d: input " + in.str() + " too small for kernel " + ws.str());
  return g;
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias, int stride,
                         int pad) {
  const ConvGeometry g = conv_geometry(input, weights, stride, pad);
  const int out_ch = weights.shape().n;
  if (static_cast<int>(bias.size()) != out_ch)
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " != out channels " +
                     std::to_string(out_ch));
  Tensor<T> out(Shape{input.shape().n, out_ch, g.out_h, g.out_w});
  const int block = rows_per_block(g);
  const Eigen::Index plane = static_cast<Eigen::Index>(g.out_h) * g.out_w;
  AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * block * g.out_w);
  ConstMatrixMap<T> w(weights.data(), out_ch, g.rows());
  for (int n = 0; n < input.shape().n; ++n) {
    for (int oy0 = 0; oy0 < g.out_h; oy0 += block) {
      const int oy1 = std::min(g.out_h, oy0 + block);
      const Eigen::Index cols = static_cast<Eigen::Index>(oy1 - oy0) * g.out_w;
      im2col(input.plane(n, 0), g, oy0, oy1, col.data());
      ConstMatrixMap<T> cm(col.data(), g.rows(), cols);
      StridedMap<T> o(out.plane(n, 0) + static_cast<std::size_t>(oy0) * g.out_w, out_ch, cols,
                      Eigen::OuterStride<>(plane));
      o.noalias() = w * cm;
      for (int oc = 0; oc < out_ch; ++oc) o.row(oc).array() += bias[static_cast<std::size_t>(oc)];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, int stride, int pad,
                             const Tensor<T>& d_out) {
  const ConvGeometry g = conv_geometry(input, weights, stride, pad);
  const int out_ch = weights.shape().n;
  require_same_shape(d_out.shape(), Shape{input.shape().n, out_ch, g.out_h, g.out_w}, "conv2d_backward");

  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), std::vector<T>(out_ch, T(0))};
  const int block = rows_per_block(g);
  const Eigen::Index plane = static_cast<Eigen::Index>(g.out_h) * g.out_w;
  AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * block * g.out_w);
  AlignedVector<T> d_col(col.size());
  ConstMatrixMap<T> w(weights.data(), out_ch, g.rows());
  MatrixMap<T> dw(grads.d_weights.data(), out_ch, g.rows());
  for (int n = 0; n < input.shape().n; ++n) {
    for (int oy0 = 0; oy0 < g.out_h; oy0 += block) {
      const int oy1 = std::min(g.out_h, oy0 + block);
      const Eigen::Index cols = static_cast<Eigen::Index>(oy1 - oy0) * g.out_w;
      ConstStridedMap<T> dout(d_out.plane(n, 0) + static_cast<std::size_t>(oy0) * g.out_w, out_ch, cols,
                              Eigen::OuterStride<>(plane));
      MatrixMap<T> cm(col.data(), g.rows(), cols);
      MatrixMap<T> dcm(d_col.data(), g.rows(), cols);
      im2col(input.plane(n, 0), g, oy0, oy1, col.data());
      dw.noalias() += dout * cm.transpose();
      dcm.noalias() = w.transpose() * dout;
      col2im(d_col.data(), g, oy0, oy1, grads.d_input.plane(n, 0));
      for (int oc = 0; oc < out_ch; ++oc) grads.d_bias[static_cast<std::size_t>(oc)] += dout.row(oc).sum();
    }
  }
  return grads;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                            BatchNormCache<T>* cache, bool update_running) {
  const Shape& s = input.shape();
  if (params.channels() != s.c)
    throw ShapeError("batchnorm: " + std::to_string(params.channels()) + " channels of parameters for input " +
                     s.str());
  Tensor<T> out(s);
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);

  if (mode == Mode::infer) {
    if (!params.stats_initialized)
      throw NumericalError("batchnorm: inference requested before any training update of the running statistics");
    for (int c = 0; c < s.c; ++c) {
      const double inv_std = 1.0 / std::sqrt(static_cast<double>(params.running_var[c]) + kBatchNormEps);
      const double scale = params.gamma[c] * inv_std;
      const double shift = params.beta[c] - params.running_mean[c] * scale;
      for (int n = 0; n < s.n; ++n) {
        const T* x = input.plane(n, c);
        T* y = out.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) y[i] = static_cast<T>(x[i] * scale + shift);
      }
    }
    return out;
  }

  if (cache) {
    cache->normalized = Tensor<T>(s);
    cache->inv_std.assign(static_cast<std::size_t>(s.c), T(0));
  }
  for (int c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const T* x = input.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sum += x[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const T* x = input.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = x[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    const double gamma = params.gamma[c];
    const double beta = params.beta[c];
    for (int n = 0; n < s.n; ++n) {
      const T* x = input.plane(n, c);
      T* y = out.plane(n, c);
      T* xh = cache ? cache->normalized.plane(n, c) : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const double norm = (x[i] - mean) * inv_std;
        if (xh) xh[i] = static_cast<T>(norm);
        y[i] = static_cast<T>(gamma * norm + beta);
      }
    }
    if (cache) cache->inv_std[c] = static_cast<T>(inv_std);

    if (update_running) {
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      if (!params.stats_initialized) {
        params.running_mean[c] = static_cast<T>(mean);
        params.running_var[c] = static_cast<T>(unbiased);
      } else {
        params.running_mean[c] =
            static_cast<T>((1.0 - kBatchNormMomentum) * params.running_mean[c] + kBatchNormMomentum * mean);
        params.running_var[c] =
            static_cast<T>((1.0 - kBatchNormMomentum) * params.running_var[c] + kBatchNormMomentum * unbiased);
      }
    }
  }
  if (update_running) params.stats_initialized = true;
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma,
                                     const Tensor<T>& d_out) {
  const Shape& s = d_out.shape();
  require_same_shape(s, cache.normalized.shape(), "batchnorm_backward");
  BatchNormGrads<T> g{Tensor<T>(s), std::vector<T>(s.c, T(0)), std::vector<T>(s.c, T(0))};
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  for (int c = 0; c < s.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const T* dy = d_out.plane(n, c);
      const T* xh = cache.normalized.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    g.d_gamma[c] = static_cast<T>(sum_dy_xhat);
    g.d_beta[c] = static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * cache.inv_std[c] / count;
    for (int n = 0; n < s.n; ++n) {
      const T* dy = d_out.plane(n, c);
      const T* xh = cache.normalized.plane(n, c);
      T* dx = g.d_input.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i)
        dx[i] = static_cast<T>(k * (count * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  // NaN passes through so a corrupted input still surfaces as a non-finite loss.
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] < T(0) ? T(0) : input[i];
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& d_out) {
  require_same_shape(input.shape(), d_out.shape(), "relu_backward");
  Tensor<T> d_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) d_in[i] = input[i] > T(0) ? d_out[i] : T(0);
  return d_in;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& input) {
  const Shape& s = input.shape();
  const int oh = s.h / 2;
  const int ow = s.w / 2;
  if (oh < 1 || ow < 1) throw ShapeError("maxpool2: input " + s.str() + " is smaller than the 2x2 window");
  PoolResult<T> r{Tensor<T>(Shape{s.n, s.c, oh, ow}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* x = input.plane(n, c);
      const std::size_t base = static_cast<std::size_t>(x - input.data());
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo, ++o) {
          std::size_t best = static_cast<std::size_t>(2 * y) * s.w + 2 * xo;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx = static_cast<std::size_t>(2 * y + dy) * s.w + 2 * xo + dx;
              if (x[idx] > x[best]) best = idx;
            }
          r.output[o] = x[best];
          r.argmax[o] = static_cast<std::uint32_t>(base + best);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& d_out) {
  if (argmax.size() != d_out.size()) throw ShapeError("maxpool2_backward: argmax does not match gradient");
  Tensor<T> d_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) d_in[argmax[i]] += d_out[i];
  return d_in;
}

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& input) {
  const Shape& s = input.shape();
  Tensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* x = input.plane(n, c);
      T* y = out.plane(n, c);
      for (int yy = 0; yy < 2 * s.h; ++yy)
        for (int xx = 0; xx < 2 * s.w; ++xx)
          y[static_cast<std::size_t>(yy) * 2 * s.w + xx] = x[static_cast<std::size_t>(yy / 2) * s.w + xx / 2];
    }
  return out;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& d_out) {
  const Shape& s = d_out.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("upsample2_backward: odd gradient shape " + s.str());
  Tensor<T> d_in(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* g = d_out.plane(n, c);
      T* d = d_in.plane(n, c);
      for (int yy = 0; yy < s.h; ++yy)
        for (int xx = 0; xx < s.w; ++xx)
          d[static_cast<std::size_t>(yy / 2) * (s.w / 2) + xx / 2] += g[static_cast<std::size_t>(yy) * s.w + xx];
    }
  return d_in;
}

template <typename T>
Tensor<T> center_crop(const Tensor<T>& input, int h, int w) {
  const Shape& s = input.shape();
  if (h > s.h || w > s.w) throw ShapeError("center_crop: " + s.str() + " is smaller than the target");
  const int oy = (s.h - h) / 2;
  const int ox = (s.w - w) / 2;
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y) {
        const T* src = input.plane(n, c) + static_cast<std::size_t>(y + oy) * s.w + ox;
        std::copy(src, src + w, out.plane(n, c) + static_cast<std::size_t>(y) * w);
      }
  return out;
}

template <typename T>
Tensor<T> crop_concat_forward(const Tensor<T>& deep, const Tensor<T>& skip) {
  const Shape& d = deep.shape();
  const Shape& k = skip.shape();
  if (d.n != k.n || k.h < d.h || k.w < d.w)
    throw ShapeError("crop_concat: skip " + k.str() + " cannot be cropped to deep " + d.str());
  Tensor<T> out(Shape{d.n, d.c + k.c, d.h, d.w});
  const int oy = (k.h - d.h) / 2;
  const int ox = (k.w - d.w) / 2;
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) std::copy(deep.plane(n, c), deep.plane(n, c) + d.plane(), out.plane(n, c));
    for (int c = 0; c < k.c; ++c)
      for (int y = 0; y < d.h; ++y) {
        const T* src = skip.plane(n, c) + static_cast<std::size_t>(y + oy) * k.w + ox;
        std::copy(src, src + d.w, out.plane(n, d.c + c) + static_cast<std::size_t>(y) * d.w);
      }
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> crop_concat_backward(const Tensor<T>& d_out, int deep_channels,
                                                     const Shape& skip_shape) {
  const Shape& s = d_out.shape();
  if (deep_channels < 1 || deep_channels + skip_shape.c != s.c || skip_shape.n != s.n || skip_shape.h < s.h ||
      skip_shape.w < s.w)
    throw ShapeError("crop_concat_backward: gradient " + s.str() + " incompatible with skip " + skip_shape.str());
  Tensor<T> d_deep(Shape{s.n, deep_channels, s.h, s.w});
  Tensor<T> d_skip(skip_shape);
  const int oy = (skip_shape.h - s.h) / 2;
  const int ox = (skip_shape.w - s.w) / 2;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < deep_channels; ++c)
      std::copy(d_out.plane(n, c), d_out.plane(n, c) + s.plane(), d_deep.plane(n, c));
    for (int c = 0; c < skip_shape.c; ++c)
      for (int y = 0; y < s.h; ++y) {
        const T* src = d_out.plane(n, deep_channels + c) + static_cast<std::size_t>(y) * s.w;
        std::copy(src, src + s.w, d_skip.plane(n, c) + static_cast<std::size_t>(y + oy) * skip_shape.w + ox);
      }
  }
  return {std::move(d_deep), std::move(d_skip)};
}

template <typename T>
Tensor<T> softmax2(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  if (s.c != 2) throw ShapeError("softmax2: expected 2 channels, got " + s.str());
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n) {
    const T* l0 = logits.plane(n, 0);
    const T* l1 = logits.plane(n, 1);
    T* p0 = out.plane(n, 0);
    T* p1 = out.plane(n, 1);
    for (std::size_t i = 0; i < s.plane(); ++i) {
      const double m = std::max<double>(l0[i], l1[i]);
      const double e0 = std::exp(l0[i] - m);
      const double e1 = std::exp(l1[i] - m);
      p0[i] = static_cast<T>(e0 / (e0 + e1));
      p1[i] = static_cast<T>(e1 / (e0 + e1));
    }
  }
  return out;
}

template <typename T>
Tensor<T> vessel_probability(const Tensor<T>& logits) {
  const Tensor<T> p = softmax2(logits);
  const Shape& s = logits.shape();
  Tensor<T> out(Shape{s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n) std::copy(p.plane(n, 1), p.plane(n, 1) + s.plane(), out.plane(n, 0));
  return out;
}

template <typename T>
LossResult<T> pixelwise_softmax_ce(const Tensor<T>& logits, const Tensor<T>& labels) {
  const Shape& s = logits.shape();
  if (s.c != 2) throw ShapeError("softmax_ce: logits must have 2 channels, got " + s.str());
  const Shape& ls = labels.shape();
  if (ls.n != s.n || ls.c != 1 || ls.h < s.h || ls.w < s.w)
    throw ShapeError("softmax_ce: labels " + ls.str() + " incompatible with logits " + s.str());
  const Tensor<T> target = (ls.h == s.h && ls.w == s.w) ? labels : center_crop(labels, s.h, s.w);
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] != T(0) && target[i] != T(1)) throw DataError("softmax_ce: labels must be 0 or 1");

  LossResult<T> r{0.0, Tensor<T>(s)};
  const double count = static_cast<double>(s.n) * static_cast<double>(s.plane());
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const T* l0 = logits.plane(n, 0);
    const T* l1 = logits.plane(n, 1);
    const T* y = target.plane(n, 0);
    T* d0 = r.d_logits.plane(n, 0);
    T* d1 = r.d_logits.plane(n, 1);
    for (std::size_t i = 0; i < s.plane(); ++i) {
      const double a = l0[i];
      const double b = l1[i];
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      const bool vessel = y[i] == T(1);
      total += lse - (vessel ? b : a);
      const double p0 = std::exp(a - lse);
      const double p1 = std::exp(b - lse);
      d0[i] = static_cast<T>((p0 - (vessel ? 0.0 : 1.0)) / count);
      d1[i] = static_cast<T>((p1 - (vessel ? 1.0 : 0.0)) / count);
    }
  }
  r.loss = total / count;
  return r;
}

#define VESSELSYNTH_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, int, int);         \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, int, int, const Tensor<T>&);       \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, BatchNormParams<T>&, Mode, BatchNormCache<T>*, bool); \
  template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&, std::span<const T>, const Tensor<T>&); \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                           \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                        \
  template PoolResult<T> maxpool2_forward(const Tensor<T>&);                                                   \
  template Tensor<T> maxpool2_backward(const Shape&, const std::vector<std::uint32_t>&, const Tensor<T>&);     \
  template Tensor<T> upsample2_forward(const Tensor<T>&);                                                      \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                                                     \
  template Tensor<T> center_crop(const Tensor<T>&, int, int);                                                  \
  template Tensor<T> crop_concat_forward(const Tensor<T>&, const Tensor<T>&);                                  \
  template std::pair<Tensor<T>, Tensor<T>> crop_concat_backward(const Tensor<T>&, int, const Shape&);          \
  template Tensor<T> softmax2(const Tensor<T>&);                                                               \
  template Tensor<T> vessel_probability(const Tensor<T>&);                                                     \
  template LossResult<T> pixelwise_softmax_ce(const Tensor<T>&, const Tensor<T>&);

VESSELSYNTH_INSTANTIATE_OPS(float)
VESSELSYNTH_INSTANTIATE_OPS(double)

#undef VESSELSYNTH_INSTANTIATE_OPS

}  // namespace vesselsynth::nn
