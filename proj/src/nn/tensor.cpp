#include "vesselsynth/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace vesselsynth::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1)
    throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
  data_.assign(shape.count(), fill);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
double Tensor<T>::squared_norm() const {
  double s = 0.0;
  for (T v : data_) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

void require_same_shape(const Shape& a, const Shape& b, const char* where) {
  if (!(a == b)) throw ShapeError(std::string(where) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace vesselsynth::nn
