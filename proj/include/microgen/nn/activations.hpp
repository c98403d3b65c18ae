#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "microgen/error.hpp"
#include "microgen/nn/tensor.hpp"

namespace microgen::nn {

enum class Activation : std::uint8_t { none, relu, leaky_relu, sigmoid, softmax };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::none: return "None";
    case Activation::relu: return "ReLU";
    case Activation::leaky_relu: return "LeakyReLU";
    case Activation::sigmoid: return "Sigmoid";
    case Activation::softmax: return "Softmax";
  }
  return "?";
}

inline constexpr double kDefaultLeakySlope = 0.2;

template <typename T>
T sigmoid(T v) {
  // Split on sign so exp never overflows.
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
Tensor4<T> relu(Tensor4<T> x) {
  for (auto& v : x.data()) v = v > T(0) ? v : T(0);
  return x;
}

template <typename T>
Tensor4<T> leaky_relu(Tensor4<T> x, T slope = T(kDefaultLeakySlope)) {
  for (auto& v : x.data()) v = v > T(0) ? v : slope * v;
  return x;
}

template <typename T>
Tensor4<T> sigmoid(Tensor4<T> x) {
  for (auto& v : x.data()) v = sigmoid(v);
  return x;
}

/// Softmax across the channel axis at every voxel, max-subtracted.
template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  const std::size_t n = x.spatial_size(), c = x.channels();
  for (std::size_t v = 0; v < n; ++v) {
    T mx = x[v];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, x[k * n + v]);
    T sum = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const T e = std::exp(x[k * n + v] - mx);
      y[k * n + v] = e;
      sum += e;
    }
    for (std::size_t k = 0; k < c; ++k) y[k * n + v] /= sum;
  }
  return y;
}

template <typename T>
Tensor4<T> activate(const Tensor4<T>& x, Activation a, T slope = T(kDefaultLeakySlope)) {
  switch (a) {
    case Activation::none: return x;
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, slope);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::softmax: return softmax_channels(x);
  }
  return x;
}

/// Gradient through an activation given its pre-activation input x and output y.
template <typename T>
Tensor4<T> activation_backward(const Tensor4<T>& x, const Tensor4<T>& y, const Tensor4<T>& g, Activation a,
                               T slope = T(kDefaultLeakySlope)) {
  if (g.shape() != y.shape() || x.shape() != y.shape()) throw InvalidArgument("activation backward: shape mismatch");
  Tensor4<T> dx(g.shape());
  const std::size_t total = g.size();
  switch (a) {
    case Activation::none:
      return g;
    case Activation::relu:
      for (std::size_t i = 0; i < total; ++i) dx[i] = x[i] > T(0) ? g[i] : T(0);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < total; ++i) dx[i] = x[i] > T(0) ? g[i] : slope * g[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < total; ++i) dx[i] = g[i] * y[i] * (T(1) - y[i]);
      break;
    case Activation::softmax: {
      const std::size_t n = g.spatial_size(), c = g.channels();
      for (std::size_t v = 0; v < n; ++v) {
        T dotp = 0;
        for (std::size_t k = 0; k < c; ++k) dotp += g[k * n + v] * y[k * n + v];
        for (std::size_t k = 0; k < c; ++k) dx[k * n + v] = y[k * n + v] * (g[k * n + v] - dotp);
      }
      break;
    }
  }
  return dx;
}

}  // namespace microgen::nn
