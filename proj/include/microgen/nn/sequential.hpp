#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/nn/activations.hpp"
#include "microgen/nn/batchnorm.hpp"
#include "microgen/nn/conv.hpp"
#include "microgen/nn/tensor.hpp"

namespace microgen::nn {

/// One convolution, an optional batch norm, and an activation.
template <typename T>
struct Stage {
  ConvLayer<T> conv;
  std::optional<BatchNorm<T>> bn;
  Activation activation = Activation::none;
  T slope = T(kDefaultLeakySlope);

  // Train-mode caches, one entry per batch sample.
  Batch<T> cache_in;
  Batch<T> cache_pre;
  Batch<T> cache_out;
};

template <typename T>
struct ParamRef {
  std::span<T> value;
  std::span<T> grad;
};

/// A feed-forward chain of stages with batched train-mode forward/backward.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Stage<T>> stages) : stages_(std::move(stages)) {}

  std::vector<Stage<T>>& stages() noexcept { return stages_; }
  const std::vector<Stage<T>>& stages() const noexcept { return stages_; }
  std::size_t size() const noexcept { return stages_.size(); }
  bool empty() const noexcept { return stages_.empty(); }

  std::size_t input_channels() const { return stages_.front().conv.spec().in_channels; }
  std::size_t output_channels() const { return stages_.back().conv.spec().out_channels; }

  Shape4 output_shape(Shape4 in) const {
    for (const auto& s : stages_) in = s.conv.output_shape(in);
    return in;
  }

  /// Inference: batch norm uses running statistics; nothing is cached.
  Tensor4<T> forward_eval(const Tensor4<T>& x) const {
    Tensor4<T> h = x;
    for (const auto& s : stages_) {
      h = s.conv.forward(h);
      if (s.bn) h = s.bn->forward_eval(h);
      h = activate(h, s.activation, s.slope);
    }
    return h;
  }

  /// Training forward: batch-statistics normalization, caches every stage.
  Batch<T> forward_train(const Batch<T>& xs, bool update_running = true) {
    if (xs.empty()) throw InvalidArgument("forward_train on an empty batch");
    Batch<T> h = xs;
    for (auto& s : stages_) {
      s.cache_in = h;
      Batch<T> z;
      z.reserve(h.size());
      for (const auto& x : h) z.push_back(s.conv.forward(x));
      if (s.bn) z = s.bn->forward_train(z, update_running);
      s.cache_pre = z;
      for (auto& v : z) v = activate(v, s.activation, s.slope);
      s.cache_out = z;
      h = std::move(z);
    }
    return h;
  }

  /// Back-propagates d(loss)/d(output) through the cached forward pass.
  /// Parameter gradients accumulate; returns d(loss)/d(input).
  Batch<T> backward(const Batch<T>& grads) {
    Batch<T> g = grads;
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
      auto& s = *it;
      if (s.cache_out.size() != g.size()) {
        throw InvalidArgument("backward without a matching cached forward pass");
      }
      for (std::size_t b = 0; b < g.size(); ++b) {
        g[b] = activation_backward(s.cache_pre[b], s.cache_out[b], g[b], s.activation, s.slope);
      }
      if (s.bn) g = s.bn->backward(g);
      for (std::size_t b = 0; b < g.size(); ++b) g[b] = s.conv.backward(s.cache_in[b], g[b]);
    }
    return g;
  }

  void clear_cache() {
    for (auto& s : stages_) {
      s.cache_in.clear();
      s.cache_pre.clear();
      s.cache_out.clear();
      if (s.bn) s.bn->clear_cache();
    }
  }

  void zero_grad() {
    for (auto& s : stages_) {
      s.conv.zero_grad();
      if (s.bn) s.bn->zero_grad();
    }
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    for (auto& s : stages_) {
      out.push_back({s.conv.weights(), s.conv.grad_weights()});
      if (s.conv.has_bias()) out.push_back({s.conv.bias(), s.conv.grad_bias()});
      if (s.bn) {
        out.push_back({s.bn->gamma(), s.bn->grad_gamma()});
        out.push_back({s.bn->beta(), s.bn->grad_beta()});
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : stages_) {
      n += s.conv.weights().size() + s.conv.bias().size();
      if (s.bn) n += 2 * s.bn->channels();
    }
    return n;
  }

  void set_pad_mode(PadMode mode) {
    for (auto& s : stages_) s.conv.spec().pad_mode = mode;
  }

  template <typename U>
  Sequential<U> cast() const {
    std::vector<Stage<U>> out;
    for (const auto& s : stages_) {
      Stage<U> t;
      t.conv = s.conv.template cast<U>();
      if (s.bn) t.bn = s.bn->template cast<U>();
      t.activation = s.activation;
      t.slope = static_cast<U>(s.slope);
      out.push_back(std::move(t));
    }
    return Sequential<U>(std::move(out));
  }

 private:
  std::vector<Stage<T>> stages_;
};

}  // namespace microgen::nn
