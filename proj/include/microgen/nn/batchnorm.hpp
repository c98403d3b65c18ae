#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/nn/tensor.hpp"

namespace microgen::nn {

enum class BnMode : std::uint8_t { train, eval };

/// Per-channel batch normalization over (batch, depth, height, width).
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into the running estimates with momentum m (the running
/// variance uses the unbiased estimate). Eval mode uses the running values.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels, T eps = T(1e-5), T momentum = T(0.1))
      : gamma_(channels, T(1)),
        beta_(channels, T(0)),
        running_mean_(channels, T(0)),
        running_var_(channels, T(1)),
        grad_gamma_(channels, T(0)),
        grad_beta_(channels, T(0)),
        eps_(eps),
        momentum_(momentum) {
    if (!(eps > T(0))) throw InvalidArgument("batch-norm epsilon must be > 0");
  }

  std::size_t channels() const noexcept { return gamma_.size(); }
  std::vector<T>& gamma() noexcept { return gamma_; }
  std::vector<T>& beta() noexcept { return beta_; }
  std::vector<T>& running_mean() noexcept { return running_mean_; }
  std::vector<T>& running_var() noexcept { return running_var_; }
  const std::vector<T>& gamma() const noexcept { return gamma_; }
  const std::vector<T>& beta() const noexcept { return beta_; }
  const std::vector<T>& running_mean() const noexcept { return running_mean_; }
  const std::vector<T>& running_var() const noexcept { return running_var_; }
  std::vector<T>& grad_gamma() noexcept { return grad_gamma_; }
  std::vector<T>& grad_beta() noexcept { return grad_beta_; }
  T eps() const noexcept { return eps_; }
  T momentum() const noexcept { return momentum_; }
  void set_eps(T e) { eps_ = e; }

  void zero_grad() {
    std::fill(grad_gamma_.begin(), grad_gamma_.end(), T(0));
    std::fill(grad_beta_.begin(), grad_beta_.end(), T(0));
  }

  Tensor4<T> forward_eval(const Tensor4<T>& x) const {
    check(x.shape());
    Tensor4<T> y(x.shape());
    for (std::size_t c = 0; c < channels(); ++c) {
      const T scale = gamma_[c] / std::sqrt(running_var_[c] + eps_);
      const T shift = beta_[c] - scale * running_mean_[c];
      auto in = x.channel(c);
      auto out = y.channel(c);
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale * in[i] + shift;
    }
    return y;
  }

  /// Normalizes with batch statistics, caches for backward and updates the
  /// running estimates when update_running is set.
  Batch<T> forward_train(const Batch<T>& xs, bool update_running = true) {
    if (xs.empty()) throw InvalidArgument("batch-norm forward on an empty batch");
    for (const auto& x : xs) {
      check(x.shape());
      if (x.shape() != xs.front().shape()) throw InvalidArgument("batch-norm batch has mixed shapes");
    }
    const std::size_t per = xs.front().spatial_size();
    const std::size_t count = per * xs.size();
    cache_x_hat_.assign(xs.size(), Tensor4<T>(xs.front().shape()));
    cache_inv_std_.assign(channels(), T(0));
    Batch<T> ys(xs.size(), Tensor4<T>(xs.front().shape()));
    for (std::size_t c = 0; c < channels(); ++c) {
      T mean = 0;
      for (const auto& x : xs)
        for (T v : x.channel(c)) mean += v;
      mean /= static_cast<T>(count);
      T var = 0;
      for (const auto& x : xs)
        for (T v : x.channel(c)) var += (v - mean) * (v - mean);
      var /= static_cast<T>(count);
      const T inv_std = T(1) / std::sqrt(var + eps_);
      cache_inv_std_[c] = inv_std;
      for (std::size_t b = 0; b < xs.size(); ++b) {
        auto in = xs[b].channel(c);
        auto xh = cache_x_hat_[b].channel(c);
        auto out = ys[b].channel(c);
        for (std::size_t i = 0; i < per; ++i) {
          xh[i] = (in[i] - mean) * inv_std;
          out[i] = gamma_[c] * xh[i] + beta_[c];
        }
      }
      if (update_running) {
        const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
        running_mean_[c] = (T(1) - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * unbiased;
      }
    }
    return ys;
  }

  /// Gradient w.r.t. the train-mode input; accumulates gamma/beta gradients.
  Batch<T> backward(const Batch<T>& grads) {
    if (cache_x_hat_.empty()) throw InvalidArgument("batch-norm backward without a cached train-mode forward");
    if (grads.size() != cache_x_hat_.size()) throw InvalidArgument("batch-norm backward: batch size mismatch");
    const std::size_t per = cache_x_hat_.front().spatial_size();
    const T count = static_cast<T>(per * grads.size());
    Batch<T> dx(grads.size(), Tensor4<T>(cache_x_hat_.front().shape()));
    for (std::size_t c = 0; c < channels(); ++c) {
      T sum_g = 0, sum_gx = 0;
      for (std::size_t b = 0; b < grads.size(); ++b) {
        auto g = grads[b].channel(c);
        auto xh = cache_x_hat_[b].channel(c);
        for (std::size_t i = 0; i < per; ++i) {
          sum_g += g[i];
          sum_gx += g[i] * xh[i];
        }
      }
      grad_beta_[c] += sum_g;
      grad_gamma_[c] += sum_gx;
      const T k = gamma_[c] * cache_inv_std_[c] / count;
      for (std::size_t b = 0; b < grads.size(); ++b) {
        auto g = grads[b].channel(c);
        auto xh = cache_x_hat_[b].channel(c);
        auto out = dx[b].channel(c);
        for (std::size_t i = 0; i < per; ++i) out[i] = k * (count * g[i] - sum_g - xh[i] * sum_gx);
      }
    }
    return dx;
  }

  void clear_cache() {
    cache_x_hat_.clear();
    cache_inv_std_.clear();
  }

  template <typename U>
  BatchNorm<U> cast() const {
    BatchNorm<U> out(channels(), static_cast<U>(eps_), static_cast<U>(momentum_));
    for (std::size_t c = 0; c < channels(); ++c) {
      out.gamma()[c] = static_cast<U>(gamma_[c]);
      out.beta()[c] = static_cast<U>(beta_[c]);
      out.running_mean()[c] = static_cast<U>(running_mean_[c]);
      out.running_var()[c] = static_cast<U>(running_var_[c]);
    }
    return out;
  }

 private:
  void check(const Shape4& s) const {
    if (s.channels != channels()) {
      throw InvalidArgument("batch-norm has " + std::to_string(channels()) + " channels, input is " + s.str());
    }
  }

  std::vector<T> gamma_, beta_, running_mean_, running_var_;
  std::vector<T> grad_gamma_, grad_beta_;
  T eps_ = T(1e-5);
  T momentum_ = T(0.1);
  Batch<T> cache_x_hat_;
  std::vector<T> cache_inv_std_;
};

}  // namespace microgen::nn
