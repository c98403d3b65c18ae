#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/nn/tensor.hpp"
#include "microgen/parallel.hpp"

namespace microgen::nn {

enum class PadMode : std::uint8_t { zero = 0, circular = 1 };
enum class ConvKind : std::uint8_t { conv = 0, transposed = 1 };

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::array<std::size_t, 3> kernel{4, 4, 4};  // (kd, kh, kw)
  std::size_t stride = 1;
  std::size_t padding = 0;
  PadMode pad_mode = PadMode::zero;

  std::size_t kernel_volume() const noexcept { return kernel[0] * kernel[1] * kernel[2]; }

  void validate() const {
    if (in_channels == 0 || out_channels == 0) throw InvalidArgument("conv channels must be >= 1");
    if (kernel[0] == 0 || kernel[1] == 0 || kernel[2] == 0) throw InvalidArgument("conv kernel dims must be >= 1");
    if (stride == 0) throw InvalidArgument("conv stride must be >= 1");
  }
};

/// Output extent of a strided cross-correlation along one axis.
/// Zero padding: floor((n + 2p - k) / s) + 1. Circular: n / s, n divisible by s.
inline std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t s, std::size_t p, PadMode mode) {
  if (mode == PadMode::circular) {
    if (n == 0 || n % s != 0) {
      throw InvalidArgument("circular conv needs extent " + std::to_string(n) + " divisible by stride " +
                            std::to_string(s));
    }
    return n / s;
  }
  if (n + 2 * p < k) {
    throw InvalidArgument("conv input extent " + std::to_string(n) + " + 2*" + std::to_string(p) +
                          " padding is smaller than kernel " + std::to_string(k));
  }
  return (n + 2 * p - k) / s + 1;
}

/// Output extent of the transposed (adjoint) convolution.
/// Zero padding: (n - 1) s - 2p + k. Circular: n s.
inline std::size_t transposed_output_extent(std::size_t n, std::size_t k, std::size_t s, std::size_t p,
                                            PadMode mode) {
  if (n == 0) throw InvalidArgument("transposed conv input extent must be >= 1");
  if (mode == PadMode::circular) return n * s;
  if ((n - 1) * s + k <= 2 * p) throw InvalidArgument("transposed conv padding consumes the whole output");
  return (n - 1) * s + k - 2 * p;
}

namespace detail {

// A run of consecutive small-side positions [small_begin, small_end) whose
// big-side partners are big_begin + stride * (o - small_begin).
struct TapSegment {
  std::size_t small_begin;
  std::size_t small_end;
  std::size_t big_begin;
};

// For every kernel tap, the pairing o -> o*s + tap - p between the small
// (strided) side and the big side of one axis, split into wrap-free runs.
inline std::vector<std::vector<TapSegment>> axis_taps(std::size_t n_small, std::size_t n_big, std::size_t k,
                                                      std::size_t s, std::size_t p, PadMode mode) {
  std::vector<std::vector<TapSegment>> taps(k);
  const auto nb = static_cast<std::ptrdiff_t>(n_big);
  for (std::size_t t = 0; t < k; ++t) {
    auto& segs = taps[t];
    std::ptrdiff_t prev = -2;
    for (std::size_t o = 0; o < n_small; ++o) {
      std::ptrdiff_t b = static_cast<std::ptrdiff_t>(o * s + t) - static_cast<std::ptrdiff_t>(p);
      if (mode == PadMode::circular) {
        b %= nb;
        if (b < 0) b += nb;
      } else if (b < 0 || b >= nb) {
        prev = -2;
        continue;
      }
      if (!segs.empty() && prev >= 0 && b == prev + static_cast<std::ptrdiff_t>(s) && segs.back().small_end == o) {
        segs.back().small_end = o + 1;
      } else {
        segs.push_back({o, o + 1, static_cast<std::size_t>(b)});
      }
      prev = b;
    }
  }
  return taps;
}

struct TapTables {
  std::vector<std::vector<TapSegment>> z, y, x;
};

inline TapTables make_tables(const Shape4& small, const Shape4& big, const ConvSpec& spec) {
  return {axis_taps(small.depth, big.depth, spec.kernel[0], spec.stride, spec.padding, spec.pad_mode),
          axis_taps(small.height, big.height, spec.kernel[1], spec.stride, spec.padding, spec.pad_mode),
          axis_taps(small.width, big.width, spec.kernel[2], spec.stride, spec.padding, spec.pad_mode)};
}

// Visits every (small offset, big offset, run length) row of one tap.
template <typename F>
inline void for_each_row(const TapTables& tt, std::size_t kz, std::size_t ky, std::size_t kx, const Shape4& small,
                         const Shape4& big, std::size_t s, F&& f) {
  for (const auto& sz : tt.z[kz])
    for (std::size_t oz = sz.small_begin; oz < sz.small_end; ++oz) {
      const std::size_t bz = sz.big_begin + (oz - sz.small_begin) * s;
      for (const auto& sy : tt.y[ky])
        for (std::size_t oy = sy.small_begin; oy < sy.small_end; ++oy) {
          const std::size_t by = sy.big_begin + (oy - sy.small_begin) * s;
          const std::size_t srow = (oz * small.height + oy) * small.width;
          const std::size_t brow = (bz * big.height + by) * big.width;
          for (const auto& sx : tt.x[kx]) {
            f(srow + sx.small_begin, brow + sx.big_begin, sx.small_end - sx.small_begin);
          }
        }
    }
}

// small[sc] (+)= sum_bc sum_tap W[sc][bc][tap] * big[bc][pair(tap)]
template <typename T>
void gather(const Tensor4<T>& big, std::span<const T> w, std::span<const T> bias, Tensor4<T>& small,
            const ConvSpec& spec) {
  const auto tt = make_tables(small.shape(), big.shape(), spec);
  const std::size_t kv = spec.kernel_volume(), nbc = big.channels(), s = spec.stride;
  parallel_for(small.channels(), [&](std::size_t sc) {
    auto out = small.channel(sc);
    std::fill(out.begin(), out.end(), bias.empty() ? T{} : bias[sc]);
    for (std::size_t bc = 0; bc < nbc; ++bc) {
      const auto in = big.channel(bc);
      const T* wk = w.data() + (sc * nbc + bc) * kv;
      for (std::size_t kz = 0; kz < spec.kernel[0]; ++kz)
        for (std::size_t ky = 0; ky < spec.kernel[1]; ++ky)
          for (std::size_t kx = 0; kx < spec.kernel[2]; ++kx) {
            const T wv = *wk++;
            for_each_row(tt, kz, ky, kx, small.shape(), big.shape(), s,
                         [&](std::size_t so, std::size_t bo, std::size_t len) {
                           T* o = out.data() + so;
                           const T* b = in.data() + bo;
                           for (std::size_t i = 0; i < len; ++i) o[i] += wv * b[i * s];
                         });
          }
    }
  });
}

// big[bc] (+)= sum_sc sum_tap W[sc][bc][tap] * small[sc] scattered to pair(tap)
template <typename T>
void scatter(const Tensor4<T>& small, std::span<const T> w, std::span<const T> bias, Tensor4<T>& big,
             const ConvSpec& spec) {
  const auto tt = make_tables(small.shape(), big.shape(), spec);
  const std::size_t kv = spec.kernel_volume(), nbc = big.channels(), s = spec.stride;
  parallel_for(nbc, [&](std::size_t bc) {
    auto out = big.channel(bc);
    std::fill(out.begin(), out.end(), bias.empty() ? T{} : bias[bc]);
    for (std::size_t sc = 0; sc < small.channels(); ++sc) {
      const auto in = small.channel(sc);
      const T* wk = w.data() + (sc * nbc + bc) * kv;
      for (std::size_t kz = 0; kz < spec.kernel[0]; ++kz)
        for (std::size_t ky = 0; ky < spec.kernel[1]; ++ky)
          for (std::size_t kx = 0; kx < spec.kernel[2]; ++kx) {
            const T wv = *wk++;
            for_each_row(tt, kz, ky, kx, small.shape(), big.shape(), s,
                         [&](std::size_t so, std::size_t bo, std::size_t len) {
                           const T* a = in.data() + so;
                           T* o = out.data() + bo;
                           for (std::size_t i = 0; i < len; ++i) o[i * s] += wv * a[i];
                         });
          }
    }
  });
}

// dW[sc][bc][tap] += sum over pairs small[sc] * big[bc]
template <typename T>
void weight_grad(const Tensor4<T>& small, const Tensor4<T>& big, std::span<T> dw, const ConvSpec& spec) {
  const auto tt = make_tables(small.shape(), big.shape(), spec);
  const std::size_t kv = spec.kernel_volume(), nbc = big.channels(), s = spec.stride;
  parallel_for(small.channels(), [&](std::size_t sc) {
    const auto a = small.channel(sc);
    for (std::size_t bc = 0; bc < nbc; ++bc) {
      const auto b = big.channel(bc);
      T* wk = dw.data() + (sc * nbc + bc) * kv;
      for (std::size_t kz = 0; kz < spec.kernel[0]; ++kz)
        for (std::size_t ky = 0; ky < spec.kernel[1]; ++ky)
          for (std::size_t kx = 0; kx < spec.kernel[2]; ++kx) {
            T acc{};
            for_each_row(tt, kz, ky, kx, small.shape(), big.shape(), s,
                         [&](std::size_t so, std::size_t bo, std::size_t len) {
                           const T* pa = a.data() + so;
                           const T* pb = b.data() + bo;
                           for (std::size_t i = 0; i < len; ++i) acc += pa[i] * pb[i * s];
                         });
            *wk++ += acc;
          }
    }
  });
}

}  // namespace detail

/// 3D convolution or transposed convolution with optional bias.
///
/// Kernel layout is [small][big][kd][kh][kw] where "small" is the strided
/// side: conv kernels are [out][in][...], transposed kernels [in][out][...].
/// Circular transposed convolution is the exact adjoint of circular
/// convolution with the same spec.
template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(ConvKind kind, ConvSpec spec, bool has_bias)
      : kind_(kind),
        spec_(spec),
        weights_(spec.in_channels * spec.out_channels * spec.kernel_volume(), T{}),
        bias_(has_bias ? spec.out_channels : 0, T{}),
        grad_weights_(weights_.size(), T{}),
        grad_bias_(bias_.size(), T{}) {
    spec_.validate();
  }

  ConvKind kind() const noexcept { return kind_; }
  const ConvSpec& spec() const noexcept { return spec_; }
  ConvSpec& spec() noexcept { return spec_; }
  bool has_bias() const noexcept { return !bias_.empty(); }

  std::vector<T>& weights() noexcept { return weights_; }
  const std::vector<T>& weights() const noexcept { return weights_; }
  std::vector<T>& bias() noexcept { return bias_; }
  const std::vector<T>& bias() const noexcept { return bias_; }
  std::vector<T>& grad_weights() noexcept { return grad_weights_; }
  std::vector<T>& grad_bias() noexcept { return grad_bias_; }

  void zero_grad() {
    std::fill(grad_weights_.begin(), grad_weights_.end(), T{});
    std::fill(grad_bias_.begin(), grad_bias_.end(), T{});
  }

  Shape4 output_shape(const Shape4& in) const {
    if (in.channels != spec_.in_channels) {
      throw InvalidArgument("conv expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                            in.str());
    }
    const auto& k = spec_.kernel;
    const auto s = spec_.stride, p = spec_.padding;
    const auto m = spec_.pad_mode;
    if (kind_ == ConvKind::conv) {
      return {spec_.out_channels, conv_output_extent(in.depth, k[0], s, p, m),
              conv_output_extent(in.height, k[1], s, p, m), conv_output_extent(in.width, k[2], s, p, m)};
    }
    return {spec_.out_channels, transposed_output_extent(in.depth, k[0], s, p, m),
            transposed_output_extent(in.height, k[1], s, p, m), transposed_output_extent(in.width, k[2], s, p, m)};
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    Tensor4<T> out(output_shape(x.shape()));
    if (kind_ == ConvKind::conv) {
      detail::gather<T>(x, weights_, bias_, out, spec_);
    } else {
      detail::scatter<T>(x, weights_, bias_, out, spec_);
    }
    return out;
  }

  /// Gradient w.r.t. the input; accumulates parameter gradients.
  Tensor4<T> backward(const Tensor4<T>& x, const Tensor4<T>& grad_out) {
    if (grad_out.shape() != output_shape(x.shape())) {
      throw InvalidArgument("conv backward: upstream gradient shape " + grad_out.shape().str() +
                            " does not match forward output");
    }
    Tensor4<T> grad_in(x.shape());
    const std::span<const T> no_bias;
    if (kind_ == ConvKind::conv) {
      detail::scatter<T>(grad_out, weights_, no_bias, grad_in, spec_);
      detail::weight_grad<T>(grad_out, x, grad_weights_, spec_);
    } else {
      detail::gather<T>(grad_out, weights_, no_bias, grad_in, spec_);
      detail::weight_grad<T>(x, grad_out, grad_weights_, spec_);
    }
    if (has_bias()) {
      for (std::size_t c = 0; c < spec_.out_channels; ++c) {
        T acc{};
        for (T g : grad_out.channel(c)) acc += g;
        grad_bias_[c] += acc;
      }
    }
    return grad_in;
  }

  template <typename U>
  ConvLayer<U> cast() const {
    ConvLayer<U> out(kind_, spec_, has_bias());
    std::transform(weights_.begin(), weights_.end(), out.weights().begin(), [](T v) { return static_cast<U>(v); });
    std::transform(bias_.begin(), bias_.end(), out.bias().begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

 private:
  ConvKind kind_ = ConvKind::conv;
  ConvSpec spec_{};
  std::vector<T> weights_;
  std::vector<T> bias_;
  std::vector<T> grad_weights_;
  std::vector<T> grad_bias_;
};

}  // namespace microgen::nn
