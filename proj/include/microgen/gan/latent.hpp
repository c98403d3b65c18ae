#pragma once

#include <cstdint>
#include <random>

#include "microgen/error.hpp"
#include "microgen/nn/tensor.hpp"

namespace microgen::gan {

/// Generator input: latent_channels x (depth, height, width) of i.i.d. N(0, 1).
using LatentField = nn::Tensor4<float>;

inline constexpr std::size_t kLatentChannels = 100;

/// Reproducible latent field; the spatial extent may be non-cubic so tiled
/// latents can be drawn directly.
inline LatentField sample_latent(std::uint64_t seed, std::size_t depth, std::size_t height, std::size_t width,
                                 std::size_t channels = kLatentChannels) {
  if (depth == 0 || height == 0 || width == 0 || channels == 0) {
    throw InvalidArgument("latent extent and channel count must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentField z(channels, depth, height, width);
  for (auto& v : z.data()) v = static_cast<float>(normal(rng));
  return z;
}

inline LatentField sample_latent(std::uint64_t seed, std::size_t alpha, std::size_t channels = kLatentChannels) {
  if (alpha == 0) throw InvalidArgument("latent size factor alpha must be >= 1");
  return sample_latent(seed, alpha, alpha, alpha, channels);
}

/// beta * z_start + (1 - beta) * z_end.
inline LatentField interpolate_latent(const LatentField& z_start, const LatentField& z_end, double beta) {
  if (z_start.shape() != z_end.shape()) throw InvalidArgument("interpolate_latent: shape mismatch");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("interpolation weight must lie in [0, 1]");
  LatentField out(z_start.shape());
  const auto b = static_cast<float>(beta);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = b * z_start[i] + (1.0f - b) * z_end[i];
  return out;
}

}  // namespace microgen::gan
