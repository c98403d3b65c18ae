#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/nn/sequential.hpp"

namespace microgen::gan {

using nn::Activation;
using nn::ConvKind;
using nn::ConvSpec;
using nn::PadMode;

template <typename T>
using Generator = nn::Sequential<T>;
template <typename T>
using Discriminator = nn::Sequential<T>;

/// Layer widths of the volumetric DC-GAN pair.
///
/// The generator opens with a stride-1, unpadded 4^3 transposed conv from the
/// latent channels, then one stride-2 / pad-1 transposed conv per entry of
/// generator_channels (the last one producing phase_count channels). The
/// discriminator mirrors it with stride-2 / pad-1 convs and a final stride-1,
/// unpadded conv to one channel.
struct ArchitectureConfig {
  std::size_t latent_channels = 100;
  std::size_t phase_count = 3;
  std::vector<std::size_t> generator_channels{512, 256, 128, 64};
  std::vector<std::size_t> discriminator_channels{16, 32, 64, 128};
  std::size_t kernel = 4;
  bool discriminator_first_bn = true;
  double leaky_slope = nn::kDefaultLeakySlope;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  // Full-size networks: 100x1^3 -> 3x64^3 and 3x64^3 -> 1x1^3.
  static ArchitectureConfig full() { return {}; }

  // Desk-scale pair for 8^3 volumes with hidden widths divided by 8.
  static ArchitectureConfig toy() {
    ArchitectureConfig c;
    c.generator_channels = {64};
    c.discriminator_channels = {16};
    return c;
  }

  // Edge length of the discriminator input / generator output for a 1^3 latent.
  std::size_t base_edge() const { return std::size_t{4} << generator_channels.size(); }
};

template <typename T>
Generator<T> make_generator(const ArchitectureConfig& cfg) {
  std::vector<nn::Stage<T>> stages;
  std::size_t in = cfg.latent_channels;
  const auto k = cfg.kernel;
  for (std::size_t i = 0; i <= cfg.generator_channels.size(); ++i) {
    const bool last = i == cfg.generator_channels.size();
    const std::size_t out = last ? cfg.phase_count : cfg.generator_channels[i];
    ConvSpec spec{in, out, {k, k, k}, i == 0 ? 1u : 2u, i == 0 ? 0u : 1u, PadMode::zero};
    nn::Stage<T> s;
    s.conv = nn::ConvLayer<T>(ConvKind::transposed, spec, last);
    if (!last) s.bn = nn::BatchNorm<T>(out, static_cast<T>(cfg.bn_eps), static_cast<T>(cfg.bn_momentum));
    s.activation = last ? Activation::softmax : Activation::relu;
    stages.push_back(std::move(s));
    in = out;
  }
  return Generator<T>(std::move(stages));
}

template <typename T>
Discriminator<T> make_discriminator(const ArchitectureConfig& cfg) {
  std::vector<nn::Stage<T>> stages;
  std::size_t in = cfg.phase_count;
  const auto k = cfg.kernel;
  for (std::size_t i = 0; i <= cfg.discriminator_channels.size(); ++i) {
    const bool last = i == cfg.discriminator_channels.size();
    const std::size_t out = last ? 1 : cfg.discriminator_channels[i];
    ConvSpec spec{in, out, {k, k, k}, last ? 1u : 2u, last ? 0u : 1u, PadMode::zero};
    nn::Stage<T> s;
    s.conv = nn::ConvLayer<T>(ConvKind::conv, spec, last);
    if (!last && (i > 0 || cfg.discriminator_first_bn)) {
      s.bn = nn::BatchNorm<T>(out, static_cast<T>(cfg.bn_eps), static_cast<T>(cfg.bn_momentum));
    }
    s.activation = last ? Activation::sigmoid : Activation::leaky_relu;
    s.slope = static_cast<T>(cfg.leaky_slope);
    stages.push_back(std::move(s));
    in = out;
  }
  return Discriminator<T>(std::move(stages));
}

/// DC-GAN initialization: kernels ~ N(0, 0.02), gamma ~ N(1, 0.02), beta = 0,
/// biases = 0. Running statistics are reset to (0, 1).
template <typename T>
void init_weights(nn::Sequential<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> kernel(0.0, 0.02), gain(1.0, 0.02);
  for (auto& s : net.stages()) {
    for (auto& w : s.conv.weights()) w = static_cast<T>(kernel(rng));
    for (auto& b : s.conv.bias()) b = T(0);
    if (s.bn) {
      for (auto& g : s.bn->gamma()) g = static_cast<T>(gain(rng));
      for (auto& b : s.bn->beta()) b = T(0);
      for (auto& m : s.bn->running_mean()) m = T(0);
      for (auto& v : s.bn->running_var()) v = T(1);
    }
  }
}

/// Output edge for a zero-padded generator fed an alpha^3 latent:
/// 64 + (alpha - 1) * 16 for the full-size network.
inline std::size_t generated_edge(const ArchitectureConfig& cfg, std::size_t alpha) {
  std::size_t n = alpha + cfg.kernel - 1;
  for (std::size_t i = 0; i < cfg.generator_channels.size(); ++i) n = (n - 1) * 2 + cfg.kernel - 2;
  return n;
}

/// Output edge of the all-circular generator: period 16 alpha for the full-size network.
inline std::size_t periodic_edge(const ArchitectureConfig& cfg, std::size_t alpha) {
  return alpha << cfg.generator_channels.size();
}

}  // namespace microgen::gan
