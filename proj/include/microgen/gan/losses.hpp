#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"

namespace microgen::gan {

inline constexpr double kProbabilityClamp = 1e-7;

enum class GeneratorLossMode : std::uint8_t { saturating, non_saturating };

namespace detail {
template <typename T>
T clamp_probability(T p) {
  return std::clamp(p, T(kProbabilityClamp), T(1.0 - kProbabilityClamp));
}
template <typename T>
bool inside_clamp(T p) {
  return p > T(kProbabilityClamp) && p < T(1.0 - kProbabilityClamp);
}
template <typename T>
void check_batch(std::span<const T> p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string(what) + " batch is empty");
}
}  // namespace detail

/// Discriminator objective J_D (to be maximized), with one-sided label smoothing:
///   mean[(1 - eps) log D(x) + eps log(1 - D(x))] + mean[log(1 - D(G(z)))]
/// Probabilities are clamped to [1e-7, 1 - 1e-7].
template <typename T>
T discriminator_objective(std::span<const T> d_real, std::span<const T> d_fake, T smoothing) {
  detail::check_batch(d_real, "real");
  detail::check_batch(d_fake, "fake");
  T real = 0, fake = 0;
  for (T p : d_real) {
    const T q = detail::clamp_probability(p);
    real += (T(1) - smoothing) * std::log(q) + smoothing * std::log(T(1) - q);
  }
  for (T p : d_fake) fake += std::log(T(1) - detail::clamp_probability(p));
  return real / static_cast<T>(d_real.size()) + fake / static_cast<T>(d_fake.size());
}

/// Gradients of the descent loss -J_D with respect to each probability.
template <typename T>
struct DiscriminatorGrad {
  std::vector<T> real;
  std::vector<T> fake;
};

template <typename T>
DiscriminatorGrad<T> discriminator_loss_grad(std::span<const T> d_real, std::span<const T> d_fake, T smoothing) {
  detail::check_batch(d_real, "real");
  detail::check_batch(d_fake, "fake");
  DiscriminatorGrad<T> g{std::vector<T>(d_real.size()), std::vector<T>(d_fake.size())};
  const T nr = static_cast<T>(d_real.size()), nf = static_cast<T>(d_fake.size());
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const T p = d_real[i];
    g.real[i] = detail::inside_clamp(p) ? -((T(1) - smoothing) / p - smoothing / (T(1) - p)) / nr : T(0);
  }
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const T p = d_fake[i];
    g.fake[i] = detail::inside_clamp(p) ? (T(1) / (T(1) - p)) / nf : T(0);
  }
  return g;
}

/// Generator loss to minimize.
///   saturating:      mean log(1 - D(G(z)))
///   non_saturating: -mean log D(G(z))
template <typename T>
T generator_loss(std::span<const T> d_fake, GeneratorLossMode mode = GeneratorLossMode::non_saturating) {
  detail::check_batch(d_fake, "fake");
  T acc = 0;
  for (T p : d_fake) {
    const T q = detail::clamp_probability(p);
    acc += mode == GeneratorLossMode::saturating ? std::log(T(1) - q) : -std::log(q);
  }
  return acc / static_cast<T>(d_fake.size());
}

template <typename T>
std::vector<T> generator_loss_grad(std::span<const T> d_fake,
                                   GeneratorLossMode mode = GeneratorLossMode::non_saturating) {
  detail::check_batch(d_fake, "fake");
  std::vector<T> g(d_fake.size());
  const T n = static_cast<T>(d_fake.size());
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const T p = d_fake[i];
    if (!detail::inside_clamp(p)) continue;
    g[i] = mode == GeneratorLossMode::saturating ? -T(1) / ((T(1) - p) * n) : -T(1) / (p * n);
  }
  return g;
}

}  // namespace microgen::gan
