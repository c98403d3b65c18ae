#pragma once

#include <cmath>
#include <vector>

#include "microgen/gan/architecture.hpp"
#include "microgen/gan/latent.hpp"
#include "microgen/voxel_grid.hpp"

namespace microgen::gan {

// Cathode voxel edge; used when no spacing is given.
inline constexpr double kDefaultSpacingNm = 398.0;

struct Generated {
  OneHotGrid soft;
  VoxelGrid labels;
};

/// Eval-mode forward pass: soft one-hot volume plus its argmax decoding.
inline Generated generate(const Generator<float>& gen, const LatentField& z, double spacing_nm = kDefaultSpacingNm) {
  if (gen.empty()) throw InvalidArgument("generate: empty generator");
  if (z.channels() != gen.input_channels()) {
    throw InvalidArgument("latent has " + std::to_string(z.channels()) + " channels, generator expects " +
                          std::to_string(gen.input_channels()));
  }
  OneHotGrid soft(gen.forward_eval(z));
  VoxelGrid labels = decode(soft, spacing_nm);
  return {std::move(soft), std::move(labels)};
}

/// Generator with every layer switched to circular padding. The output is
/// exactly periodic with period (latent extent) * 2^(stride-2 layers).
inline Generator<float> make_periodic(const Generator<float>& gen) {
  Generator<float> g = gen;
  g.set_pad_mode(PadMode::circular);
  return g;
}

inline Generated generate_periodic(const Generator<float>& gen, const LatentField& z,
                                   double spacing_nm = kDefaultSpacingNm) {
  return generate(make_periodic(gen), z, spacing_nm);
}

/// Mean absolute change of the soft output between consecutive interpolation
/// steps beta = 1, 1 - 1/steps, ..., 0.
inline std::vector<double> interpolation_step_changes(const Generator<float>& gen, const LatentField& z_start,
                                                      const LatentField& z_end, std::size_t steps,
                                                      std::vector<Generated>* frames = nullptr) {
  if (steps == 0) throw InvalidArgument("interpolation needs at least one step");
  std::vector<double> changes;
  nn::Tensor4<float> prev;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double beta = 1.0 - static_cast<double>(i) / static_cast<double>(steps);
    auto g = generate(gen, interpolate_latent(z_start, z_end, beta));
    if (i > 0) {
      double acc = 0.0;
      const auto& cur = g.soft.tensor();
      for (std::size_t k = 0; k < cur.size(); ++k) acc += std::abs(static_cast<double>(cur[k]) - prev[k]);
      changes.push_back(acc / static_cast<double>(cur.size()));
    }
    prev = g.soft.tensor();
    if (frames) frames->push_back(std::move(g));
  }
  return changes;
}

}  // namespace microgen::gan
