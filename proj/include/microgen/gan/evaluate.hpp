#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "microgen/gan/generate.hpp"
#include "microgen/metrics.hpp"
#include "microgen/transport.hpp"

namespace microgen::gan {

struct EvalConfig {
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  std::size_t alpha = 1;
  bool periodic = false;
  double spacing_nm = kDefaultSpacingNm;
  Boundary boundary = Boundary::truncated;
  bool transport = false;
  std::vector<Axis> directions{Axis::x, Axis::y, Axis::z};
  LateralBc lateral = LateralBc::mirror;
  SolverOptions solver{};
};

struct Evaluation {
  std::vector<MetricReport> reports;
  std::vector<MetricStat> stats;
};

/// Generates, decodes and characterizes `samples` volumes; returns the
/// per-sample reports and their mean / standard deviation per metric.
inline Evaluation evaluate_samples(const Generator<float>& gen, const EvalConfig& cfg) {
  if (cfg.samples == 0) throw InvalidArgument("evaluate_samples needs at least one sample");
  const Generator<float> net = cfg.periodic ? make_periodic(gen) : gen;
  std::mt19937_64 rng(cfg.seed);
  Evaluation ev;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const auto z = sample_latent(rng(), cfg.alpha, net.input_channels());
    const auto g = generate(net, z, cfg.spacing_nm);
    auto report = compute_metrics(g.labels, cfg.boundary);
    if (cfg.transport) {
      for (std::size_t p = 0; p < g.labels.phase_count(); ++p)
        for (Axis a : cfg.directions) append_transport(report, solve_diffusion(g.labels, p, a, cfg.lateral, cfg.solver).result);
    }
    ev.reports.push_back(std::move(report));
  }
  ev.stats = aggregate_stats(ev.reports);
  return ev;
}

}  // namespace microgen::gan
