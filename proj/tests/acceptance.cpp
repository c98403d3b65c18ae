// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Optional arguments select criteria by name.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "microgen/microgen.hpp"
#include "oracles.hpp"

using namespace microgen;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  bool skip = false;
  std::string detail;
};

// Collects failures; the first few are kept for the report.
struct Check {
  Outcome out;
  std::size_t failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    out.pass = false;
    if (failures++ < 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) {
    if (out.pass) out.detail = summary;
    else if (failures > 3) out.detail += "; +" + std::to_string(failures - 3) + " more";
    return out;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SolverOptions tight() {
  SolverOptions o;
  o.scheme = SolverScheme::red_black_sor;
  o.omega = 1.8;
  o.tol = 1e-12;
  o.max_iter = 500000;
  return o;
}

// ---------------------------------------------------------------------------

Outcome shape_audit() {
  const auto t0 = Clock::now();
  Check c;
  const auto cfg = gan::ArchitectureConfig::full();
  const auto g = gan::make_generator<float>(cfg);
  const auto d = gan::make_discriminator<float>(cfg);
  c.expect(g.output_shape({100, 1, 1, 1}) == nn::Shape4{3, 64, 64, 64}, "generator is not 100x1^3 -> 3x64^3");
  c.expect(d.output_shape({3, 64, 64, 64}) == nn::Shape4{1, 1, 1, 1}, "discriminator is not 3x64^3 -> 1");
  c.expect(g.size() + d.size() == 10, "expected 10 parameterized layers");
  const double t = seconds_since(t0);
  c.expect(t < 1.0, "runtime " + fmt("%.3f", t) + " s >= 1 s");
  return c.done("100x1^3 -> 3x64^3 -> 1x1^3, 10 layers, " + fmt("%.3f", t) + " s");
}

Outcome lambda_scaling() {
  Check c;
  auto g = gan::make_generator<float>(gan::ArchitectureConfig::full());
  gan::init_weights(g, 11);
  const std::size_t expect[] = {64, 80, 96, 112};
  std::vector<double> voxels, times;
  std::string edges;
  for (std::size_t a = 1; a <= 4; ++a) {
    const auto z = gan::sample_latent(a, a);
    double best = 1e300;
    std::size_t edge = 0;
    for (int rep = 0; rep < 2; ++rep) {
      const auto t0 = Clock::now();
      const auto out = gan::generate(g, z);
      best = std::min(best, seconds_since(t0));
      edge = out.labels.nx();
      c.expect(out.labels.dims() == Dims{edge, edge, edge}, "non-cubic output");
    }
    c.expect(edge == expect[a - 1], "alpha " + std::to_string(a) + " gave edge " + std::to_string(edge));
    voxels.push_back(std::pow(static_cast<double>(edge), 3));
    times.push_back(best);
    edges += (edges.empty() ? "" : ",") + std::to_string(edge);
  }
  // Least-squares line time = a + b * voxels.
  const double n = 4;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    sx += voxels[i], sy += times[i], sxx += voxels[i] * voxels[i];
    sxy += voxels[i] * times[i], syy += times[i] * times[i];
  }
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  const double r2 = vy > 0 ? cov * cov / (vx * vy) : 0.0;
  c.expect(r2 > 0.95, "R^2 = " + fmt("%.4f", r2));
  std::string ts;
  for (double t : times) ts += (ts.empty() ? "" : ",") + fmt("%.2f", t);
  return c.done("edges {" + edges + "}, times {" + ts + "} s, R^2 = " + fmt("%.4f", r2));
}

Outcome periodicity() {
  Check c;
  double worst = 0;
  for (const auto& cfg : {gan::ArchitectureConfig::full(), gan::ArchitectureConfig::toy()}) {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      auto g = gan::make_generator<float>(cfg);
      gan::init_weights(g, 100 + seed);
      for (std::size_t alpha : {1u, 2u}) {
        const auto z = gan::sample_latent(seed * 10 + alpha, alpha, cfg.latent_channels);
        const auto base = gan::generate_periodic(g, z);
        const auto big = gan::generate_periodic(g, nn::tile_spatial(z, 2, 2, 2));
        const auto want = nn::tile_spatial(base.soft.tensor(), 2, 2, 2);
        double m = 0;
        for (std::size_t i = 0; i < want.size(); ++i)
          m = std::max(m, std::abs(double(want[i]) - big.soft.tensor()[i]));
        worst = std::max(worst, m);
        c.expect(m <= 1e-5, "tiling residual " + fmt("%.3g", m));

        const auto& v = base.labels;
        const auto t = tile(v, {2, 2, 2});
        const auto fa = interface_face_counts(v, Boundary::periodic), fb = interface_face_counts(t, Boundary::periodic);
        for (std::size_t p = 0; p < 3; ++p) {
          c.expect(fb[p] == 8 * fa[p], "face count phase " + std::to_string(p));
          c.expect(specific_surface_area(v, p, Boundary::periodic) == specific_surface_area(t, p, Boundary::periodic),
                   "SSA differs");
        }
        c.expect(tpb_edge_count(t, Boundary::periodic) == 8 * tpb_edge_count(v, Boundary::periodic), "TPB count");
        c.expect(tpb_density(v, Boundary::periodic) == tpb_density(t, Boundary::periodic), "TPB density differs");
      }
    }
  }
  return c.done("max tiling residual " + fmt("%.2g", worst) + "; SSA/TPB counts x8 exact");
}

Outcome metric_oracles() {
  Check c;
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Dims d{6 + rng() % 3, 6 + rng() % 3, 6 + rng() % 3};
    const auto g = oracle::random_grid(seed, d, 3, 398.0);
    const double n = static_cast<double>(g.size());
    const auto counts = phase_counts(g);
    for (int p = 0; p < 3; ++p) {
      std::uint64_t brute = 0;
      for (auto l : g.labels()) brute += l == p;
      c.expect(counts[p] == brute, "phase count seed " + std::to_string(seed));
      c.expect(std::abs(volume_fraction(g, p) - brute / n) <= 1e-12, "volume fraction");
    }
    for (Boundary b : {Boundary::truncated, Boundary::periodic}) {
      const bool per = b == Boundary::periodic;
      const auto faces = interface_face_counts(g, b);
      for (int p = 0; p < 3; ++p) {
        const auto brute = oracle::face_count(g, p, per);
        c.expect(faces[p] == brute, "face count seed " + std::to_string(seed));
        const double ssa = static_cast<double>(brute) / (n * g.spacing_um());
        c.expect(std::abs(specific_surface_area(g, p, b) - ssa) <= 1e-12 * std::max(1.0, ssa), "SSA ratio");
        ++checks;
      }
      const auto edges = oracle::tpb_edges(g, per);
      c.expect(tpb_edge_count(g, b) == edges, "TPB edges seed " + std::to_string(seed));
      const double dens = static_cast<double>(edges) * g.spacing_um() / (n * std::pow(g.spacing_um(), 3));
      c.expect(std::abs(tpb_density(g, b) - dens) <= 1e-12 * std::max(1.0, dens), "TPB density");
      for (int ax = 0; ax < 3; ++ax) {
        const std::size_t len = d[static_cast<std::size_t>(ax)];
        for (int p = 0; p < 3; ++p) {
          const auto curve = tpcf(g, p, static_cast<Axis>(ax), len - 1, b);
          for (std::size_t r = 0; r < len; ++r) {
            c.expect(std::abs(curve.s2[r] - oracle::s2(g, p, ax, static_cast<long>(r), per)) <= 1e-12, "S2");
            ++checks;
          }
        }
      }
    }
  }
  return c.done("100 grids, " + std::to_string(checks) + " SSA/S2 comparisons plus VF/TPB, exact");
}

VoxelGrid straight_channel(std::size_t n, std::size_t w) {
  VoxelGrid g({n, n, n}, 100.0, 2);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        if (y < w && z < w) g.set(x, y, z, 1);
  return g;
}

Outcome transport_analytics() {
  Check c;
  const auto opt = tight();
  for (Axis a : {Axis::x, Axis::y, Axis::z}) {
    const auto r = solve_diffusion(VoxelGrid({6, 7, 5}, 1.0, 2, std::uint8_t{1}), 1, a, LateralBc::mirror, opt).result;
    c.expect(std::abs(r.d_rel - 1.0) <= 1e-6, "dense cube D_rel " + fmt("%.9g", r.d_rel));
  }
  const auto ch = straight_channel(8, 3);
  const auto rc = solve_diffusion(ch, 1, Axis::x, LateralBc::mirror, opt).result;
  c.expect(std::abs(rc.d_rel - 9.0 / 64.0) <= 1e-3, "channel D_rel " + fmt("%.9g", rc.d_rel));
  c.expect(std::abs(rc.tau - 1.0) <= 1e-3, "channel tau " + fmt("%.9g", rc.tau));
  const auto rn = solve_diffusion(ch, 1, Axis::y, LateralBc::mirror, opt).result;
  c.expect(rn.d_rel < 1e-9, "non-percolating D_rel " + fmt("%.3g", rn.d_rel));

  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = oracle::random_grid(seed, {6, 6, 6}, 2);
    for (int ax = 0; ax < 3; ++ax)
      for (bool per : {false, true}) {
        const auto r = solve_diffusion(g, 0, static_cast<Axis>(ax), per ? LateralBc::periodic : LateralBc::mirror, opt);
        const double e = std::abs(r.result.d_rel - oracle::dense_d_rel(g, 0, ax, per));
        worst = std::max(worst, e);
        c.expect(e <= 1e-6, "dense oracle seed " + std::to_string(seed) + " err " + fmt("%.3g", e));
      }
  }

  // Periodic lateral faces only add conducting links, so flux cannot drop.
  auto gen = gan::make_generator<float>(gan::ArchitectureConfig::full());
  gan::init_weights(gen, 21);
  double min_gap = 1e300;
  std::size_t solves = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto v = gan::generate_periodic(gen, gan::sample_latent(500 + s, 2)).labels;
    for (std::size_t p = 0; p < 3; ++p)
      for (Axis a : {Axis::x, Axis::y, Axis::z}) {
        const auto m = solve_diffusion(v, p, a, LateralBc::mirror, opt).result;
        const auto q = solve_diffusion(v, p, a, LateralBc::periodic, opt).result;
        const double gap = q.total_flux() - m.total_flux();
        min_gap = std::min(min_gap, gap);
        c.expect(gap >= -1e-9, "periodic flux below mirror by " + fmt("%.3g", -gap));
        c.expect(m.converged && q.converged, "solver did not converge");
        solves += 2;
      }
  }
  return c.done("cube 1, channel D_rel " + fmt("%.6f", rc.d_rel) + " tau " + fmt("%.6f", rc.tau) +
                ", dense-oracle max err " + fmt("%.2g", worst) + ", periodic-mirror flux gap min " +
                fmt("%.3g", min_gap) + " over " + std::to_string(solves) + " solves");
}

Outcome loss_identities() {
  Check c;
  const std::vector<double> half{0.5}, r{0.9}, f{0.1};
  const double a = gan::discriminator_objective<double>(half, half, 0.0);
  const double b = gan::generator_loss<double>(half);
  const double s = gan::discriminator_objective<double>(r, f, 0.1);
  c.expect(std::abs(a + 1.3863) <= 1e-4, "J_D(0.5,0.5) = " + fmt("%.6f", a));
  c.expect(std::abs(b - 0.6931) <= 1e-4, "J_G(0.5) = " + fmt("%.6f", b));
  const double by_hand = 0.9 * std::log(0.9) + 0.1 * std::log(0.1) + std::log(0.9);
  c.expect(std::abs(s + 0.4303) <= 1e-4, "smoothed J_D = " + fmt("%.6f", s) + " vs stated -0.4303 (|diff| " +
                                             fmt("%.2g", std::abs(s + 0.4303)) + "); the stated formula gives " +
                                             fmt("%.6f", by_hand));
  c.expect(std::abs(s - by_hand) <= 1e-12, "smoothed J_D disagrees with hand substitution");
  return c.done(fmt("%.6f", a) + ", " + fmt("%.6f", b) + ", " + fmt("%.6f", s));
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Check c;
  double worst = 0;
  const auto cases = gradcheck::all_cases();
  for (const auto& k : cases) {
    std::mt19937_64 rng(std::hash<std::string>{}(k.name));
    for (int i = 0; i < 20; ++i) {
      const double e = k.run(rng);
      worst = std::max(worst, e);
      c.expect(e < 1e-4, k.name + " rel-err " + fmt("%.3g", e));
    }
  }
  const double t = seconds_since(t0);
  c.expect(t < 300, "runtime " + fmt("%.0f", t) + " s");
  return c.done(std::to_string(cases.size()) + " cases x 20 configs, max rel-err " + fmt("%.2g", worst) + ", " +
                fmt("%.1f", t) + " s");
}

Outcome toy_training() {
  const auto t0 = Clock::now();
  Check c;
  gan::TrainConfig cfg;
  cfg.arch = gan::ArchitectureConfig::toy();
  cfg.lr = 2e-3;
  cfg.batch_size = 16;
  cfg.max_cycles = 500;
  cfg.seed = 1;
  const auto data = gan::stripe_dataset(64, 8, cfg.seed);
  std::vector<double> target(3, 0.0);
  for (const auto& s : data)
    for (std::size_t p = 0; p < 3; ++p) target[p] += volume_fraction(decode(s), p) / data.size();

  const auto res = gan::train(data, cfg);
  c.expect(res.discriminator_updates == 500, "discriminator updates " + std::to_string(res.discriminator_updates));
  c.expect(res.generator_updates == 2 * res.discriminator_updates,
           "generator updates " + std::to_string(res.generator_updates));

  gan::EvalConfig ec;
  ec.samples = 64;
  ec.seed = 99;
  const auto ev = gan::evaluate_samples(res.generator, ec);
  std::string fr;
  for (const auto& s : ev.stats) {
    if (s.metric != "volume_fraction") continue;
    const double want = target[static_cast<std::size_t>(s.phase)];
    c.expect(std::abs(s.mean - want) <= 0.10,
             "phase " + std::to_string(s.phase) + " fraction " + fmt("%.3f", s.mean) + " vs " + fmt("%.3f", want));
    fr += (fr.empty() ? "" : ", ") + fmt("%.3f", s.mean);
  }
  const double t = seconds_since(t0);
  c.expect(t < 1800, "runtime " + fmt("%.0f", t) + " s");
  return c.done("fractions (" + fr + ") vs (0.500, 0.250, 0.250), updates 500/1000, " + fmt("%.0f", t) + " s");
}

// Needs the segmented cathode volume as MGV1 (253x252x252); see data/DATASETS.md.
Outcome cathode_dataset() {
  const char* path = std::getenv("MICROGEN_CATHODE_DATASET");
  if (!path || !*path) return {true, true, "MICROGEN_CATHODE_DATASET not set"};
  Check c;
  const auto vol = read_mgv1(path);
  const SubvolumeSpec spec{64, 8};
  const auto origins = subvolume_origins(vol.dims(), spec);
  c.expect(origins.size() == 13824, "sub-volume count " + std::to_string(origins.size()));
  std::mt19937_64 rng(0);
  std::vector<MetricReport> reports;
  for (int i = 0; i < 100; ++i) {
    const auto sub = crop(vol, origins[rng() % origins.size()], {64, 64, 64});
    auto r = compute_metrics(sub, Boundary::truncated);
    append_transport(r, solve_diffusion(sub, 0, Axis::x, LateralBc::mirror).result);
    reports.push_back(std::move(r));
  }
  double phi = 0, tpb = 0, drel = 0;
  for (const auto& s : aggregate_stats(reports)) {
    if (s.metric == "volume_fraction" && s.phase == 0) phi = s.mean;
    if (s.metric == "tpb") tpb = s.mean;
    if (s.metric == "D_rel" && s.phase == 0) drel = s.mean;
  }
  c.expect(std::abs(phi - 0.50) <= 0.06, "black phi " + fmt("%.3f", phi));
  c.expect(std::abs(tpb - 0.43) <= 0.04, "TPB " + fmt("%.3f", tpb));
  c.expect(std::abs(drel - 0.26) <= 0.07, "black D_rel " + fmt("%.3f", drel));
  return c.done("13824 windows; phi " + fmt("%.3f", phi) + ", TPB " + fmt("%.3f", tpb) + ", D_rel " +
                fmt("%.3f", drel));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shape_audit", shape_audit},
      {"lambda_scaling", lambda_scaling},
      {"periodicity", periodicity},
      {"metric_oracles", metric_oracles},
      {"transport_analytics", transport_analytics},
      {"loss_identities", loss_identities},
      {"gradient_suite", gradient_suite},
      {"toy_training", toy_training},
      {"cathode_dataset", cathode_dataset},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, false, std::string("exception: ") + e.what()};
    }
    const char* tag = o.skip ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    if (!o.pass) ++failed;
    std::printf("%s  %-20s %s [%.1f s]\n", tag, name.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
