#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "microgen/binary_io.hpp"
#include "microgen/error.hpp"
#include "microgen/metrics.hpp"
#include "microgen/parallel.hpp"
#include "microgen/voxel_grid.hpp"

namespace microgen {

/// Treatment of the four faces parallel to the transport direction.
enum class LateralBc : std::uint8_t { mirror, periodic };

inline const char* lateral_bc_name(LateralBc b) { return b == LateralBc::periodic ? "periodic" : "mirror"; }

inline LateralBc parse_lateral_bc(const std::string& s) {
  if (s == "mirror") return LateralBc::mirror;
  if (s == "periodic") return LateralBc::periodic;
  throw InvalidArgument("unknown lateral boundary '" + s + "' (expected mirror or periodic)");
}

enum class SolverScheme : std::uint8_t {
  jacobi,         // order-independent; omega must be in (0, 1]
  red_black_sor,  // two-colour over-relaxation; omega in (0, 2), ~1.9 is fast
};

struct SolverOptions {
  double tol = 1e-6;
  std::size_t max_iter = 0;  // 0: 10 * n^2 sweeps, n = largest grid dimension
  SolverScheme scheme = SolverScheme::jacobi;
  double omega = 1.0;
  std::size_t check_every = 100;
};

/// Steady diffusion through one phase. Dimensionless with D0 = 1.
struct TransportResult {
  std::size_t phase = 0;
  Axis direction = Axis::x;
  LateralBc lateral = LateralBc::mirror;
  double volume_fraction = 0.0;
  double d_eff = 0.0;
  double d_rel = 0.0;
  double tau = std::numeric_limits<double>::infinity();  // +inf when non-percolating
  double inlet_flux = 0.0;
  double outlet_flux = 0.0;
  double flux_mismatch = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool percolating = false;

  // Mean of inlet and outlet plane flux, in lattice units.
  double total_flux() const noexcept { return 0.5 * (inlet_flux + outlet_flux); }
};

/// Per-voxel flux magnitude; zero outside the conducting phase.
struct FluxField {
  ScalarField field;
  std::size_t phase = 0;
  double spacing_nm = 1.0;
};

struct DiffusionSolution {
  TransportResult result;
  FluxField flux;
};

namespace detail {

// Lattice neighbour lookup with optional lateral wrap; the transport axis never wraps.
class LatticeWalker {
 public:
  LatticeWalker(const Dims& d, std::size_t transport_axis, LateralBc bc)
      : dims_(d), axis_(transport_axis), bc_(bc) {}

  // Returns the neighbour index in direction (axis, sign) or -1 when it falls outside.
  std::ptrdiff_t neighbour(std::size_t idx, std::size_t axis, int sign) const {
    std::array<std::size_t, 3> c{idx % dims_.nx, (idx / dims_.nx) % dims_.ny, idx / (dims_.nx * dims_.ny)};
    const std::size_t n = dims_[axis];
    std::size_t& k = c[axis];
    if (sign < 0) {
      if (k == 0) {
        if (axis == axis_ || bc_ == LateralBc::mirror) return -1;
        k = n - 1;
      } else {
        --k;
      }
    } else {
      if (k + 1 == n) {
        if (axis == axis_ || bc_ == LateralBc::mirror) return -1;
        k = 0;
      } else {
        ++k;
      }
    }
    return static_cast<std::ptrdiff_t>(c[0] + dims_.nx * (c[1] + dims_.ny * c[2]));
  }

  std::size_t coord(std::size_t idx, std::size_t axis) const {
    if (axis == 0) return idx % dims_.nx;
    if (axis == 1) return (idx / dims_.nx) % dims_.ny;
    return idx / (dims_.nx * dims_.ny);
  }

 private:
  Dims dims_;
  std::size_t axis_;
  LateralBc bc_;
};

// Flood fill over `phase` voxels from every voxel on the given transport-axis plane.
inline std::vector<std::uint8_t> flood_from_plane(const VoxelGrid& grid, std::uint8_t phase, std::size_t axis,
                                                  std::size_t plane, const LatticeWalker& walk) {
  std::vector<std::uint8_t> seen(grid.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == phase && walk.coord(i, axis) == plane) {
      seen[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t ax = 0; ax < 3; ++ax)
      for (int s : {-1, 1}) {
        const auto j = walk.neighbour(i, ax, s);
        if (j >= 0 && !seen[j] && grid[j] == phase) {
          seen[j] = 1;
          queue.push_back(static_cast<std::size_t>(j));
        }
      }
  }
  return seen;
}

}  // namespace detail

/// True iff a 6-connected path of `phase` voxels joins the inlet plane to the
/// outlet plane along `direction`.
inline bool percolates(const VoxelGrid& grid, std::size_t phase, Axis direction,
                       LateralBc lateral = LateralBc::mirror) {
  detail::check_phase(grid, phase);
  const std::size_t ax = axis_index(direction);
  const detail::LatticeWalker walk(grid.dims(), ax, lateral);
  const auto reach = detail::flood_from_plane(grid, static_cast<std::uint8_t>(phase), ax, 0, walk);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (reach[i] && walk.coord(i, ax) == grid.dims()[ax] - 1) return true;
  return false;
}

/// Solves the steady diffusion problem on the voxels of `phase`.
///
/// Unit conductance between face-adjacent conducting voxels, C = 1 on the
/// inlet plane and C = 0 on the outlet plane through half-voxel links
/// (conductance 2), zero flux into other phases, lateral faces mirror or
/// periodic. Only clusters touching both planes carry flux and are solved.
inline DiffusionSolution solve_diffusion(const VoxelGrid& grid, std::size_t phase, Axis direction,
                                         LateralBc lateral, const SolverOptions& opt = {}) {
  detail::check_phase(grid, phase);
  if (!(opt.tol > 0.0)) throw InvalidArgument("solver tolerance must be > 0");
  if (opt.check_every == 0) throw InvalidArgument("check_every must be >= 1");
  if (opt.scheme == SolverScheme::jacobi && !(opt.omega > 0.0 && opt.omega <= 1.0)) {
    throw InvalidArgument("Jacobi relaxation factor must be in (0, 1]; use red_black_sor to over-relax");
  }
  if (opt.scheme == SolverScheme::red_black_sor && !(opt.omega > 0.0 && opt.omega < 2.0)) {
    throw InvalidArgument("SOR relaxation factor must be in (0, 2)");
  }

  const Dims d = grid.dims();
  const std::size_t ax = axis_index(direction);
  const std::size_t n_axis = d[ax];
  const std::size_t cross_section = grid.size() / n_axis;
  const auto p = static_cast<std::uint8_t>(phase);
  const detail::LatticeWalker walk(d, ax, lateral);

  DiffusionSolution sol;
  auto& res = sol.result;
  res.phase = phase;
  res.direction = direction;
  res.lateral = lateral;
  res.volume_fraction = volume_fraction(grid, phase);
  sol.flux = FluxField{ScalarField{d, std::vector<float>(grid.size(), 0.0f)}, phase, grid.spacing_nm()};

  const auto from_inlet = detail::flood_from_plane(grid, p, ax, 0, walk);
  const auto from_outlet = detail::flood_from_plane(grid, p, ax, n_axis - 1, walk);

  // Compact numbering of the active (spanning) voxels.
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> compact(grid.size(), kNone);
  std::vector<std::size_t> voxel_of;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (from_inlet[i] && from_outlet[i]) {
      compact[i] = static_cast<std::uint32_t>(voxel_of.size());
      voxel_of.push_back(i);
    }
  }
  res.percolating = !voxel_of.empty();
  if (!res.percolating) {
    res.converged = true;
    return sol;
  }

  const std::size_t m = voxel_of.size();
  // Six neighbour slots per unknown: (axis, -), (axis, +) for x, y, z.
  std::vector<std::uint32_t> nbr(6 * m, kNone);
  std::vector<double> diag(m, 0.0), rhs(m, 0.0);
  std::vector<std::uint8_t> at_inlet(m, 0), at_outlet(m, 0), colour(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = voxel_of[k];
    for (std::size_t a = 0; a < 3; ++a)
      for (int s = 0; s < 2; ++s) {
        const auto j = walk.neighbour(i, a, s == 0 ? -1 : 1);
        if (j >= 0 && static_cast<std::size_t>(j) != i && compact[j] != kNone) {
          nbr[6 * k + 2 * a + s] = compact[j];
          diag[k] += 1.0;
        }
      }
    const std::size_t c = walk.coord(i, ax);
    if (c == 0) {
      at_inlet[k] = 1;
      diag[k] += 2.0;
      rhs[k] += 2.0;
    }
    if (c == n_axis - 1) {
      at_outlet[k] = 1;
      diag[k] += 2.0;
    }
    colour[k] = static_cast<std::uint8_t>((walk.coord(i, 0) + walk.coord(i, 1) + walk.coord(i, 2)) & 1u);
  }

  std::vector<double> conc(m), next(m);
  for (std::size_t k = 0; k < m; ++k) {
    conc[k] = 1.0 - (static_cast<double>(walk.coord(voxel_of[k], ax)) + 0.5) / static_cast<double>(n_axis);
  }

  auto relaxed = [&](const std::vector<double>& src, std::size_t k) {
    double acc = rhs[k];
    for (std::size_t s = 0; s < 6; ++s) {
      const auto j = nbr[6 * k + s];
      if (j != kNone) acc += src[j];
    }
    return acc / diag[k];
  };

  auto measure = [&] {
    double fin = 0.0, fout = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (at_inlet[k]) fin += 2.0 * (1.0 - conc[k]);
      if (at_outlet[k]) fout += 2.0 * conc[k];
    }
    res.inlet_flux = fin;
    res.outlet_flux = fout;
    res.flux_mismatch = std::abs(fin - fout);
    res.d_eff = res.total_flux() * static_cast<double>(n_axis) / static_cast<double>(cross_section);
    res.d_rel = res.d_eff;
    res.tau = res.d_eff > 0.0 ? res.volume_fraction / res.d_eff : std::numeric_limits<double>::infinity();
  };

  const std::size_t n_max = std::max({d.nx, d.ny, d.nz});
  const std::size_t max_iter = opt.max_iter ? opt.max_iter : 10 * n_max * n_max;
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (m + kChunk - 1) / kChunk;

  measure();
  double tau_prev = res.tau;
  res.converged = false;
  std::size_t it = 0;
  while (it < max_iter) {
    if (opt.scheme == SolverScheme::jacobi) {
      parallel_for(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(m, (c + 1) * kChunk);
        for (std::size_t k = c * kChunk; k < end; ++k)
          next[k] = (1.0 - opt.omega) * conc[k] + opt.omega * relaxed(conc, k);
      });
      conc.swap(next);
    } else {
      for (std::uint8_t col = 0; col < 2; ++col)
        for (std::size_t k = 0; k < m; ++k)
          if (colour[k] == col) conc[k] = (1.0 - opt.omega) * conc[k] + opt.omega * relaxed(conc, k);
    }
    ++it;
    if (it % opt.check_every == 0 || it == max_iter) {
      measure();
      const double change = std::abs(res.tau - tau_prev) / res.tau;
      tau_prev = res.tau;
      if (change < opt.tol && res.flux_mismatch < opt.tol * res.total_flux()) {
        res.converged = true;
        break;
      }
    }
  }
  res.iterations = it;
  measure();

  // Flux magnitude per voxel from the average of its two face fluxes per axis.
  for (std::size_t k = 0; k < m; ++k) {
    double sq = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      double lo = 0.0, hi = 0.0;  // signed flux along +a through the low and high faces
      const auto jl = nbr[6 * k + 2 * a], jh = nbr[6 * k + 2 * a + 1];
      if (jl != kNone) lo = conc[jl] - conc[k];
      if (jh != kNone) hi = conc[k] - conc[jh];
      if (a == ax) {
        if (at_inlet[k]) lo = 2.0 * (1.0 - conc[k]);
        if (at_outlet[k]) hi = 2.0 * conc[k];
      }
      const double mean = 0.5 * (lo + hi);
      sq += mean * mean;
    }
    sol.flux.field.values[voxel_of[k]] = static_cast<float>(std::sqrt(sq));
  }
  return sol;
}

// MGF1 layout (little-endian):
//   "MGF1" | u32 version=1 | u32 nx, ny, nz | u32 phase | f64 spacing_nm
//   | nx*ny*nz f32 flux magnitudes, x fastest
inline void write_mgf1(const std::string& path, const FluxField& f) {
  io::ByteWriter w;
  w.magic("MGF1");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(f.field.dims.nx));
  w.u32(static_cast<std::uint32_t>(f.field.dims.ny));
  w.u32(static_cast<std::uint32_t>(f.field.dims.nz));
  w.u32(static_cast<std::uint32_t>(f.phase));
  w.f64(f.spacing_nm);
  for (float v : f.field.values) w.f32(v);
  w.save(path);
}

inline FluxField read_mgf1(const std::string& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic("MGF1");
  const std::size_t version_at = r.offset();
  if (r.u32() != 1) r.fail_at(version_at, "unsupported MGF1 version");
  FluxField f;
  const std::size_t dims_at = r.offset();
  f.field.dims.nx = r.u32();
  f.field.dims.ny = r.u32();
  f.field.dims.nz = r.u32();
  if (f.field.dims.count() == 0) r.fail_at(dims_at, "zero dimension");
  f.phase = r.u32();
  f.spacing_nm = r.f64();
  if (r.remaining() != 4 * f.field.dims.count()) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
           std::to_string(4 * f.field.dims.count()));
  }
  f.field.values.resize(f.field.dims.count());
  for (auto& v : f.field.values) v = r.f32();
  return f;
}

/// Per-z-slice summary of a flux map: slice,sum,mean,max.
inline void write_flux_slices_csv(std::ostream& os, const FluxField& f) {
  const Dims d = f.field.dims;
  os << "slice,sum,mean,max\n";
  for (std::size_t z = 0; z < d.nz; ++z) {
    double sum = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < d.nx * d.ny; ++i) {
      const double v = f.field.values[z * d.nx * d.ny + i];
      sum += v;
      mx = std::max(mx, v);
    }
    os << z << ',' << format_value(sum) << ',' << format_value(sum / static_cast<double>(d.nx * d.ny)) << ','
       << format_value(mx) << '\n';
  }
}

inline void append_transport(MetricReport& report, const TransportResult& r) {
  report.transport.push_back({r.phase, r.direction, r.d_rel, r.tau});
}

}  // namespace microgen
