#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/voxel_grid.hpp"

namespace microgen {

/// How neighbours across the outer faces of a volume are treated.
enum class Boundary : std::uint8_t { truncated, periodic };

inline const char* boundary_name(Boundary b) { return b == Boundary::periodic ? "periodic" : "truncated"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "truncated") return Boundary::truncated;
  if (s == "periodic") return Boundary::periodic;
  throw InvalidArgument("unknown boundary mode '" + s + "' (expected truncated or periodic)");
}

namespace detail {
inline void check_phase(const VoxelGrid& grid, std::size_t phase) {
  if (phase >= grid.phase_count()) {
    throw InvalidArgument("phase " + std::to_string(phase) + " out of range for a " +
                          std::to_string(grid.phase_count()) + "-phase grid");
  }
}

inline std::size_t stride_of(const VoxelGrid& g, std::size_t axis) {
  return axis == 0 ? 1 : (axis == 1 ? g.nx() : g.nx() * g.ny());
}
}  // namespace detail

inline std::vector<std::uint64_t> phase_counts(const VoxelGrid& grid) {
  std::vector<std::uint64_t> counts(grid.phase_count(), 0);
  for (auto l : grid.labels()) ++counts[l];
  return counts;
}

inline double volume_fraction(const VoxelGrid& grid, std::size_t phase) {
  detail::check_phase(grid, phase);
  return static_cast<double>(phase_counts(grid)[phase]) / static_cast<double>(grid.size());
}

// ---------------------------------------------------------------------------
// Specific surface area (voxel-face counting)

/// Number of voxel faces separating each phase from any other phase.
inline std::vector<std::uint64_t> interface_face_counts(const VoxelGrid& grid, Boundary boundary) {
  std::vector<std::uint64_t> counts(grid.phase_count(), 0);
  const auto labels = grid.labels();
  const Dims d = grid.dims();
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t n = d[axis];
    const std::size_t step = detail::stride_of(grid, axis);
    const std::size_t faces_per_line = boundary == Boundary::periodic ? n : n - 1;
    for (std::size_t z = 0; z < (axis == 2 ? 1 : d.nz); ++z)
      for (std::size_t y = 0; y < (axis == 1 ? 1 : d.ny); ++y)
        for (std::size_t x = 0; x < (axis == 0 ? 1 : d.nx); ++x) {
          const std::size_t base = grid.index(x, y, z);
          for (std::size_t i = 0; i < faces_per_line; ++i) {
            const std::size_t j = (i + 1) % n;
            const auto a = labels[base + i * step];
            const auto b = labels[base + j * step];
            if (a != b) {
              ++counts[a];
              ++counts[b];
            }
          }
        }
  }
  return counts;
}

/// Interfacial area of `phase` per unit total volume, in 1/um.
inline double specific_surface_area(const VoxelGrid& grid, std::size_t phase, Boundary boundary) {
  detail::check_phase(grid, phase);
  const double faces = static_cast<double>(interface_face_counts(grid, boundary)[phase]);
  return faces / (static_cast<double>(grid.size()) * grid.spacing_um());
}

// ---------------------------------------------------------------------------
// Triple phase boundary

/// Number of lattice edges whose four surrounding voxels hold >= 3 distinct
/// phases, summed over the three edge orientations.
inline std::uint64_t tpb_edge_count(const VoxelGrid& grid, Boundary boundary) {
  if (grid.phase_count() < 3) throw InvalidArgument("TPB density needs at least 3 phases");
  const auto labels = grid.labels();
  const Dims d = grid.dims();
  std::uint64_t edges = 0;
  // Edge parallel to `axis`; the 2x2 window spans the other two axes (u, v).
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t ua = (axis + 1) % 3, va = (axis + 2) % 3;
    const std::size_t nu = d[ua], nv = d[va], na = d[axis];
    const std::size_t su = detail::stride_of(grid, ua), sv = detail::stride_of(grid, va);
    const std::size_t sa = detail::stride_of(grid, axis);
    const std::size_t eu = boundary == Boundary::periodic ? nu : nu - 1;
    const std::size_t ev = boundary == Boundary::periodic ? nv : nv - 1;
    for (std::size_t v = 0; v < ev; ++v) {
      const std::size_t v1 = (v + 1) % nv;
      for (std::size_t u = 0; u < eu; ++u) {
        const std::size_t u1 = (u + 1) % nu;
        for (std::size_t a = 0; a < na; ++a) {
          const std::size_t o = a * sa;
          const auto p0 = labels[o + u * su + v * sv];
          const auto p1 = labels[o + u1 * su + v * sv];
          const auto p2 = labels[o + u * su + v1 * sv];
          const auto p3 = labels[o + u1 * su + v1 * sv];
          int distinct = 1;
          distinct += (p1 != p0);
          distinct += (p2 != p0 && p2 != p1);
          distinct += (p3 != p0 && p3 != p1 && p3 != p2);
          edges += distinct >= 3;
        }
      }
    }
  }
  return edges;
}

/// TPB length per unit volume, in 1/um^2.
inline double tpb_density(const VoxelGrid& grid, Boundary boundary) {
  const double a = grid.spacing_um();
  return static_cast<double>(tpb_edge_count(grid, boundary)) * a / (static_cast<double>(grid.size()) * a * a * a);
}

// ---------------------------------------------------------------------------
// Two-point correlation

struct TpcfCurve {
  std::size_t phase = 0;
  Axis axis = Axis::x;
  Boundary boundary = Boundary::truncated;
  std::vector<double> s2;                  // S2(r), r = 0..r_max
  std::vector<std::uint64_t> pair_counts;  // valid pairs per lag
  std::vector<std::uint64_t> hits;         // pairs with both ends in phase

  std::size_t r_max() const noexcept { return s2.empty() ? 0 : s2.size() - 1; }

  // S2(r) / S2(0); zero when the phase is absent.
  std::vector<double> normalized() const {
    std::vector<double> out(s2.size(), 0.0);
    if (!s2.empty() && s2[0] > 0.0)
      for (std::size_t r = 0; r < s2.size(); ++r) out[r] = s2[r] / s2[0];
    return out;
  }
};

/// Directional S2(r): probability that x and x + r*e_axis both lie in `phase`.
/// Truncated mode only counts in-bounds pairs; periodic mode wraps.
inline TpcfCurve tpcf(const VoxelGrid& grid, std::size_t phase, Axis axis, std::size_t r_max, Boundary boundary) {
  detail::check_phase(grid, phase);
  const std::size_t ax = axis_index(axis);
  const Dims d = grid.dims();
  const std::size_t n = d[ax];
  if (boundary == Boundary::truncated && r_max >= n) {
    throw InvalidArgument("r_max " + std::to_string(r_max) + " must be < axis length " + std::to_string(n));
  }
  const std::size_t step = detail::stride_of(grid, ax);
  const std::size_t lines = grid.size() / n;
  const auto labels = grid.labels();
  const auto p = static_cast<std::uint8_t>(phase);

  TpcfCurve curve;
  curve.phase = phase;
  curve.axis = axis;
  curve.boundary = boundary;
  curve.s2.assign(r_max + 1, 0.0);
  curve.pair_counts.assign(r_max + 1, 0);
  curve.hits.assign(r_max + 1, 0);

  // Collect line start offsets once.
  std::vector<std::size_t> starts;
  starts.reserve(lines);
  for (std::size_t z = 0; z < (ax == 2 ? 1 : d.nz); ++z)
    for (std::size_t y = 0; y < (ax == 1 ? 1 : d.ny); ++y)
      for (std::size_t x = 0; x < (ax == 0 ? 1 : d.nx); ++x) starts.push_back(grid.index(x, y, z));

  std::vector<std::uint8_t> line(n);
  for (const std::size_t base : starts) {
    for (std::size_t i = 0; i < n; ++i) line[i] = labels[base + i * step] == p;
    for (std::size_t r = 0; r <= r_max; ++r) {
      std::uint64_t h = 0;
      if (boundary == Boundary::periodic) {
        for (std::size_t i = 0; i < n; ++i) h += line[i] & line[(i + r) % n];
      } else {
        for (std::size_t i = 0; i + r < n; ++i) h += line[i] & line[i + r];
      }
      curve.hits[r] += h;
    }
  }
  for (std::size_t r = 0; r <= r_max; ++r) {
    const std::uint64_t pairs = boundary == Boundary::periodic ? grid.size() : (n - r) * lines;
    curve.pair_counts[r] = pairs;
    curve.s2[r] = static_cast<double>(curve.hits[r]) / static_cast<double>(pairs);
  }
  return curve;
}

// ---------------------------------------------------------------------------

/// Fractional deviation of each area from the reference maximum mean area.
inline std::vector<double> delta_ssa(std::span<const double> areas, double reference_max_mean) {
  if (!(reference_max_mean > 0.0)) throw InvalidArgument("delta_ssa reference area must be > 0");
  std::vector<double> out;
  out.reserve(areas.size());
  for (double a : areas) out.push_back((a - reference_max_mean) / reference_max_mean);
  return out;
}

struct TransportEntry {
  std::size_t phase = 0;
  Axis axis = Axis::x;
  double d_rel = 0.0;
  double tau = 0.0;
};

/// Per-sample characterization. SSA in 1/um, TPB in 1/um^2.
struct MetricReport {
  Boundary boundary = Boundary::truncated;
  std::vector<double> volume_fraction;
  std::vector<double> ssa;
  std::optional<double> tpb;  // absent for < 3 phases
  std::vector<TransportEntry> transport;
};

inline MetricReport compute_metrics(const VoxelGrid& grid, Boundary boundary) {
  MetricReport rep;
  rep.boundary = boundary;
  const auto counts = phase_counts(grid);
  const auto faces = interface_face_counts(grid, boundary);
  const double n = static_cast<double>(grid.size());
  for (std::size_t p = 0; p < grid.phase_count(); ++p) {
    rep.volume_fraction.push_back(static_cast<double>(counts[p]) / n);
    rep.ssa.push_back(static_cast<double>(faces[p]) / (n * grid.spacing_um()));
  }
  if (grid.phase_count() >= 3) rep.tpb = tpb_density(grid, boundary);
  return rep;
}

/// One scalar of a report, keyed by (metric, phase, axis). phase < 0 and
/// axis == 0 mark "not applicable".
struct MetricValue {
  std::string metric;
  int phase = -1;
  char axis = 0;
  double value = 0.0;
};

inline std::vector<MetricValue> flatten(const MetricReport& r) {
  std::vector<MetricValue> out;
  for (std::size_t p = 0; p < r.volume_fraction.size(); ++p)
    out.push_back({"volume_fraction", static_cast<int>(p), 0, r.volume_fraction[p]});
  for (std::size_t p = 0; p < r.ssa.size(); ++p) out.push_back({"ssa", static_cast<int>(p), 0, r.ssa[p]});
  if (r.tpb) out.push_back({"tpb", -1, 0, *r.tpb});
  for (const auto& t : r.transport) {
    out.push_back({"D_rel", static_cast<int>(t.phase), axis_name(t.axis), t.d_rel});
    out.push_back({"tau", static_cast<int>(t.phase), axis_name(t.axis), t.tau});
  }
  return out;
}

struct MetricStat {
  std::string metric;
  int phase = -1;
  char axis = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // unbiased (n-1); 0 for a single sample
};

/// Sample mean and unbiased standard deviation of every metric across reports.
/// Infinite values (non-percolating tortuosity) propagate into the mean.
inline std::vector<MetricStat> aggregate_stats(std::span<const MetricReport> reports) {
  if (reports.empty()) throw InvalidArgument("aggregate_stats needs at least one report");
  using Key = std::tuple<std::string, int, char>;
  std::map<Key, std::vector<double>> values;
  std::vector<Key> order;
  for (const auto& r : reports) {
    for (const auto& v : flatten(r)) {
      Key k{v.metric, v.phase, v.axis};
      auto [it, inserted] = values.try_emplace(k);
      if (inserted) order.push_back(k);
      it->second.push_back(v.value);
    }
  }
  std::vector<MetricStat> out;
  for (const auto& k : order) {
    const auto& xs = values[k];
    MetricStat s{std::get<0>(k), std::get<1>(k), std::get<2>(k), xs.size(), 0.0, 0.0};
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
      if (std::isnan(s.stddev)) s.stddev = std::numeric_limits<double>::infinity();
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV export. '.' decimal point, 9 significant digits, "inf" for infinities.

inline std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr const char* kMetricsCsvHeader = "sample,phase,metric,axis,value";
inline constexpr const char* kTpcfCsvHeader = "phase,axis,r,S2,S2_norm";

inline void write_metrics_rows(std::ostream& os, const std::string& sample, const MetricReport& r) {
  for (const auto& v : flatten(r)) {
    os << sample << ',' << (v.phase < 0 ? std::string() : std::to_string(v.phase)) << ',' << v.metric << ','
       << (v.axis ? std::string(1, v.axis) : std::string()) << ',' << format_value(v.value) << '\n';
  }
}

inline void write_stats_rows(std::ostream& os, std::span<const MetricStat> stats) {
  os << "phase,metric,axis,count,mean,std\n";
  for (const auto& s : stats) {
    os << (s.phase < 0 ? std::string() : std::to_string(s.phase)) << ',' << s.metric << ','
       << (s.axis ? std::string(1, s.axis) : std::string()) << ',' << s.count << ',' << format_value(s.mean) << ','
       << format_value(s.stddev) << '\n';
  }
}

inline void write_tpcf_rows(std::ostream& os, const TpcfCurve& c) {
  const auto norm = c.normalized();
  for (std::size_t r = 0; r < c.s2.size(); ++r) {
    os << c.phase << ',' << axis_name(c.axis) << ',' << r << ',' << format_value(c.s2[r]) << ','
       << format_value(norm[r]) << '\n';
  }
}

}  // namespace microgen
