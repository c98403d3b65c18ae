#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "microgen/error.hpp"
#include "microgen/nn/tensor.hpp"

namespace microgen {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const noexcept { return nx * ny * nz; }
  std::size_t operator[](std::size_t axis) const noexcept {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend bool operator==(const Dims&, const Dims&) = default;

  std::string str() const {
    return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
  }
};

enum class Axis : std::uint8_t { x = 0, y = 1, z = 2 };

inline std::size_t axis_index(Axis a) noexcept { return static_cast<std::size_t>(a); }
inline char axis_name(Axis a) noexcept { return "xyz"[axis_index(a)]; }

inline Axis parse_axis(const std::string& s) {
  if (s == "x" || s == "X") return Axis::x;
  if (s == "y" || s == "Y") return Axis::y;
  if (s == "z" || s == "Z") return Axis::z;
  throw InvalidArgument("unknown axis '" + s + "' (expected x, y or z)");
}

/// Phase-labelled voxel microstructure.
///
/// Labels are stored x-fastest: index = x + nx * (y + ny * z). Spacing is the
/// voxel edge length in nanometres.
class VoxelGrid {
 public:
  VoxelGrid() = default;

  VoxelGrid(Dims dims, double spacing_nm, std::size_t phase_count, std::vector<std::uint8_t> labels)
      : dims_(dims), spacing_nm_(spacing_nm), phase_count_(phase_count), labels_(std::move(labels)) {
    validate();
  }

  // Uniform grid filled with one phase.
  VoxelGrid(Dims dims, double spacing_nm, std::size_t phase_count, std::uint8_t fill = 0)
      : VoxelGrid(dims, spacing_nm, phase_count, std::vector<std::uint8_t>(dims.count(), fill)) {}

  const Dims& dims() const noexcept { return dims_; }
  std::size_t nx() const noexcept { return dims_.nx; }
  std::size_t ny() const noexcept { return dims_.ny; }
  std::size_t nz() const noexcept { return dims_.nz; }
  std::size_t size() const noexcept { return labels_.size(); }
  double spacing_nm() const noexcept { return spacing_nm_; }
  double spacing_um() const noexcept { return spacing_nm_ * 1e-3; }
  std::size_t phase_count() const noexcept { return phase_count_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return labels_[index(x, y, z)];
  }
  std::uint8_t operator[](std::size_t i) const noexcept { return labels_[i]; }

  void set(std::size_t x, std::size_t y, std::size_t z, std::uint8_t label) {
    if (label >= phase_count_) {
      throw InvalidArgument("label " + std::to_string(label) + " >= phase_count " +
                            std::to_string(phase_count_));
    }
    labels_[index(x, y, z)] = label;
  }

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  void validate() const {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0) {
      throw InvalidArgument("grid dims must be >= 1, got " + dims_.str());
    }
    if (!(spacing_nm_ > 0.0)) throw InvalidArgument("voxel spacing must be > 0");
    if (phase_count_ < 2 || phase_count_ > 256) {
      throw InvalidArgument("phase_count must be in [2, 256], got " + std::to_string(phase_count_));
    }
    if (labels_.size() != dims_.count()) {
      throw InvalidArgument("label storage holds " + std::to_string(labels_.size()) +
                            " values, dims " + dims_.str() + " need " +
                            std::to_string(dims_.count()));
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] >= phase_count_) {
        throw InvalidArgument("label " + std::to_string(labels_[i]) + " at voxel " +
                              std::to_string(i) + " >= phase_count " + std::to_string(phase_count_));
      }
    }
  }

  Dims dims_{};
  double spacing_nm_ = 1.0;
  std::size_t phase_count_ = 2;
  std::vector<std::uint8_t> labels_;
};

/// c-channel soft or hard phase encoding, held as a (c, nz, ny, nx) tensor.
class OneHotGrid {
 public:
  OneHotGrid() = default;
  explicit OneHotGrid(nn::Tensor4<float> values) : values_(std::move(values)) {
    if (values_.channels() < 2) throw InvalidArgument("one-hot grid needs >= 2 channels");
  }

  std::size_t phase_count() const noexcept { return values_.channels(); }
  Dims dims() const noexcept { return {values_.width(), values_.height(), values_.depth()}; }
  float at(std::size_t phase, std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return values_(phase, z, y, x);
  }
  const nn::Tensor4<float>& tensor() const noexcept { return values_; }
  nn::Tensor4<float>& tensor() noexcept { return values_; }

  // Largest deviation of a per-voxel channel sum from 1.
  double max_normalization_error() const {
    const std::size_t n = values_.spatial_size();
    double worst = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (std::size_t c = 0; c < phase_count(); ++c) s += values_.channel(c)[v];
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

 private:
  nn::Tensor4<float> values_;
};

// Per-voxel real values on a voxel lattice, x-fastest.
struct ScalarField {
  Dims dims;
  std::vector<float> values;

  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return values[x + dims.nx * (y + dims.ny * z)];
  }
};

inline OneHotGrid one_hot_encode(const VoxelGrid& grid) {
  const std::size_t c = grid.phase_count();
  nn::Tensor4<float> t(c, grid.nz(), grid.ny(), grid.nx(), 0.0f);
  const std::size_t n = grid.size();
  for (std::size_t v = 0; v < n; ++v) t[grid[v] * n + v] = 1.0f;
  return OneHotGrid(std::move(t));
}

/// Argmax over channels; ties resolve to the lowest channel index.
inline VoxelGrid decode(const OneHotGrid& oh, double spacing_nm = 1.0) {
  const auto& t = oh.tensor();
  const std::size_t n = t.spatial_size();
  std::vector<std::uint8_t> labels(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    float best = t[v];
    std::uint8_t arg = 0;
    for (std::size_t c = 1; c < oh.phase_count(); ++c) {
      const float val = t[c * n + v];
      if (val > best) {
        best = val;
        arg = static_cast<std::uint8_t>(c);
      }
    }
    labels[v] = arg;
  }
  return VoxelGrid(oh.dims(), spacing_nm, oh.phase_count(), std::move(labels));
}

/// Per-voxel maximum channel value, in [1/c, 1] for normalized input.
/// Rendered as greyscale, 1 (white) is a certain voxel and 1/c (black) the
/// least certain.
inline ScalarField confidence_map(const OneHotGrid& oh) {
  const auto& t = oh.tensor();
  const std::size_t n = t.spatial_size();
  ScalarField out{oh.dims(), std::vector<float>(n)};
  for (std::size_t v = 0; v < n; ++v) {
    float best = t[v];
    for (std::size_t c = 1; c < oh.phase_count(); ++c) best = std::max(best, t[c * n + v]);
    out.values[v] = best;
  }
  return out;
}

struct SubvolumeSpec {
  std::size_t size = 64;
  std::size_t stride = 8;
};

struct Origin {
  std::size_t x = 0, y = 0, z = 0;
  friend bool operator==(const Origin&, const Origin&) = default;
};

inline std::size_t windows_per_axis(std::size_t n, const SubvolumeSpec& spec) {
  return (n - spec.size) / spec.stride + 1;
}

inline void check_subvolume_spec(const Dims& dims, const SubvolumeSpec& spec) {
  if (spec.size == 0 || spec.stride == 0) {
    throw InvalidArgument("sub-volume size and stride must be >= 1");
  }
  if (spec.size > dims.nx || spec.size > dims.ny || spec.size > dims.nz) {
    throw InvalidArgument("sub-volume size " + std::to_string(spec.size) +
                          " exceeds grid dims " + dims.str());
  }
}

inline std::size_t subvolume_count(const Dims& dims, const SubvolumeSpec& spec) {
  check_subvolume_spec(dims, spec);
  return windows_per_axis(dims.nx, spec) * windows_per_axis(dims.ny, spec) *
         windows_per_axis(dims.nz, spec);
}

// Window origins in row-major order (x fastest). Partial windows are dropped.
inline std::vector<Origin> subvolume_origins(const Dims& dims, const SubvolumeSpec& spec) {
  check_subvolume_spec(dims, spec);
  std::vector<Origin> out;
  out.reserve(subvolume_count(dims, spec));
  for (std::size_t z = 0; z + spec.size <= dims.nz; z += spec.stride)
    for (std::size_t y = 0; y + spec.size <= dims.ny; y += spec.stride)
      for (std::size_t x = 0; x + spec.size <= dims.nx; x += spec.stride) out.push_back({x, y, z});
  return out;
}

inline VoxelGrid crop(const VoxelGrid& grid, const Origin& o, Dims size) {
  if (o.x + size.nx > grid.nx() || o.y + size.ny > grid.ny() || o.z + size.nz > grid.nz()) {
    throw InvalidArgument("crop window exceeds grid dims " + grid.dims().str());
  }
  std::vector<std::uint8_t> labels(size.count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < size.nz; ++z)
    for (std::size_t y = 0; y < size.ny; ++y)
      for (std::size_t x = 0; x < size.nx; ++x) labels[i++] = grid.at(o.x + x, o.y + y, o.z + z);
  return VoxelGrid(size, grid.spacing_nm(), grid.phase_count(), std::move(labels));
}

inline std::vector<VoxelGrid> extract_subvolumes(const VoxelGrid& grid, const SubvolumeSpec& spec) {
  std::vector<VoxelGrid> out;
  for (const auto& o : subvolume_origins(grid.dims(), spec)) {
    out.push_back(crop(grid, o, {spec.size, spec.size, spec.size}));
  }
  return out;
}

inline VoxelGrid tile(const VoxelGrid& grid, std::array<std::size_t, 3> reps) {
  if (reps[0] == 0 || reps[1] == 0 || reps[2] == 0) throw InvalidArgument("tile reps must be >= 1");
  const Dims out_dims{grid.nx() * reps[0], grid.ny() * reps[1], grid.nz() * reps[2]};
  std::vector<std::uint8_t> labels(out_dims.count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < out_dims.nz; ++z)
    for (std::size_t y = 0; y < out_dims.ny; ++y)
      for (std::size_t x = 0; x < out_dims.nx; ++x)
        labels[i++] = grid.at(x % grid.nx(), y % grid.ny(), z % grid.nz());
  return VoxelGrid(out_dims, grid.spacing_nm(), grid.phase_count(), std::move(labels));
}

/// Greyscale value -> phase mapping used when importing segmented images.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::map<std::uint8_t, std::uint8_t> mapping) : mapping_(std::move(mapping)) {}

  // 0 -> 0, 127 -> 1, 255 -> 2: the usual three-phase segmented export.
  static LabelTable three_phase_default() { return LabelTable({{0, 0}, {127, 1}, {255, 2}}); }

  // Parses "grey:phase,grey:phase,...".
  static LabelTable parse(const std::string& text) {
    std::map<std::uint8_t, std::uint8_t> m;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string::npos) end = text.size();
      const std::string item = text.substr(pos, end - pos);
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw InvalidArgument("label table entry '" + item + "' lacks ':'");
      const int grey = std::stoi(item.substr(0, colon));
      const int phase = std::stoi(item.substr(colon + 1));
      if (grey < 0 || grey > 255 || phase < 0 || phase > 255) {
        throw InvalidArgument("label table entry '" + item + "' out of range");
      }
      m[static_cast<std::uint8_t>(grey)] = static_cast<std::uint8_t>(phase);
      pos = end + 1;
    }
    return LabelTable(std::move(m));
  }

  std::size_t phase_count() const {
    std::size_t c = 0;
    for (const auto& [g, p] : mapping_) c = std::max<std::size_t>(c, p + 1u);
    return c;
  }

  bool contains(std::uint8_t grey) const { return mapping_.count(grey) != 0; }
  std::uint8_t map(std::uint8_t grey) const {
    const auto it = mapping_.find(grey);
    if (it == mapping_.end()) throw InvalidArgument("grey value " + std::to_string(grey) + " not in label table");
    return it->second;
  }

 private:
  std::map<std::uint8_t, std::uint8_t> mapping_;
};

}  // namespace microgen
