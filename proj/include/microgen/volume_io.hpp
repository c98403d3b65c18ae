#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "microgen/binary_io.hpp"
#include "microgen/voxel_grid.hpp"

namespace microgen {

// MGV1 layout (little-endian):
//   "MGV1" | u32 version=1 | u32 nx, ny, nz | u32 phase_count | f64 spacing_nm
//   | nx*ny*nz u8 labels, x fastest
inline constexpr std::uint32_t kVolumeFormatVersion = 1;

inline std::vector<std::uint8_t> encode_mgv1(const VoxelGrid& grid) {
  io::ByteWriter w;
  w.magic("MGV1");
  w.u32(kVolumeFormatVersion);
  w.u32(static_cast<std::uint32_t>(grid.nx()));
  w.u32(static_cast<std::uint32_t>(grid.ny()));
  w.u32(static_cast<std::uint32_t>(grid.nz()));
  w.u32(static_cast<std::uint32_t>(grid.phase_count()));
  w.f64(grid.spacing_nm());
  w.raw(grid.labels().data(), grid.size());
  return w.bytes();
}

inline void write_mgv1(const std::string& path, const VoxelGrid& grid) {
  io::ByteWriter w;
  const auto bytes = encode_mgv1(grid);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline VoxelGrid decode_mgv1(io::ByteReader& r) {
  r.expect_magic("MGV1");
  const std::size_t version_at = r.offset();
  if (r.u32() != kVolumeFormatVersion) r.fail_at(version_at, "unsupported MGV1 version");
  Dims dims;
  const std::size_t dims_at = r.offset();
  dims.nx = r.u32();
  dims.ny = r.u32();
  dims.nz = r.u32();
  if (dims.count() == 0) r.fail_at(dims_at, "zero dimension");
  const std::size_t phases_at = r.offset();
  const std::uint32_t phases = r.u32();
  if (phases < 2 || phases > 256) r.fail_at(phases_at, "phase_count out of range");
  const std::size_t spacing_at = r.offset();
  const double spacing = r.f64();
  if (!(spacing > 0.0)) r.fail_at(spacing_at, "spacing must be > 0");
  const std::size_t labels_at = r.offset();
  const std::uint8_t* data = r.raw(dims.count());
  for (std::size_t i = 0; i < dims.count(); ++i) {
    if (data[i] >= phases) r.fail_at(labels_at + i, "label " + std::to_string(data[i]) + " >= phase_count");
  }
  r.expect_end();
  return VoxelGrid(dims, spacing, phases, std::vector<std::uint8_t>(data, data + dims.count()));
}

inline VoxelGrid read_mgv1(const std::string& path) {
  auto r = io::ByteReader::from_file(path);
  return decode_mgv1(r);
}

/// Plain-text fixture import.
///
///   dims=NX,NY,NZ c=PHASES spacing=NM
///   <label>        one per line, x fastest
///
/// Blank lines and lines starting with '#' are skipped.
inline VoxelGrid read_text_volume(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  std::uint64_t offset = 0;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const std::uint64_t at = offset;
      offset += out.size() + 1;
      if (out.empty() || out[0] == '#') continue;
      return at;
    }
    return offset;
  };

  const std::uint64_t header_at = next_line(line);
  Dims dims;
  std::size_t phases = 0;
  double spacing = 0.0;
  {
    std::istringstream hs(line);
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError(path, header_at, "header token '" + tok + "' lacks '='");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "dims") {
          char c1 = 0, c2 = 0;
          std::istringstream ds(val);
          if (!(ds >> dims.nx >> c1 >> dims.ny >> c2 >> dims.nz) || c1 != ',' || c2 != ',') {
            throw FormatError(path, header_at, "dims must be NX,NY,NZ");
          }
        } else if (key == "c") {
          phases = std::stoul(val);
        } else if (key == "spacing") {
          spacing = std::stod(val);
        } else {
          throw FormatError(path, header_at, "unknown header key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw FormatError(path, header_at, "bad value for header key '" + key + "'");
      }
    }
  }
  if (dims.count() == 0 || phases < 2 || phases > 256 || !(spacing > 0.0)) {
    throw FormatError(path, header_at, "header must define dims=, c= (>=2) and spacing= (>0)");
  }

  std::vector<std::uint8_t> labels;
  labels.reserve(dims.count());
  while (labels.size() < dims.count()) {
    const std::uint64_t at = next_line(line);
    if (!in && line.empty()) throw FormatError(path, at, "expected " + std::to_string(dims.count()) + " labels");
    unsigned long v = 0;
    const auto* first = line.data();
    const auto* last = line.data() + line.size();
    while (last > first && (last[-1] == '\r' || last[-1] == ' ')) --last;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || v >= phases) {
      throw FormatError(path, at, "invalid label '" + line + "'");
    }
    labels.push_back(static_cast<std::uint8_t>(v));
    line.clear();
  }
  return VoxelGrid(dims, spacing, phases, std::move(labels));
}

inline void write_text_volume(const std::string& path, const VoxelGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "dims=" << grid.nx() << ',' << grid.ny() << ',' << grid.nz() << " c=" << grid.phase_count()
      << " spacing=" << grid.spacing_nm() << '\n';
  for (auto l : grid.labels()) out << static_cast<unsigned>(l) << '\n';
}

/// Raw u8 greyscale volume (x fastest) mapped through a label table.
inline VoxelGrid read_greyscale_raw(const std::string& path, Dims dims, double spacing_nm,
                                    const LabelTable& table) {
  auto r = io::ByteReader::from_file(path);
  if (r.remaining() != dims.count()) {
    r.fail_at(std::min<std::size_t>(r.remaining(), dims.count()),
              "expected " + std::to_string(dims.count()) + " bytes for dims " + dims.str() + ", file has " +
                  std::to_string(r.remaining()));
  }
  const std::uint8_t* data = r.raw(dims.count());
  std::vector<std::uint8_t> labels(dims.count());
  for (std::size_t i = 0; i < dims.count(); ++i) {
    if (!table.contains(data[i])) r.fail_at(i, "grey value " + std::to_string(data[i]) + " not in label table");
    labels[i] = table.map(data[i]);
  }
  return VoxelGrid(dims, spacing_nm, table.phase_count(), std::move(labels));
}

}  // namespace microgen
