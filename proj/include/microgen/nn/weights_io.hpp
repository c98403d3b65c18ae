#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "microgen/binary_io.hpp"
#include "microgen/nn/sequential.hpp"

namespace microgen::nn {

// MGW1 layout (little-endian):
//   "MGW1" | u32 version=1 | u32 layer_count | layer records...
// Layer record:
//   u8 kind (0 conv, 1 transposed conv, 2 batch norm)
//   u32 in_ch, out_ch, kd, kh, kw, stride, pad | u8 pad_mode | u8 has_bias
//   conv / transposed: f32 kernel [small][big][kd][kh][kw], then f32 bias[out_ch] if has_bias
//   batch norm:        f32 gamma[c], beta[c], mean[c], var[c], then f32 eps
//                      (in_ch = out_ch = c, kernel 1x1x1, stride 1, pad 0)
inline constexpr std::uint32_t kWeightFormatVersion = 1;

enum class LayerKind : std::uint8_t { conv = 0, transposed = 1, batchnorm = 2 };

struct LayerRecord {
  LayerKind kind = LayerKind::conv;
  ConvSpec spec{};
  bool has_bias = false;
  std::vector<float> weights;  // kernel, or gamma|beta|mean|var for batch norm
  std::vector<float> bias;
  float eps = 1e-5f;
};

inline std::vector<LayerRecord> to_records(const Sequential<float>& net) {
  std::vector<LayerRecord> out;
  for (const auto& s : net.stages()) {
    LayerRecord r;
    r.kind = s.conv.kind() == ConvKind::conv ? LayerKind::conv : LayerKind::transposed;
    r.spec = s.conv.spec();
    r.has_bias = s.conv.has_bias();
    r.weights = s.conv.weights();
    r.bias = s.conv.bias();
    out.push_back(std::move(r));
    if (s.bn) {
      LayerRecord b;
      b.kind = LayerKind::batchnorm;
      const std::size_t c = s.bn->channels();
      b.spec = ConvSpec{c, c, {1, 1, 1}, 1, 0, PadMode::zero};
      for (const auto* v : {&s.bn->gamma(), &s.bn->beta(), &s.bn->running_mean(), &s.bn->running_var()})
        b.weights.insert(b.weights.end(), v->begin(), v->end());
      b.eps = s.bn->eps();
      out.push_back(std::move(b));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> encode_mgw1(const std::vector<LayerRecord>& layers) {
  io::ByteWriter w;
  w.magic("MGW1");
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    for (std::size_t v : {l.spec.in_channels, l.spec.out_channels, l.spec.kernel[0], l.spec.kernel[1],
                          l.spec.kernel[2], l.spec.stride, l.spec.padding})
      w.u32(static_cast<std::uint32_t>(v));
    w.u8(static_cast<std::uint8_t>(l.spec.pad_mode));
    w.u8(l.has_bias ? 1 : 0);
    for (float v : l.weights) w.f32(v);
    for (float v : l.bias) w.f32(v);
    if (l.kind == LayerKind::batchnorm) w.f32(l.eps);
  }
  return w.bytes();
}

inline std::vector<LayerRecord> decode_mgw1(io::ByteReader& r) {
  r.expect_magic("MGW1");
  const std::size_t version_at = r.offset();
  if (r.u32() != kWeightFormatVersion) r.fail_at(version_at, "unsupported MGW1 version");
  const std::uint32_t count = r.u32();
  std::vector<LayerRecord> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    LayerRecord l;
    const std::uint8_t kind = r.u8();
    if (kind > 2) r.fail_at(at, "unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.spec.in_channels = r.u32();
    l.spec.out_channels = r.u32();
    l.spec.kernel = {r.u32(), r.u32(), r.u32()};
    l.spec.stride = r.u32();
    l.spec.padding = r.u32();
    const std::size_t mode_at = r.offset();
    const std::uint8_t mode = r.u8();
    if (mode > 1) r.fail_at(mode_at, "unknown pad mode " + std::to_string(mode));
    l.spec.pad_mode = static_cast<PadMode>(mode);
    l.has_bias = r.u8() != 0;
    try {
      l.spec.validate();
    } catch (const InvalidArgument& e) {
      r.fail_at(at, std::string("layer ") + std::to_string(i) + ": " + e.what());
    }
    if (l.kind == LayerKind::batchnorm) {
      if (l.spec.in_channels != l.spec.out_channels || l.has_bias) {
        r.fail_at(at, "batch-norm record needs in_ch == out_ch and no bias");
      }
      l.weights.resize(4 * l.spec.out_channels);
      for (auto& v : l.weights) v = r.f32();
      l.eps = r.f32();
      if (!(l.eps > 0.0f)) r.fail("batch-norm epsilon must be > 0");
    } else {
      l.weights.resize(l.spec.in_channels * l.spec.out_channels * l.spec.kernel_volume());
      for (auto& v : l.weights) v = r.f32();
      if (l.has_bias) {
        l.bias.resize(l.spec.out_channels);
        for (auto& v : l.bias) v = r.f32();
      }
    }
    layers.push_back(std::move(l));
  }
  r.expect_end();
  return layers;
}

inline void write_mgw1(const std::string& path, const std::vector<LayerRecord>& layers) {
  io::ByteWriter w;
  const auto bytes = encode_mgw1(layers);
  w.raw(bytes.data(), bytes.size());
  w.save(path);
}

inline std::vector<LayerRecord> read_mgw1(const std::string& path) {
  auto r = io::ByteReader::from_file(path);
  return decode_mgw1(r);
}

/// Networks recovered from a weight file: the transposed-conv chain is the
/// generator (ReLU hidden, channel softmax head), the conv chain the
/// discriminator (leaky ReLU hidden, sigmoid head). Batch-norm records attach
/// to the preceding convolution.
struct NetworkPair {
  std::optional<Sequential<float>> generator;
  std::optional<Sequential<float>> discriminator;
};

inline NetworkPair build_networks(const std::vector<LayerRecord>& layers, float leaky_slope = 0.2f) {
  std::vector<Stage<float>> gen, disc;
  std::vector<Stage<float>>* current = nullptr;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::batchnorm) {
      if (current == nullptr || current->empty() || current->back().bn) {
        throw InvalidArgument("weight layer " + std::to_string(i) + ": batch norm without a preceding convolution");
      }
      auto& prev = current->back();
      const std::size_t c = l.spec.out_channels;
      if (c != prev.conv.spec().out_channels) {
        throw InvalidArgument("weight layer " + std::to_string(i) + ": batch-norm width " + std::to_string(c) +
                              " does not match convolution output " +
                              std::to_string(prev.conv.spec().out_channels));
      }
      BatchNorm<float> bn(c, l.eps);
      std::copy_n(l.weights.begin(), c, bn.gamma().begin());
      std::copy_n(l.weights.begin() + c, c, bn.beta().begin());
      std::copy_n(l.weights.begin() + 2 * c, c, bn.running_mean().begin());
      std::copy_n(l.weights.begin() + 3 * c, c, bn.running_var().begin());
      prev.bn = std::move(bn);
      continue;
    }
    current = l.kind == LayerKind::transposed ? &gen : &disc;
    if (!current->empty() && current->back().conv.spec().out_channels != l.spec.in_channels) {
      throw InvalidArgument("weight layer " + std::to_string(i) + ": input channels do not chain");
    }
    Stage<float> s;
    s.conv = ConvLayer<float>(l.kind == LayerKind::transposed ? ConvKind::transposed : ConvKind::conv, l.spec,
                              l.has_bias);
    s.conv.weights() = l.weights;
    s.conv.bias() = l.bias;
    s.slope = leaky_slope;
    current->push_back(std::move(s));
  }
  auto finish = [](std::vector<Stage<float>>& st, Activation hidden, Activation head) {
    for (std::size_t i = 0; i < st.size(); ++i) st[i].activation = i + 1 == st.size() ? head : hidden;
  };
  finish(gen, Activation::relu, Activation::softmax);
  finish(disc, Activation::leaky_relu, Activation::sigmoid);
  NetworkPair out;
  if (!gen.empty()) out.generator = Sequential<float>(std::move(gen));
  if (!disc.empty()) out.discriminator = Sequential<float>(std::move(disc));
  return out;
}

}  // namespace microgen::nn
