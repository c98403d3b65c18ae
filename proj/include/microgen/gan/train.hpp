#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "microgen/gan/architecture.hpp"
#include "microgen/gan/generate.hpp"
#include "microgen/gan/latent.hpp"
#include "microgen/gan/losses.hpp"
#include "microgen/metrics.hpp"
#include "microgen/nn/adam.hpp"
#include "microgen/voxel_grid.hpp"

namespace microgen::gan {

struct TrainConfig {
  double lr = 2e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double label_smoothing = 0.1;
  std::size_t generator_steps = 2;  // generator updates per discriminator update
  std::size_t batch_size = 32;
  std::size_t max_epochs = 72;
  std::size_t max_cycles = 0;  // when set, overrides max_epochs
  std::size_t snapshot_every_epochs = 2;
  std::uint64_t seed = 0;
  GeneratorLossMode generator_loss = GeneratorLossMode::non_saturating;
  ArchitectureConfig arch = ArchitectureConfig::full();

  void validate() const {
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw InvalidArgument("label smoothing must be in [0, 1)");
    if (generator_steps == 0) throw InvalidArgument("generator steps per cycle must be >= 1");
    if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be > 0");
  }
};

struct LogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double j_d = 0.0;
  double j_g = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

struct Snapshot {
  std::size_t epoch = 0;
  MetricReport metrics;
};

inline void write_training_log(std::ostream& os, const std::vector<LogRow>& rows) {
  os << "step,epoch,J_D,J_G,d_real_mean,d_fake_mean\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.epoch << ',' << format_value(r.j_d) << ',' << format_value(r.j_g) << ','
       << format_value(r.d_real_mean) << ',' << format_value(r.d_fake_mean) << '\n';
  }
}

/// Alternating adversarial training: per cycle one discriminator update on a
/// real batch (smoothed labels) and a fake batch, then `generator_steps`
/// generator updates. Both networks run batch norm in train mode and are
/// optimized with ADAM. Sequential and deterministic for a given seed.
class Trainer {
 public:
  Trainer(std::vector<OneHotGrid> dataset, TrainConfig cfg)
      : cfg_(std::move(cfg)), data_(std::move(dataset)), rng_(cfg_.seed) {
    cfg_.validate();
    if (data_.empty()) throw InvalidArgument("training dataset is empty");
    if (cfg_.batch_size > data_.size()) throw InvalidArgument("batch size exceeds dataset size");
    const auto shape = data_.front().tensor().shape();
    for (const auto& s : data_) {
      if (s.tensor().shape() != shape) throw InvalidArgument("training samples differ in shape");
    }
    if (shape.channels != cfg_.arch.phase_count) throw InvalidArgument("sample phase count does not match architecture");
    gen_ = make_generator<float>(cfg_.arch);
    disc_ = make_discriminator<float>(cfg_.arch);
    init_weights(gen_, cfg_.seed * 2 + 1);
    init_weights(disc_, cfg_.seed * 2 + 2);
    const auto out = gen_.output_shape({cfg_.arch.latent_channels, 1, 1, 1});
    if (out != shape) {
      throw InvalidArgument("generator output " + out.str() + " does not match sample shape " + shape.str());
    }
    const auto d_out = disc_.output_shape(shape);
    if (d_out != nn::Shape4{1, 1, 1, 1}) throw InvalidArgument("discriminator does not reduce samples to a scalar");
    gen_adam_.resize(gen_.parameters().size());
    disc_adam_.resize(disc_.parameters().size());
    order_.resize(data_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  Generator<float>& generator() noexcept { return gen_; }
  Discriminator<float>& discriminator() noexcept { return disc_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  std::size_t discriminator_updates() const noexcept { return d_updates_; }
  std::size_t generator_updates() const noexcept { return g_updates_; }
  std::size_t cycles() const noexcept { return cycles_; }
  std::size_t epoch() const noexcept { return epoch_; }
  const std::vector<LogRow>& history() const noexcept { return history_; }
  const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }

  std::size_t cycles_per_epoch() const { return std::max<std::size_t>(1, data_.size() / cfg_.batch_size); }

  nn::Batch<float> sample_latents() {
    nn::Batch<float> zs;
    for (std::size_t i = 0; i < cfg_.batch_size; ++i) zs.push_back(sample_latent(rng_(), 1, cfg_.arch.latent_channels));
    return zs;
  }

  nn::Batch<float> next_real_batch() {
    nn::Batch<float> b;
    for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      b.push_back(data_[order_[cursor_++]].tensor());
    }
    return b;
  }

  struct DStep {
    double j_d;
    double d_real_mean;
    double d_fake_mean;
  };

  /// One discriminator update against the given fake batch.
  DStep discriminator_step(const nn::Batch<float>& real, const nn::Batch<float>& fake) {
    const float eps = static_cast<float>(cfg_.label_smoothing);
    disc_.zero_grad();
    const auto p_real = probabilities(disc_.forward_train(real));
    disc_.backward(as_batch(discriminator_loss_grad<float>(p_real, p_real, eps).real));
    const auto p_fake = probabilities(disc_.forward_train(fake));
    disc_.backward(as_batch(discriminator_loss_grad<float>(p_real, p_fake, eps).fake));
    step(disc_, disc_adam_);
    ++d_updates_;
    return {discriminator_objective<float>(p_real, p_fake, eps), mean(p_real), mean(p_fake)};
  }

  /// One generator update through a frozen discriminator; returns the generator loss.
  double generator_step() {
    const auto zs = sample_latents();
    const auto fake = gen_.forward_train(zs);
    const auto p = probabilities(disc_.forward_train(fake));
    const auto g = generator_loss_grad<float>(p, cfg_.generator_loss);
    const auto grad_fake = disc_.backward(as_batch(g));
    disc_.zero_grad();
    gen_.zero_grad();
    gen_.backward(grad_fake);
    step(gen_, gen_adam_);
    ++g_updates_;
    return generator_loss<float>(p, cfg_.generator_loss);
  }

  /// One full cycle; appends a log row.
  LogRow cycle() {
    const auto real = next_real_batch();
    const auto fake = gen_.forward_train(sample_latents());
    const auto d = discriminator_step(real, fake);
    double jg = 0.0;
    for (std::size_t i = 0; i < cfg_.generator_steps; ++i) jg = generator_step();
    ++cycles_;
    const std::size_t new_epoch = cycles_ / cycles_per_epoch();
    if (new_epoch != epoch_) {
      epoch_ = new_epoch;
      if (cfg_.snapshot_every_epochs && epoch_ % cfg_.snapshot_every_epochs == 0) take_snapshot();
    }
    LogRow row{cycles_, epoch_, d.j_d, jg, d.d_real_mean, d.d_fake_mean};
    history_.push_back(row);
    return row;
  }

  void run(const std::function<void(const LogRow&)>& on_row = {}) {
    const std::size_t total = cfg_.max_cycles ? cfg_.max_cycles : cfg_.max_epochs * cycles_per_epoch();
    while (cycles_ < total) {
      const auto row = cycle();
      if (on_row) on_row(row);
    }
    gen_.clear_cache();
    disc_.clear_cache();
  }

 private:
  static std::vector<float> probabilities(const nn::Batch<float>& out) {
    std::vector<float> p;
    p.reserve(out.size());
    for (const auto& t : out) p.push_back(t[0]);
    return p;
  }

  static nn::Batch<float> as_batch(const std::vector<float>& g) {
    nn::Batch<float> b;
    for (float v : g) b.push_back(nn::Tensor4<float>(1, 1, 1, 1, v));
    return b;
  }

  static double mean(const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  void step(nn::Sequential<float>& net, std::vector<nn::AdamState<float>>& states) {
    const nn::AdamConfig ac{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps};
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::adam_step<float>(params[i].value, params[i].grad, states[i], ac);
    }
  }

  void take_snapshot() {
    const auto g = generate(gen_, sample_latent(rng_(), 1, cfg_.arch.latent_channels));
    snapshots_.push_back({epoch_, compute_metrics(g.labels, Boundary::truncated)});
  }

  TrainConfig cfg_;
  std::vector<OneHotGrid> data_;
  std::mt19937_64 rng_;
  Generator<float> gen_;
  Discriminator<float> disc_;
  std::vector<nn::AdamState<float>> gen_adam_, disc_adam_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t d_updates_ = 0, g_updates_ = 0, cycles_ = 0, epoch_ = 0;
  std::vector<LogRow> history_;
  std::vector<Snapshot> snapshots_;
};

struct TrainResult {
  Generator<float> generator;
  Discriminator<float> discriminator;
  std::vector<LogRow> history;
  std::vector<Snapshot> snapshots;
  std::size_t discriminator_updates = 0;
  std::size_t generator_updates = 0;
};

inline TrainResult train(std::vector<OneHotGrid> dataset, const TrainConfig& cfg,
                         const std::function<void(const LogRow&)>& on_row = {}) {
  Trainer t(std::move(dataset), cfg);
  t.run(on_row);
  return {t.generator(), t.discriminator(), t.history(), t.snapshots(), t.discriminator_updates(),
          t.generator_updates()};
}

/// Synthetic three-phase stripe volumes along x: each sample repeats the slab
/// pattern [0, 0, 1, 2] with a random phase offset.
inline std::vector<OneHotGrid> stripe_dataset(std::size_t count, std::size_t edge, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  static constexpr std::uint8_t kPattern[4] = {0, 0, 1, 2};
  std::vector<OneHotGrid> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t shift = rng() % 4;
    VoxelGrid g({edge, edge, edge}, kDefaultSpacingNm, 3);
    for (std::size_t z = 0; z < edge; ++z)
      for (std::size_t y = 0; y < edge; ++y)
        for (std::size_t x = 0; x < edge; ++x) g.set(x, y, z, kPattern[(x + shift) % 4]);
    out.push_back(one_hot_encode(g));
  }
  return out;
}

}  // namespace microgen::gan
