#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "microgen/gan/evaluate.hpp"
#include "microgen/gan/train.hpp"
#include "oracles.hpp"

using namespace microgen;
using namespace microgen::gan;

namespace {

double max_abs_diff(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

LatentField tile_latent(const LatentField& z, std::size_t rz, std::size_t ry, std::size_t rx) {
  return nn::tile_spatial(z, rz, ry, rx);
}

TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig c;
  c.arch = ArchitectureConfig::toy();
  c.batch_size = 4;
  c.lr = 2e-4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Architecture, ShapeAudit) {
  const auto cfg = ArchitectureConfig::full();
  const auto g = make_generator<float>(cfg);
  const auto d = make_discriminator<float>(cfg);
  EXPECT_EQ(g.output_shape({100, 1, 1, 1}), (nn::Shape4{3, 64, 64, 64}));
  EXPECT_EQ(d.output_shape({3, 64, 64, 64}), (nn::Shape4{1, 1, 1, 1}));

  nn::Shape4 s{100, 1, 1, 1};
  const std::size_t g_edges[] = {4, 8, 16, 32, 64}, g_ch[] = {512, 256, 128, 64, 3};
  for (std::size_t i = 0; i < 5; ++i) {
    s = g.stages()[i].conv.output_shape(s);
    EXPECT_EQ(s, (nn::Shape4{g_ch[i], g_edges[i], g_edges[i], g_edges[i]}));
    EXPECT_EQ(g.stages()[i].bn.has_value(), i < 4);
    EXPECT_EQ(g.stages()[i].conv.spec().stride, i == 0 ? 1u : 2u);
  }
  s = {3, 64, 64, 64};
  const std::size_t d_edges[] = {32, 16, 8, 4, 1}, d_ch[] = {16, 32, 64, 128, 1};
  for (std::size_t i = 0; i < 5; ++i) {
    s = d.stages()[i].conv.output_shape(s);
    EXPECT_EQ(s, (nn::Shape4{d_ch[i], d_edges[i], d_edges[i], d_edges[i]}));
    EXPECT_EQ(d.stages()[i].bn.has_value(), i < 4);
  }
  EXPECT_EQ(g.stages().back().activation, nn::Activation::softmax);
  EXPECT_EQ(d.stages().back().activation, nn::Activation::sigmoid);
  EXPECT_EQ(d.stages()[0].activation, nn::Activation::leaky_relu);
}

TEST(Architecture, SizeChains) {
  const auto cfg = ArchitectureConfig::full();
  const std::size_t expect[] = {64, 80, 96, 112, 128};
  const auto g = make_generator<float>(cfg);
  for (std::size_t a = 1; a <= 5; ++a) {
    EXPECT_EQ(generated_edge(cfg, a), expect[a - 1]);
    EXPECT_EQ(generated_edge(cfg, a), 64 + (a - 1) * 16);
    EXPECT_EQ(g.output_shape({100, a, a, a}).depth, expect[a - 1]);
    EXPECT_EQ(periodic_edge(cfg, a), 16 * a);
    EXPECT_EQ(make_periodic(g).output_shape({100, a, a, a}).width, 16 * a);
  }
  EXPECT_EQ(ArchitectureConfig::toy().base_edge(), 8u);
  EXPECT_EQ(cfg.base_edge(), 64u);
}

TEST(Architecture, InitStatistics) {
  auto g = make_generator<float>(ArchitectureConfig::full());
  init_weights(g, 3);
  double sum = 0, sq = 0;
  const auto& w = g.stages()[2].conv.weights();
  for (float v : w) sum += v, sq += static_cast<double>(v) * v;
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(sum / n, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(sq / n), 0.02, 1e-3);
  for (float b : g.stages()[0].bn->beta()) EXPECT_EQ(b, 0.0f);
  for (float v : g.stages()[0].bn->gamma()) EXPECT_NEAR(v, 1.0f, 0.15f);
  EXPECT_EQ(g.parameter_count(), 100u * 512 * 64 + 512 * 256 * 64 + 256 * 128 * 64 + 128 * 64 * 64 + 64 * 3 * 64 + 3 +
                                     2 * (512 + 256 + 128 + 64));
}

TEST(Latent, ShapeDeterminismStatistics) {
  const auto z = sample_latent(7, 1);
  EXPECT_EQ(z.shape(), (nn::Shape4{100, 1, 1, 1}));
  EXPECT_EQ(sample_latent(7, 2).shape(), (nn::Shape4{100, 2, 2, 2}));
  const auto a = sample_latent(11, 3), b = sample_latent(11, 3);
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  EXPECT_GT(max_abs_diff(a, sample_latent(12, 3)), 0.0);
  const auto big = sample_latent(5, 10, 10, 10, 100);
  double m = 0, v = 0;
  for (float x : big.data()) m += x;
  m /= 1e5;
  for (float x : big.data()) v += (x - m) * (x - m);
  v /= 1e5;
  EXPECT_NEAR(m, 0.0, 0.02);
  EXPECT_NEAR(v, 1.0, 0.05);
  EXPECT_THROW(sample_latent(1, 0), InvalidArgument);
}

TEST(Latent, Interpolation) {
  const auto s = sample_latent(1, 2), e = sample_latent(2, 2);
  EXPECT_EQ(max_abs_diff(interpolate_latent(s, e, 1.0), s), 0.0);
  EXPECT_EQ(max_abs_diff(interpolate_latent(s, e, 0.0), e), 0.0);
  LatentField neg = s;
  for (auto& v : neg.data()) v = -v;
  const auto mid = interpolate_latent(s, neg, 0.5);
  for (float v : mid.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(interpolate_latent(s, e, 1.5), InvalidArgument);
  EXPECT_THROW(interpolate_latent(s, sample_latent(3, 1), 0.5), InvalidArgument);
}

TEST(Losses, Identities) {
  const std::vector<float> half{0.5f, 0.5f};
  EXPECT_NEAR(discriminator_objective<float>(half, half, 0.0f), -1.3863, 1e-4);
  EXPECT_NEAR(generator_loss<float>(half), 0.6931, 1e-4);
  const std::vector<double> r{0.9}, f{0.1};
  // Hand substitution of the smoothed objective at d_real = 0.9, d_fake = 0.1.
  const double smoothed = 0.9 * std::log(0.9) + 0.1 * std::log(0.1) + std::log(0.9);
  EXPECT_NEAR(discriminator_objective<double>(r, f, 0.1), smoothed, 1e-12);
  EXPECT_NEAR(smoothed, -0.43044, 1e-5);
  const std::vector<double> one{1.0}, zero{0.0};
  EXPECT_NEAR(discriminator_objective<double>(one, zero, 0.0), 0.0, 1e-6);
  EXPECT_NEAR(generator_loss<double>(one), 0.0, 1e-6);
  EXPECT_TRUE(std::isfinite(generator_loss<double>(zero)));
  EXPECT_NEAR(generator_loss<double>(std::vector<double>{0.5}, GeneratorLossMode::saturating), std::log(0.5), 1e-12);
  EXPECT_THROW(generator_loss<double>(std::vector<double>{}), InvalidArgument);
}

TEST(Generate, UniformForZeroWeights) {
  const auto g = make_generator<float>(ArchitectureConfig::toy());
  const auto out = generate(g, sample_latent(1, 1));
  for (float v : out.soft.tensor().data()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-6f);
  EXPECT_EQ(volume_fraction(out.labels, 0), 1.0);
  EXPECT_EQ(out.labels.spacing_nm(), kDefaultSpacingNm);
  EXPECT_THROW(generate(g, sample_latent(1, 1, 1, 1, 50)), InvalidArgument);
}

TEST(Generate, SoftmaxHeadNormalized) {
  auto g = make_generator<float>(ArchitectureConfig::full());
  init_weights(g, 5);
  const auto out = generate(g, sample_latent(3, 1));
  EXPECT_EQ(out.soft.tensor().shape(), (nn::Shape4{3, 64, 64, 64}));
  EXPECT_LE(out.soft.max_normalization_error(), 1e-6);
  EXPECT_TRUE(out.soft.tensor().all_finite());
}

TEST(Generate, PeriodicTilingEquivariance) {
  for (const auto& cfg : {ArchitectureConfig::toy(), ArchitectureConfig::full()}) {
    auto g = make_generator<float>(cfg);
    init_weights(g, 9);
    for (std::size_t alpha : {1u, 2u}) {
      const auto z = sample_latent(100 + alpha, alpha, cfg.latent_channels);
      const auto base = generate_periodic(g, z).soft.tensor();
      EXPECT_EQ(base.depth(), periodic_edge(cfg, alpha));
      for (const auto& reps : {std::array<std::size_t, 3>{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}) {
        const auto big = generate_periodic(g, tile_latent(z, reps[0], reps[1], reps[2])).soft.tensor();
        EXPECT_LE(max_abs_diff(big, nn::tile_spatial(base, reps[0], reps[1], reps[2])), 1e-5);
      }
    }
  }
}

TEST(Generate, PeriodicMetricsOnTiledVolume) {
  auto g = make_generator<float>(ArchitectureConfig::full());
  init_weights(g, 4);
  const auto v = generate_periodic(g, sample_latent(8, 1)).labels;
  const auto t = tile(v, {2, 2, 2});
  const auto fa = interface_face_counts(v, Boundary::periodic), fb = interface_face_counts(t, Boundary::periodic);
  for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(fb[p], 8 * fa[p]);
  EXPECT_EQ(tpb_edge_count(t, Boundary::periodic), 8 * tpb_edge_count(v, Boundary::periodic));
  for (std::size_t p = 0; p < 3; ++p)
    EXPECT_DOUBLE_EQ(specific_surface_area(v, p, Boundary::periodic), specific_surface_area(t, p, Boundary::periodic));
}

TEST(Generate, Deterministic) {
  auto g = make_generator<float>(ArchitectureConfig::toy());
  init_weights(g, 2);
  const auto a = generate(g, sample_latent(7, 2)), b = generate(g, sample_latent(7, 2));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(max_abs_diff(a.soft.tensor(), b.soft.tensor()), 0.0);
}

TEST(Evaluate, SingleSampleAndZeroGenerator) {
  const auto g = make_generator<float>(ArchitectureConfig::toy());
  EvalConfig cfg;
  cfg.samples = 1;
  cfg.transport = true;
  const auto ev = evaluate_samples(g, cfg);
  ASSERT_EQ(ev.reports.size(), 1u);
  for (const auto& s : ev.stats) EXPECT_EQ(s.stddev, 0.0);
  EXPECT_EQ(ev.reports[0].volume_fraction, (std::vector<double>{1.0, 0.0, 0.0}));
  cfg.samples = 0;
  EXPECT_THROW(evaluate_samples(g, cfg), InvalidArgument);
}

TEST(Training, RejectsBadInputs) {
  auto cfg = toy_config(1);
  EXPECT_THROW(Trainer({}, cfg), InvalidArgument);
  EXPECT_THROW(Trainer(stripe_dataset(2, 8, 1), cfg), InvalidArgument);  // batch > dataset
  EXPECT_THROW(Trainer(stripe_dataset(8, 16, 1), cfg), InvalidArgument);  // wrong sample size
  auto mixed = stripe_dataset(4, 8, 1);
  mixed.push_back(one_hot_encode(VoxelGrid({8, 8, 4}, 1.0, 3)));
  EXPECT_THROW(Trainer(mixed, cfg), InvalidArgument);
  cfg.generator_steps = 0;
  EXPECT_THROW(Trainer(stripe_dataset(8, 8, 1), cfg), InvalidArgument);
  cfg = toy_config(1);
  cfg.label_smoothing = 1.0;
  EXPECT_THROW(Trainer(stripe_dataset(8, 8, 1), cfg), InvalidArgument);
}

TEST(Training, UpdateCountersAndDeterminism) {
  auto cfg = toy_config(3);
  cfg.max_cycles = 12;
  const auto data = stripe_dataset(16, 8, 2);
  Trainer a(data, cfg), b(data, cfg);
  a.run();
  b.run();
  EXPECT_EQ(a.discriminator_updates(), 12u);
  EXPECT_EQ(a.generator_updates(), 24u);
  ASSERT_EQ(a.history().size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(a.history()[i].j_d, b.history()[i].j_d);
    EXPECT_EQ(a.history()[i].j_g, b.history()[i].j_g);
  }
  // 16 samples / batch 4: 4 cycles per epoch, so 3 epochs and one snapshot (epoch 2)
  EXPECT_EQ(a.epoch(), 3u);
  ASSERT_EQ(a.snapshots().size(), 1u);
  EXPECT_EQ(a.snapshots()[0].epoch, 2u);

  cfg.generator_steps = 3;
  cfg.max_cycles = 2;
  Trainer c(data, cfg);
  c.run();
  EXPECT_EQ(c.generator_updates(), 6u);

  cfg.max_cycles = 0;
  cfg.max_epochs = 2;
  Trainer e(data, cfg);
  e.run();
  EXPECT_EQ(e.cycles(), 8u);
}

TEST(Training, DiscriminatorSeparatesFrozenFakes) {
  auto cfg = toy_config(4);
  cfg.batch_size = 8;
  cfg.lr = 2e-4;
  Trainer t(stripe_dataset(32, 8, 5), cfg);
  const auto fake = t.generator().forward_train(t.sample_latents(), false);
  Trainer::DStep last{};
  for (int i = 0; i < 200; ++i) last = t.discriminator_step(t.next_real_batch(), fake);
  EXPECT_GT(last.d_real_mean, 0.8);
  EXPECT_LT(last.d_fake_mean, 0.2);
  EXPECT_EQ(t.generator_updates(), 0u);
}

TEST(Training, LogCsv) {
  std::ostringstream os;
  write_training_log(os, {{1, 0, -1.25, 0.5, 0.6, 0.4}});
  EXPECT_EQ(os.str(), "step,epoch,J_D,J_G,d_real_mean,d_fake_mean\n1,0,-1.25,0.5,0.6,0.4\n");
}

TEST(Training, StripeDataset) {
  const auto d = stripe_dataset(10, 8, 3);
  ASSERT_EQ(d.size(), 10u);
  for (const auto& s : d) {
    const auto g = decode(s);
    EXPECT_EQ(volume_fraction(g, 0), 0.5);
    EXPECT_EQ(volume_fraction(g, 1), 0.25);
    EXPECT_EQ(volume_fraction(g, 2), 0.25);
  }
}

TEST(Training, InterpolationIsSmooth) {
  auto cfg = toy_config(6);
  cfg.max_cycles = 40;
  const auto res = train(stripe_dataset(16, 8, 7), cfg);
  const auto changes = interpolation_step_changes(res.generator, sample_latent(1, 1), sample_latent(2, 1), 20);
  ASSERT_EQ(changes.size(), 20u);
  auto sorted = changes;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[9] + sorted[10]);
  EXPECT_GT(median, 0.0);
  for (double c : changes) EXPECT_LE(c, 5 * median);
}
