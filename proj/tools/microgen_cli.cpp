#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "microgen/microgen.hpp"

using namespace microgen;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Desk-scale defaults for train-toy; see README.
constexpr double kToyLr = 2e-3;
constexpr std::size_t kToyCycles = 500;
constexpr std::size_t kToyBatch = 16;
constexpr std::size_t kToyDataset = 64;

std::vector<std::string> g_argv;

struct Manifest {
  explicit Manifest(std::string cmd, std::vector<std::string> in = {})
      : command(std::move(cmd)), inputs(std::move(in)) {}

  std::string command;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::string output;

  void write(const fs::path& where) const {
    json j;
    j["tool"] = "microgen";
    j["version"] = MICROGEN_VERSION;
    j["command"] = command;
    j["argv"] = g_argv;
    j["inputs"] = inputs;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["config"] = config;
    j["output"] = output;
    j["threads"] = thread_count();
    std::ofstream os(where);
    if (!os) throw IoError("cannot write manifest " + where.string());
    os << j.dump(2) << '\n';
  }
};

// Manifests sit next to file outputs and inside directory outputs.
fs::path manifest_path_for(const std::string& output, bool is_dir) {
  if (is_dir) return fs::path(output) / "manifest.json";
  return fs::path(output + ".manifest.json");
}

void announce_seed(const char* name, std::uint64_t value, bool defaulted) {
  std::cout << name << " = " << value << (defaulted ? " (default)" : "") << '\n';
}

VoxelGrid load_volume(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".txt") return read_text_volume(path);
  return read_mgv1(path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

Dims parse_dims(const std::string& s) {
  Dims d;
  if (std::sscanf(s.c_str(), "%zu,%zu,%zu", &d.nx, &d.ny, &d.nz) != 3 || d.count() == 0) {
    throw InvalidArgument("dims must look like nx,ny,nz, got '" + s + "'");
  }
  return d;
}

SolverOptions solver_options(const std::string& scheme, double tol, double omega, std::size_t max_iter) {
  SolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  if (scheme == "jacobi") {
    o.scheme = SolverScheme::jacobi;
    o.omega = omega > 0 ? omega : 1.0;
  } else if (scheme == "sor") {
    o.scheme = SolverScheme::red_black_sor;
    o.omega = omega > 0 ? omega : 1.8;
  } else {
    throw InvalidArgument("unknown solver scheme '" + scheme + "' (expected jacobi or sor)");
  }
  return o;
}

gan::ArchitectureConfig parse_arch(const std::string& name) {
  if (name == "full") return gan::ArchitectureConfig::full();
  if (name == "toy") return gan::ArchitectureConfig::toy();
  throw InvalidArgument("unknown architecture '" + name + "' (expected full or toy)");
}

// Generator from a weight file, or a freshly initialized one when no file is given.
gan::Generator<float> load_generator(const std::string& weights, const std::string& arch, std::uint64_t init_seed,
                                     Manifest& m) {
  if (!weights.empty()) {
    m.inputs.push_back(weights);
    auto nets = nn::build_networks(nn::read_mgw1(weights));
    if (!nets.generator) throw InvalidArgument(weights + ": file holds no generator layers");
    return std::move(*nets.generator);
  }
  announce_seed("init-seed", init_seed, false);
  m.config["arch"] = arch;
  m.config["init_seed"] = init_seed;
  auto g = gan::make_generator<float>(parse_arch(arch));
  gan::init_weights(g, init_seed);
  return g;
}

void write_tensor_raw(const std::string& path, const nn::Tensor4<float>& t) {
  io::write_f32_raw(path, std::vector<float>(t.data().begin(), t.data().end()));
}

// Latent from a raw f32 file; the spatial extent is inferred as a cube.
gan::LatentField read_latent(const std::string& path, std::size_t channels) {
  const auto v = io::read_f32_raw(path);
  if (v.empty() || v.size() % channels) {
    throw InvalidArgument(path + ": " + std::to_string(v.size()) + " floats is not a multiple of " +
                          std::to_string(channels) + " latent channels");
  }
  const std::size_t cells = v.size() / channels;
  std::size_t a = 1;
  while (a * a * a < cells) ++a;
  if (a * a * a != cells) throw InvalidArgument(path + ": latent spatial size is not a cube");
  gan::LatentField z(channels, a, a, a);
  std::copy(v.begin(), v.end(), z.data().begin());
  return z;
}

// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::string input, output, format = "auto", dims, labels;
  double spacing = gan::kDefaultSpacingNm;
};

int run_encode(const EncodeArgs& a) {
  Manifest m{"encode", {a.input}};
  std::string fmt = a.format;
  if (fmt == "auto") fmt = fs::path(a.input).extension() == ".txt" ? "text" : "grey";
  VoxelGrid g;
  if (fmt == "text") {
    g = read_text_volume(a.input);
  } else if (fmt == "grey") {
    if (a.dims.empty()) throw InvalidArgument("--dims is required for greyscale input");
    const auto table = a.labels.empty() ? LabelTable::three_phase_default() : LabelTable::parse(a.labels);
    g = read_greyscale_raw(a.input, parse_dims(a.dims), a.spacing, table);
    m.config["dims"] = a.dims;
    m.config["spacing_nm"] = a.spacing;
    if (!a.labels.empty()) m.config["labels"] = a.labels;
  } else {
    throw InvalidArgument("unknown input format '" + a.format + "'");
  }
  write_mgv1(a.output, g);
  m.config["format"] = fmt;
  m.output = a.output;
  m.write(manifest_path_for(a.output, false));
  std::cout << "wrote " << a.output << " dims " << g.dims().str() << " phases " << g.phase_count() << '\n';
  return kExitOk;
}

struct SampleArgs {
  std::string input, output;
  std::size_t size = 64, stride = 8, random = 0;
  std::uint64_t seed = 0;
  bool seed_given = false, dry_run = false;
};

int run_sample(const SampleArgs& a) {
  Manifest m{"sample", {a.input}};
  const auto g = load_volume(a.input);
  const SubvolumeSpec spec{a.size, a.stride};
  auto origins = subvolume_origins(g.dims(), spec);
  std::cout << "sub-volumes: " << origins.size() << '\n';
  m.config["size"] = a.size;
  m.config["stride"] = a.stride;
  if (a.random) {
    announce_seed("seed", a.seed, !a.seed_given);
    m.seed = a.seed;
    m.config["random"] = a.random;
    std::mt19937_64 rng(a.seed);
    std::shuffle(origins.begin(), origins.end(), rng);
    origins.resize(std::min(a.random, origins.size()));
  }
  if (a.dry_run) return kExitOk;
  if (a.output.empty()) throw InvalidArgument("--output directory is required unless --dry-run");
  fs::create_directories(a.output);
  char name[64];
  for (std::size_t i = 0; i < origins.size(); ++i) {
    std::snprintf(name, sizeof name, "sub_%06zu.mgv1", i);
    write_mgv1((fs::path(a.output) / name).string(), crop(g, origins[i], {a.size, a.size, a.size}));
  }
  m.output = a.output;
  m.write(manifest_path_for(a.output, true));
  std::cout << "wrote " << origins.size() << " files to " << a.output << '\n';
  return kExitOk;
}

struct MetricsArgs {
  std::vector<std::string> inputs;
  std::string output, stats, boundary = "truncated", dirs = "xyz", bc = "mirror", scheme = "sor";
  bool transport = false;
  double tol = 1e-6, omega = 0;
  std::size_t max_iter = 0;
};

int run_metrics(const MetricsArgs& a) {
  Manifest m{"metrics", a.inputs};
  const Boundary boundary = parse_boundary(a.boundary);
  const auto opt = solver_options(a.scheme, a.tol, a.omega, a.max_iter);
  const LateralBc bc = parse_lateral_bc(a.bc);
  std::vector<Axis> dirs;
  for (char c : a.dirs) dirs.push_back(parse_axis(std::string(1, c)));

  std::ostringstream rows;
  rows << kMetricsCsvHeader << '\n';
  std::vector<MetricReport> reports;
  for (const auto& path : a.inputs) {
    const auto g = load_volume(path);
    auto r = compute_metrics(g, boundary);
    if (a.transport) {
      for (std::size_t p = 0; p < g.phase_count(); ++p)
        for (Axis d : dirs) append_transport(r, solve_diffusion(g, p, d, bc, opt).result);
    }
    write_metrics_rows(rows, fs::path(path).stem().string(), r);
    reports.push_back(std::move(r));
  }
  m.config = {{"boundary", a.boundary}, {"transport", a.transport}};
  if (a.transport) m.config.update({{"dirs", a.dirs}, {"bc", a.bc}, {"scheme", a.scheme}, {"tol", a.tol}});
  if (a.output.empty()) {
    std::cout << rows.str();
  } else {
    open_out(a.output) << rows.str();
    m.output = a.output;
    m.write(manifest_path_for(a.output, false));
  }
  if (!a.stats.empty()) {
    const auto stats = aggregate_stats(reports);
    auto os = open_out(a.stats);
    write_stats_rows(os, stats);
  }
  return kExitOk;
}

struct TpcfArgs {
  std::string input, output, axis = "x", boundary = "truncated";
  std::size_t phase = 0, rmax = 32;
};

int run_tpcf(const TpcfArgs& a) {
  Manifest m{"tpcf", {a.input}};
  const auto g = load_volume(a.input);
  const auto c = tpcf(g, a.phase, parse_axis(a.axis), a.rmax, parse_boundary(a.boundary));
  std::ostringstream os;
  os << kTpcfCsvHeader << '\n';
  write_tpcf_rows(os, c);
  m.config = {{"phase", a.phase}, {"axis", a.axis}, {"rmax", a.rmax}, {"boundary", a.boundary}};
  if (a.output.empty()) {
    std::cout << os.str();
  } else {
    open_out(a.output) << os.str();
    m.output = a.output;
    m.write(manifest_path_for(a.output, false));
  }
  return kExitOk;
}

struct DiffuseArgs {
  std::string input, output, dir = "x", bc = "mirror", scheme = "sor", flux, slices;
  std::size_t phase = 0, max_iter = 0;
  double tol = 1e-6, omega = 0;
};

int run_diffuse(const DiffuseArgs& a) {
  Manifest m{"diffuse", {a.input}};
  const auto g = load_volume(a.input);
  const auto sol = solve_diffusion(g, a.phase, parse_axis(a.dir), parse_lateral_bc(a.bc),
                                   solver_options(a.scheme, a.tol, a.omega, a.max_iter));
  const auto& r = sol.result;
  std::cout << "phase " << r.phase << " dir " << axis_name(r.direction) << " bc " << lateral_bc_name(r.lateral)
            << ": phi " << format_value(r.volume_fraction) << " D_rel " << format_value(r.d_rel) << " tau "
            << format_value(r.tau) << " iterations " << r.iterations << (r.converged ? "" : " (not converged)")
            << '\n';
  MetricReport rep;
  append_transport(rep, r);
  std::ostringstream os;
  os << kMetricsCsvHeader << '\n';
  write_metrics_rows(os, fs::path(a.input).stem().string(), rep);
  m.config = {{"phase", a.phase}, {"dir", a.dir}, {"bc", a.bc}, {"scheme", a.scheme}, {"tol", a.tol}};
  if (a.output.empty()) {
    std::cout << os.str();
  } else {
    open_out(a.output) << os.str();
    m.output = a.output;
    m.write(manifest_path_for(a.output, false));
  }
  if (!a.flux.empty()) write_mgf1(a.flux, sol.flux);
  if (!a.slices.empty()) {
    auto s = open_out(a.slices);
    write_flux_slices_csv(s, sol.flux);
  }
  return r.converged ? kExitOk : kExitRuntime;
}

struct GenerateArgs {
  std::string weights, arch = "full", output, soft, z_out, z_in;
  std::size_t alpha = 1;
  std::uint64_t seed = 0, init_seed = 0;
  bool seed_given = false, periodic = false;
  double spacing = gan::kDefaultSpacingNm;
};

int run_generate(const GenerateArgs& a) {
  Manifest m{"generate"};
  auto gen = load_generator(a.weights, a.arch, a.init_seed, m);
  gan::LatentField z;
  if (!a.z_in.empty()) {
    m.inputs.push_back(a.z_in);
    z = read_latent(a.z_in, gen.input_channels());
  } else {
    announce_seed("seed", a.seed, !a.seed_given);
    m.seed = a.seed;
    z = gan::sample_latent(a.seed, a.alpha, gen.input_channels());
  }
  const auto out = a.periodic ? gan::generate_periodic(gen, z, a.spacing) : gan::generate(gen, z, a.spacing);
  write_mgv1(a.output, out.labels);
  if (!a.soft.empty()) write_tensor_raw(a.soft, out.soft.tensor());
  if (!a.z_out.empty()) write_tensor_raw(a.z_out, z);
  m.config.update({{"alpha", z.depth()}, {"periodic", a.periodic}, {"spacing_nm", a.spacing}});
  m.output = a.output;
  m.write(manifest_path_for(a.output, false));
  std::cout << "wrote " << a.output << " dims " << out.labels.dims().str() << '\n';
  return kExitOk;
}

struct ParityArgs {
  std::string weights, z, expected;
  double tol = 1e-4;
};

int run_parity(const ParityArgs& a) {
  auto nets = nn::build_networks(nn::read_mgw1(a.weights));
  if (!nets.generator) throw InvalidArgument(a.weights + ": file holds no generator layers");
  const auto z = read_latent(a.z, nets.generator->input_channels());
  const auto out = nets.generator->forward_eval(z);
  const auto expected = io::read_f32_raw(a.expected);
  if (expected.size() != out.size()) {
    throw InvalidArgument(a.expected + ": holds " + std::to_string(expected.size()) + " floats, generator produced " +
                          std::to_string(out.size()) + " (" + out.shape().str() + ")");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(double(out[i]) - expected[i]));
  const bool ok = worst <= a.tol;
  std::cout << "parity " << (ok ? "PASS" : "FAIL") << ": max |diff| = " << format_value(worst) << " (tol "
            << format_value(a.tol) << ")\n";
  return ok ? kExitOk : kExitRuntime;
}

struct InterpolateArgs {
  std::string weights, arch = "full", output;
  std::size_t steps = 10, alpha = 1;
  std::uint64_t seed_start = 0, seed_end = 1, init_seed = 0;
  bool periodic = false;
};

int run_interpolate(const InterpolateArgs& a) {
  Manifest m{"interpolate"};
  auto gen = load_generator(a.weights, a.arch, a.init_seed, m);
  if (a.periodic) gen = gan::make_periodic(gen);
  announce_seed("seed-start", a.seed_start, false);
  announce_seed("seed-end", a.seed_end, false);
  const auto zs = gan::sample_latent(a.seed_start, a.alpha, gen.input_channels());
  const auto ze = gan::sample_latent(a.seed_end, a.alpha, gen.input_channels());
  std::vector<gan::Generated> frames;
  const auto changes = gan::interpolation_step_changes(gen, zs, ze, a.steps, &frames);
  fs::create_directories(a.output);
  char name[64];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%03zu.mgv1", i);
    write_mgv1((fs::path(a.output) / name).string(), frames[i].labels);
  }
  auto os = open_out((fs::path(a.output) / "changes.csv").string());
  os << "step,beta,mean_abs_change\n";
  for (std::size_t i = 0; i < changes.size(); ++i) {
    os << i + 1 << ',' << format_value(1.0 - double(i + 1) / double(a.steps)) << ',' << format_value(changes[i])
       << '\n';
  }
  m.config.update({{"steps", a.steps}, {"alpha", a.alpha}, {"seed_start", a.seed_start}, {"seed_end", a.seed_end},
                   {"periodic", a.periodic}});
  m.output = a.output;
  m.write(manifest_path_for(a.output, true));
  std::cout << "wrote " << frames.size() << " frames to " << a.output << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string config, output;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

template <typename T>
void take(const json& j, const char* key, T& dst, std::set<std::string>& seen) {
  if (j.contains(key)) {
    dst = j.at(key).get<T>();
    seen.insert(key);
  }
}

int run_train_toy(const TrainArgs& a) {
  Manifest m{"train-toy"};
  gan::TrainConfig cfg;
  cfg.arch = gan::ArchitectureConfig::toy();
  cfg.lr = kToyLr;
  cfg.batch_size = kToyBatch;
  cfg.max_cycles = kToyCycles;
  cfg.seed = a.seed;
  std::size_t dataset = kToyDataset, eval_samples = 16;
  if (!a.config.empty()) {
    m.inputs.push_back(a.config);
    std::ifstream is(a.config);
    if (!is) throw IoError("cannot open " + a.config);
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw FormatError(a.config, e.byte, e.what());
    }
    std::set<std::string> seen;
    std::string loss = "non_saturating";
    take(j, "lr", cfg.lr, seen);
    take(j, "beta1", cfg.beta1, seen);
    take(j, "beta2", cfg.beta2, seen);
    take(j, "label_smoothing", cfg.label_smoothing, seen);
    take(j, "generator_steps", cfg.generator_steps, seen);
    take(j, "batch_size", cfg.batch_size, seen);
    take(j, "cycles", cfg.max_cycles, seen);
    take(j, "epochs", cfg.max_epochs, seen);
    take(j, "snapshot_every_epochs", cfg.snapshot_every_epochs, seen);
    take(j, "dataset_size", dataset, seen);
    take(j, "eval_samples", eval_samples, seen);
    take(j, "generator_loss", loss, seen);
    if (!a.seed_given) take(j, "seed", cfg.seed, seen);
    for (const auto& [k, v] : j.items()) {
      if (!seen.count(k) && k != "seed") throw InvalidArgument(a.config + ": unknown key '" + k + "'");
    }
    if (j.contains("epochs") && !j.contains("cycles")) cfg.max_cycles = 0;
    if (loss == "saturating") cfg.generator_loss = gan::GeneratorLossMode::saturating;
    else if (loss != "non_saturating") throw InvalidArgument("generator_loss must be saturating or non_saturating");
    m.config = j;
  }
  announce_seed("seed", cfg.seed, !a.seed_given && !m.config.contains("seed"));
  m.seed = cfg.seed;
  fs::create_directories(a.output);

  gan::Trainer t(gan::stripe_dataset(dataset, cfg.arch.base_edge(), cfg.seed), cfg);
  auto log = open_out((fs::path(a.output) / "log.csv").string());
  gan::write_training_log(log, {});
  t.run([&](const gan::LogRow& r) {
    log << r.step << ',' << r.epoch << ',' << format_value(r.j_d) << ',' << format_value(r.j_g) << ','
        << format_value(r.d_real_mean) << ',' << format_value(r.d_fake_mean) << '\n';
  });

  auto records = nn::to_records(t.generator());
  const auto d = nn::to_records(t.discriminator());
  records.insert(records.end(), d.begin(), d.end());
  nn::write_mgw1((fs::path(a.output) / "weights.mgw1").string(), records);

  auto snaps = open_out((fs::path(a.output) / "snapshots.csv").string());
  snaps << "epoch," << kMetricsCsvHeader << '\n';
  for (const auto& s : t.snapshots()) {
    std::ostringstream rows;
    write_metrics_rows(rows, "epoch" + std::to_string(s.epoch), s.metrics);
    std::string line;
    std::istringstream in(rows.str());
    while (std::getline(in, line)) snaps << s.epoch << ',' << line << '\n';
  }

  gan::EvalConfig ec;
  ec.samples = eval_samples;
  ec.seed = cfg.seed + 1;
  const auto ev = gan::evaluate_samples(t.generator(), ec);
  write_mgv1((fs::path(a.output) / "sample.mgv1").string(), gan::generate(t.generator(), gan::sample_latent(ec.seed, 1)).labels);
  std::cout << "cycles " << t.cycles() << " discriminator updates " << t.discriminator_updates()
            << " generator updates " << t.generator_updates() << '\n';
  for (const auto& s : ev.stats) {
    if (s.metric == "volume_fraction") {
      std::cout << "phase " << s.phase << " volume fraction " << format_value(s.mean) << " +- "
                << format_value(s.stddev) << '\n';
    }
  }
  m.output = a.output;
  m.write(manifest_path_for(a.output, true));
  return kExitOk;
}

std::string kernel_str(const nn::ConvSpec& s) {
  return std::to_string(s.kernel[0]) + "x" + std::to_string(s.kernel[1]) + "x" + std::to_string(s.kernel[2]);
}

int run_inspect(const std::string& path) {
  const auto records = nn::read_mgw1(path);
  std::size_t g = 0, d = 0, n = 0;
  std::printf("%-5s %-6s %-5s %-6s %-7s %-7s %-4s %-9s %-5s %s\n", "layer", "type", "in", "out", "kernel", "stride",
              "pad", "padding", "bias", "BN");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.kind == nn::LayerKind::batchnorm) continue;
    const bool bn = i + 1 < records.size() && records[i + 1].kind == nn::LayerKind::batchnorm;
    const bool tr = r.kind == nn::LayerKind::transposed;
    const std::string name = tr ? "G" + std::to_string(++g) : "D" + std::to_string(++d);
    std::printf("%-5s %-6s %-5zu %-6zu %-7s %-7zu %-4zu %-9s %-5s %s\n", name.c_str(), tr ? "convT" : "conv",
                r.spec.in_channels, r.spec.out_channels, kernel_str(r.spec).c_str(), r.spec.stride, r.spec.padding,
                r.spec.pad_mode == nn::PadMode::circular ? "circular" : "zero", r.has_bias ? "Yes" : "No",
                bn ? "Yes" : "No");
    ++n;
  }
  std::printf("parameterized layers: %zu\n", n);
  return kExitOk;
}

int run_init_weights(const std::string& arch_name, std::uint64_t seed, bool seed_given, const std::string& output) {
  Manifest m{"init-weights"};
  announce_seed("seed", seed, !seed_given);
  const auto arch = parse_arch(arch_name);
  auto gen = gan::make_generator<float>(arch);
  auto disc = gan::make_discriminator<float>(arch);
  gan::init_weights(gen, seed);
  gan::init_weights(disc, seed + 1);
  auto records = nn::to_records(gen);
  const auto d = nn::to_records(disc);
  records.insert(records.end(), d.begin(), d.end());
  nn::write_mgw1(output, records);
  m.seed = seed;
  m.config["arch"] = arch_name;
  m.output = output;
  m.write(manifest_path_for(output, false));
  std::cout << "wrote " << output << '\n';
  return kExitOk;
}

int dispatch(int argc, char** argv);

int run_replay(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError(path, e.byte, e.what());
  }
  if (!j.contains("argv") || !j["argv"].is_array()) throw FormatError(path, 0, "manifest has no argv array");
  auto args = j["argv"].get<std::vector<std::string>>();
  if (args.empty()) throw FormatError(path, 0, "manifest argv is empty");
  // Replays run sequentially.
  std::vector<std::string> full{args[0], "--threads", "1"};
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--threads" && i + 1 < args.size()) {
      ++i;
      continue;
    }
    full.push_back(args[i]);
  }
  std::vector<char*> ptrs;
  for (auto& s : full) ptrs.push_back(s.data());
  return dispatch(static_cast<int>(ptrs.size()), ptrs.data());
}

int dispatch(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"microgen: voxel microstructure metrics, transport and volumetric GAN generation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", MICROGEN_VERSION);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (1 = sequential; env MICROGEN_THREADS)")
      ->check(CLI::PositiveNumber);

  std::function<int()> action;

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Convert a greyscale raw or text volume to MGV1");
  c_enc->add_option("input", enc.input, "Input volume")->required()->check(CLI::ExistingFile);
  c_enc->add_option("-o,--output", enc.output, "Output .mgv1")->required();
  c_enc->add_option("--format", enc.format, "auto, text or grey")->check(CLI::IsMember({"auto", "text", "grey"}));
  c_enc->add_option("--dims", enc.dims, "nx,ny,nz for greyscale input");
  c_enc->add_option("--spacing", enc.spacing, "Voxel edge in nm for greyscale input");
  c_enc->add_option("--labels", enc.labels, "Label table grey:phase,... (default 0:0,127:1,255:2)");
  c_enc->callback([&] { action = [&] { return run_encode(enc); }; });

  SampleArgs smp;
  auto* c_smp = app.add_subcommand("sample", "Extract cubic sub-volumes with a uniform stride");
  c_smp->add_option("input", smp.input, "Input volume (.mgv1 or .txt)")->required()->check(CLI::ExistingFile);
  c_smp->add_option("--size", smp.size, "Sub-volume edge")->capture_default_str();
  c_smp->add_option("--stride", smp.stride, "Stride between windows")->capture_default_str();
  c_smp->add_option("-o,--output", smp.output, "Output directory");
  c_smp->add_option("--random", smp.random, "Keep only N randomly chosen windows");
  auto* smp_seed = c_smp->add_option("--seed", smp.seed, "Seed for --random")->capture_default_str();
  c_smp->add_flag("--dry-run", smp.dry_run, "Only report the count");
  c_smp->callback([&] {
    smp.seed_given = smp_seed->count() > 0;
    action = [&] { return run_sample(smp); };
  });

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "Volume fraction, SSA, TPB (and optionally transport) as CSV");
  c_met->add_option("inputs", met.inputs, "Input volumes")->required()->check(CLI::ExistingFile);
  c_met->add_option("-o,--output", met.output, "CSV path (stdout when omitted)");
  c_met->add_option("--stats", met.stats, "Write mean/std per metric to this CSV");
  c_met->add_option("--boundary", met.boundary, "truncated or periodic")->capture_default_str();
  c_met->add_flag("--transport", met.transport, "Also solve diffusion per phase and direction");
  c_met->add_option("--dirs", met.dirs, "Transport directions")->capture_default_str();
  c_met->add_option("--bc", met.bc, "Lateral faces: mirror or periodic")->capture_default_str();
  c_met->add_option("--scheme", met.scheme, "jacobi or sor")->capture_default_str();
  c_met->add_option("--tol", met.tol, "Solver tolerance")->capture_default_str();
  c_met->add_option("--omega", met.omega, "Relaxation factor (default 1 for jacobi, 1.8 for sor)");
  c_met->add_option("--max-iter", met.max_iter, "Iteration cap (0 = automatic)");
  c_met->callback([&] { action = [&] { return run_metrics(met); }; });

  TpcfArgs tp;
  auto* c_tp = app.add_subcommand("tpcf", "Two-point correlation along one axis");
  c_tp->add_option("input", tp.input, "Input volume")->required()->check(CLI::ExistingFile);
  c_tp->add_option("--phase", tp.phase, "Phase id")->required();
  c_tp->add_option("--axis", tp.axis, "x, y or z")->capture_default_str();
  c_tp->add_option("--rmax", tp.rmax, "Largest lag")->capture_default_str();
  c_tp->add_option("--boundary", tp.boundary, "truncated or periodic")->capture_default_str();
  c_tp->add_option("-o,--output", tp.output, "CSV path (stdout when omitted)");
  c_tp->callback([&] { action = [&] { return run_tpcf(tp); }; });

  DiffuseArgs df;
  auto* c_df = app.add_subcommand("diffuse", "Steady diffusion through one phase: D_rel and tau");
  c_df->add_option("input", df.input, "Input volume")->required()->check(CLI::ExistingFile);
  c_df->add_option("--phase", df.phase, "Conducting phase")->required();
  c_df->add_option("--dir", df.dir, "Transport axis x, y or z")->capture_default_str();
  c_df->add_option("--bc", df.bc, "Lateral faces: mirror or periodic")
      ->check(CLI::IsMember({"mirror", "periodic"}))
      ->capture_default_str();
  c_df->add_option("--scheme", df.scheme, "jacobi or sor")->capture_default_str();
  c_df->add_option("--tol", df.tol, "Relative residual tolerance")->capture_default_str();
  c_df->add_option("--omega", df.omega, "Relaxation factor (default 1 for jacobi, 1.8 for sor)");
  c_df->add_option("--max-iter", df.max_iter, "Iteration cap (0 = automatic)");
  c_df->add_option("-o,--output", df.output, "CSV path (stdout when omitted)");
  c_df->add_option("--flux", df.flux, "Write the flux map as MGF1");
  c_df->add_option("--slices", df.slices, "Write per-slice flux CSV");
  c_df->callback([&] { action = [&] { return run_diffuse(df); }; });

  GenerateArgs gn;
  auto* c_gn = app.add_subcommand("generate", "Generate one volume from a latent sample");
  c_gn->add_option("-w,--weights", gn.weights, "MGW1 file (random init when omitted)")->check(CLI::ExistingFile);
  c_gn->add_option("--arch", gn.arch, "Architecture for random init: full or toy")->capture_default_str();
  c_gn->add_option("--init-seed", gn.init_seed, "Seed for random init")->capture_default_str();
  c_gn->add_option("--alpha", gn.alpha, "Latent spatial extent")->check(CLI::PositiveNumber)->capture_default_str();
  auto* gn_seed = c_gn->add_option("--seed", gn.seed, "Latent seed")->capture_default_str();
  c_gn->add_flag("--periodic", gn.periodic, "Circular padding in every layer");
  c_gn->add_option("--spacing", gn.spacing, "Voxel edge in nm")->capture_default_str();
  c_gn->add_option("-o,--output", gn.output, "Output .mgv1")->required();
  c_gn->add_option("--soft", gn.soft, "Also write the softmax output as raw f32");
  c_gn->add_option("--z-out", gn.z_out, "Also write the latent as raw f32");
  c_gn->add_option("--z", gn.z_in, "Read the latent from raw f32 instead of sampling")->check(CLI::ExistingFile);
  c_gn->callback([&] {
    gn.seed_given = gn_seed->count() > 0;
    action = [&] { return run_generate(gn); };
  });

  ParityArgs par;
  auto* c_par = app.add_subcommand("parity", "Compare generator output with an exported fixture");
  c_par->add_option("-w,--weights", par.weights, "MGW1 file")->required()->check(CLI::ExistingFile);
  c_par->add_option("--z", par.z, "Latent, raw f32")->required()->check(CLI::ExistingFile);
  c_par->add_option("--expected", par.expected, "Expected output, raw f32")->required()->check(CLI::ExistingFile);
  c_par->add_option("--tol", par.tol, "Elementwise tolerance")->capture_default_str();
  c_par->callback([&] { action = [&] { return run_parity(par); }; });

  InterpolateArgs ip;
  auto* c_ip = app.add_subcommand("interpolate", "Latent interpolation sweep");
  c_ip->add_option("-w,--weights", ip.weights, "MGW1 file (random init when omitted)")->check(CLI::ExistingFile);
  c_ip->add_option("--arch", ip.arch, "Architecture for random init: full or toy")->capture_default_str();
  c_ip->add_option("--init-seed", ip.init_seed, "Seed for random init")->capture_default_str();
  c_ip->add_option("--steps", ip.steps, "Number of steps")->check(CLI::PositiveNumber)->capture_default_str();
  c_ip->add_option("--alpha", ip.alpha, "Latent spatial extent")->check(CLI::PositiveNumber)->capture_default_str();
  c_ip->add_option("--seed-start", ip.seed_start, "Seed of the start latent")->capture_default_str();
  c_ip->add_option("--seed-end", ip.seed_end, "Seed of the end latent")->capture_default_str();
  c_ip->add_flag("--periodic", ip.periodic, "Circular padding in every layer");
  c_ip->add_option("-o,--output", ip.output, "Output directory")->required();
  c_ip->callback([&] { action = [&] { return run_interpolate(ip); }; });

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-toy", "Train the small network on synthetic stripe volumes");
  c_tr->add_option("--config", tr.config, "JSON overrides")->check(CLI::ExistingFile);
  auto* tr_seed = c_tr->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  c_tr->add_option("-o,--output", tr.output, "Output directory")->required();
  c_tr->callback([&] {
    tr.seed_given = tr_seed->count() > 0;
    action = [&] { return run_train_toy(tr); };
  });

  std::string inspect_path;
  auto* c_in = app.add_subcommand("inspect-weights", "Print the layer table of an MGW1 file");
  c_in->add_option("weights", inspect_path, "MGW1 file")->required()->check(CLI::ExistingFile);
  c_in->callback([&] { action = [&] { return run_inspect(inspect_path); }; });

  std::string iw_arch = "full", iw_out;
  std::uint64_t iw_seed = 0;
  auto* c_iw = app.add_subcommand("init-weights", "Write randomly initialized generator and discriminator");
  c_iw->add_option("--arch", iw_arch, "full or toy")->capture_default_str();
  auto* iw_seed_opt = c_iw->add_option("--seed", iw_seed, "Initialization seed")->capture_default_str();
  c_iw->add_option("-o,--output", iw_out, "Output .mgw1")->required();
  c_iw->callback([&] {
    const bool given = iw_seed_opt->count() > 0;
    action = [&, given] { return run_init_weights(iw_arch, iw_seed, given, iw_out); };
  });

  std::string replay_path;
  auto* c_rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest, sequentially");
  c_rp->add_option("manifest", replay_path, "manifest JSON")->required()->check(CLI::ExistingFile);
  c_rp->callback([&] { action = [&] { return run_replay(replay_path); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (threads) set_thread_count(threads);

  try {
    return action();
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
