#include "freqgan/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "freqgan/analysis.hpp"
#include "freqgan/config_json.hpp"
#include "freqgan/io.hpp"
#include "freqgan/spectral.hpp"
#include "freqgan/trainer.hpp"

namespace freqgan::cli {

namespace fs = std::filesystem;

namespace {

std::optional<std::uint64_t> env_seed_override() {
  const char* v = std::getenv("FREQGAN_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ContractError("FREQGAN_SEED is not an unsigned integer");
  }
}

std::vector<double> parse_double_list(const std::string& csv,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ContractError(std::string("bad ") + what + " value: " + item);
    }
  }
  if (out.empty()) throw ContractError(std::string(what) + " list is empty");
  return out;
}

// Image source specifier: a directory of PNGs, an .fgt container, or an
// inline synthetic descriptor such as
//   synthetic-textures:seed=7,count=64,size=16,channels=3,band_limit=0.5
std::vector<Tensor> load_images(const std::string& spec, int resize_to = 0) {
  const bool synthetic = spec.rfind("synthetic-", 0) == 0;
  if (synthetic) {
    DatasetDescriptor d;
    const auto colon = spec.find(':');
    d.source = dataset_source_from_string(spec.substr(0, colon));
    d.count = 64;
    if (resize_to > 0) d.image_size = resize_to;
    if (colon != std::string::npos) {
      std::stringstream ss(spec.substr(colon + 1));
      std::string kv;
      while (std::getline(ss, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw ContractError("bad synthetic descriptor entry: " + kv);
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
          if (key == "seed")
            d.seed = std::stoull(val);
          else if (key == "count")
            d.count = std::stoi(val);
          else if (key == "size")
            d.image_size = std::stoi(val);
          else if (key == "channels")
            d.channels = std::stoi(val);
          else if (key == "band_limit")
            d.band_limit = std::stod(val);
          else if (key == "noise")
            d.noise = std::stod(val);
          else
            throw ContractError("unknown synthetic descriptor key: " + key);
        } catch (const ContractError&) {
          throw;
        } catch (const std::exception&) {
          throw ContractError("bad synthetic descriptor value: " + kv);
        }
      }
    }
    return load_dataset(d).images;
  }
  if (fs::is_directory(spec)) {
    DatasetDescriptor d;
    d.source = DatasetSource::kImageDir;
    d.dir_path = spec;
    d.count = 0;  // all files
    // native square size unless a resize is requested
    if (resize_to > 0) {
      d.image_size = resize_to;
    } else {
      std::string first;
      for (const auto& e : fs::directory_iterator(spec)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        for (char& c : ext) c = static_cast<char>(::tolower(c));
        if (ext != ".png") continue;
        if (first.empty() || e.path().string() < first)
          first = e.path().string();
      }
      if (first.empty())
        throw ContractError("no PNG images in directory: " + spec);
      io::DecodedImage probe = io::read_png(first);
      d.image_size = std::min(probe.height, probe.width);
      d.channels = probe.channels;
    }
    return load_dataset(d).images;
  }
  if (fs::is_regular_file(spec)) return io::read_tensor_set(spec);
  throw ContractError("image source not found: " + spec);
}

nlohmann::json gap_to_json(const GapReport& r) {
  nlohmann::json j;
  j["all_band_gap"] = r.all_band_gap;
  j["lower_band_gap"] =
      r.lower_band_gap ? nlohmann::json(*r.lower_band_gap) : nullptr;
  j["gamma_used"] = r.gamma_used ? nlohmann::json(*r.gamma_used) : nullptr;
  j["n_real"] = r.n_real;
  j["n_fake"] = r.n_fake;
  return j;
}

std::string gamma_dir_name(double gamma) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "gamma_%.2f", gamma);
  return buf;
}

// ---- subcommand handlers ----

struct TrainArgs {
  std::string config_path, out_dir;
  double gamma = -1.0, lambda = -1.0;
  long iterations = -1, eval_every = -1;
  int batch_size = -1, critics = -1;
  std::int64_t seed = -1;
  std::string regularizer;
};

ExperimentConfig resolve_config(const TrainArgs& a) {
  ExperimentConfig cfg = load_config_file(a.config_path);
  if (a.gamma >= 0.0) cfg.gamma = a.gamma;
  if (a.lambda >= 0.0) cfg.lambda = a.lambda;
  if (a.iterations > 0) cfg.iterations = a.iterations;
  if (a.eval_every > 0) cfg.eval_every = a.eval_every;
  if (a.batch_size > 0) cfg.batch_size = a.batch_size;
  if (a.critics > 0) cfg.critics = a.critics;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (!a.regularizer.empty())
    cfg.regularizer = regularizer_from_string(a.regularizer);
  if (auto env = env_seed_override()) cfg.seed = *env;
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = resolve_config(a);
  Dataset data = load_dataset(cfg.dataset);
  TrainResult r = train_gan(cfg, data, a.out_dir);
  const EvalRecord& last = r.log.rows.back();
  nlohmann::json summary = {{"iterations", cfg.iterations},
                            {"final_gap", last.gap},
                            {"final_lower_band_gap", last.lower_band_gap},
                            {"best_gap", r.best_gap},
                            {"best_iteration", r.best_iteration},
                            {"out_dir", a.out_dir}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_sweep(const TrainArgs& a, const std::string& gamma_grid,
              const std::string& lambda_grid) {
  ExperimentConfig cfg = resolve_config(a);
  Dataset data = load_dataset(cfg.dataset);
  auto cells = sweep(cfg, parse_double_list(gamma_grid, "gamma"),
                     parse_double_list(lambda_grid, "lambda"), data, a.out_dir);
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepCell& c : cells)
    rows.push_back({{"gamma", c.gamma},
                    {"lambda", c.lambda},
                    {"gap", c.gap},
                    {"lower_band_gap", c.lower_band_gap}});
  std::cout << rows.dump(2) << std::endl;
  return 0;
}

int cmd_filter(const std::string& input, const std::string& gammas_csv,
               const std::string& out_dir) {
  const std::vector<double> gammas = parse_double_list(gammas_csv, "gamma");
  std::vector<Tensor> images = load_images(input);
  fs::create_directories(out_dir);
  nlohmann::json outputs = nlohmann::json::array();
  for (double g : gammas) {
    if (!(g >= 0.0 && g <= 1.0))
      throw ContractError("filter: gamma outside [0,1]");
    const fs::path dir = fs::path(out_dir) / gamma_dir_name(g);
    fs::create_directories(dir);
    std::vector<Tensor> filtered;
    filtered.reserve(images.size());
    for (const Tensor& img : images) filtered.push_back(f_drop(img, g));
    for (std::size_t i = 0; i < filtered.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04zu.png", i);
      io::save_image_png((dir / name).string(), filtered[i]);
    }
    io::write_tensor_set((dir / "filtered.fgt").string(), filtered);
    MeanSpectrum spec = mean_spectrum(filtered);
    io::write_matrix_csv((dir / "spectrum.csv").string(), spec.values);
    io::save_normalized_pgm((dir / "spectrum.pgm").string(), spec.display,
                            spec.display.array().maxCoeff());
    outputs.push_back(gamma_dir_name(g));
  }
  io::write_manifest(out_dir, {{"command", "filter"},
                               {"input", input},
                               {"gammas", gammas},
                               {"outputs", outputs}});
  return 0;
}

int cmd_attack(const std::vector<std::string>& checkpoints,
               const std::string& input, double epsilon, double gamma,
               const std::string& out_dir) {
  if (checkpoints.empty()) throw ContractError("attack: no checkpoint given");
  fs::create_directories(out_dir);
  std::vector<SensitivityMap> maps;
  std::vector<GanModel> models;
  for (const std::string& path : checkpoints)
    models.push_back(load_checkpoint(path));
  const int size = models.front().arch.image_size;
  std::vector<Tensor> images = load_images(input, size);
  for (const GanModel& m : models)
    maps.push_back(sfa_sensitivity_map(m, images, epsilon, gamma));

  // maps compared in one report share a single normalization maximum
  double shared_max = 0.0;
  for (const SensitivityMap& m : maps)
    shared_max = std::max(shared_max, m.values.array().maxCoeff());
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    char base[32];
    std::snprintf(base, sizeof(base), "map_%zu", i);
    io::write_matrix_csv((fs::path(out_dir) / (std::string(base) + ".csv")).string(),
                         maps[i].values);
    io::save_normalized_pgm(
        (fs::path(out_dir) / (std::string(base) + ".pgm")).string(),
        maps[i].values, shared_max);
    entries.push_back({{"checkpoint", checkpoints[i]},
                       {"max_sensitivity", maps[i].values.array().maxCoeff()},
                       {"mean_sensitivity", maps[i].values.array().mean()}});
  }
  nlohmann::json summary = {{"epsilon", epsilon},
                            {"gamma", gamma},
                            {"n_images", maps.front().n_images},
                            {"normalization_max", shared_max},
                            {"maps", entries}};
  std::ofstream(fs::path(out_dir) / "summary.json") << summary.dump(2) << "\n";
  io::write_manifest(out_dir, {{"command", "attack"}, {"summary", summary}});
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_gap(const std::string& real_spec, const std::string& fake_spec,
            bool lower_band, double gamma, const std::string& out_dir) {
  std::vector<Tensor> real = load_images(real_spec);
  std::vector<Tensor> fake = load_images(fake_spec);
  GapReport r = frequency_gap(real, fake,
                              lower_band ? std::optional<double>(gamma)
                                         : std::nullopt);
  const nlohmann::json j = gap_to_json(r);
  std::cout << j.dump(2) << std::endl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "gap.json") << j.dump(2) << "\n";
    io::write_manifest(out_dir, {{"command", "gap"}, {"report", j}});
  }
  return 0;
}

int cmd_spectrum(const std::string& input, const std::string& out_dir) {
  std::vector<Tensor> images = load_images(input);
  MeanSpectrum spec = mean_spectrum(images);
  fs::create_directories(out_dir);
  io::write_matrix_csv((fs::path(out_dir) / "spectrum.csv").string(),
                       spec.values);
  io::save_normalized_pgm((fs::path(out_dir) / "spectrum.pgm").string(),
                          spec.display, spec.display.array().maxCoeff());
  io::write_manifest(out_dir,
                     {{"command", "spectrum"},
                      {"input", input},
                      {"n_images", images.size()},
                      {"outputs", {"spectrum.csv", "spectrum.pgm"}}});
  return 0;
}

int cmd_detect(const std::string& real_spec, const std::string& fake_spec,
               const std::string& domain, std::uint64_t seed,
               const std::string& out_dir) {
  std::vector<Tensor> real = load_images(real_spec);
  std::vector<Tensor> fake = load_images(fake_spec);
  ProbeDomain d;
  if (domain == "spatial")
    d = ProbeDomain::kSpatial;
  else if (domain == "frequency")
    d = ProbeDomain::kFrequency;
  else
    throw ContractError("detect: domain must be spatial or frequency");
  if (auto env = env_seed_override()) seed = *env;
  ProbeResult r = fake_detection_probe(real, fake, d, seed);
  nlohmann::json j = {{"domain", domain},
                      {"split_seed", seed},
                      {"train_accuracy", r.train_accuracy},
                      {"test_accuracy", r.test_accuracy}};
  std::cout << j.dump(2) << std::endl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "detect.json") << j.dump(2) << "\n";
    io::write_manifest(out_dir, {{"command", "detect"}, {"report", j}});
  }
  return 0;
}

int cmd_sample(const std::string& checkpoint, int n, std::uint64_t seed,
               const std::string& out_dir) {
  if (auto env = env_seed_override()) seed = *env;
  GanModel model = load_checkpoint(checkpoint);
  std::vector<Tensor> images = sample(model, n, seed);
  fs::create_directories(out_dir);
  io::write_tensor_set((fs::path(out_dir) / "samples.fgt").string(), images);
  io::save_image_png((fs::path(out_dir) / "grid.png").string(),
                     io::image_grid(images, 8));
  io::write_manifest(out_dir, {{"command", "sample"},
                               {"checkpoint", checkpoint},
                               {"n", n},
                               {"seed", seed},
                               {"outputs", {"samples.fgt", "grid.png"}}});
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"frequency-domain GAN toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto add_train_flags = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", train_args.config_path, "experiment JSON")
        ->required();
    auto* out = sub->add_option("--out", train_args.out_dir, "output directory");
    if (out_required) out->required();
    sub->add_option("--gamma", train_args.gamma);
    sub->add_option("--lambda", train_args.lambda);
    sub->add_option("--iterations", train_args.iterations);
    sub->add_option("--eval-every", train_args.eval_every);
    sub->add_option("--batch-size", train_args.batch_size);
    sub->add_option("--critics", train_args.critics);
    sub->add_option("--seed", train_args.seed);
    sub->add_option("--regularizer", train_args.regularizer,
                    "none|fmatch|sr");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "run one experiment");
  add_train_flags(train_cmd, true);

  std::string gamma_grid, lambda_grid;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "train a (gamma, lambda) grid");
  add_train_flags(sweep_cmd, true);
  sweep_cmd->add_option("--gamma-grid", gamma_grid, "comma list")->required();
  sweep_cmd->add_option("--lambda-grid", lambda_grid, "comma list")->required();

  std::string input, gammas = "0.8", out_dir;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "low-pass images per gamma");
  filter_cmd->add_option("--input", input, "dir, .fgt file, or synthetic-... descriptor")
      ->required();
  filter_cmd->add_option("--gamma", gammas, "comma list of thresholds");
  filter_cmd->add_option("--out", out_dir)->required();

  std::vector<std::string> checkpoints;
  double epsilon = 10.0 / 255.0, attack_gamma = 1.0;
  std::string attack_input = "synthetic-textures:count=64";
  CLI::App* attack_cmd =
      app.add_subcommand("attack", "per-frequency sensitivity maps");
  attack_cmd->add_option("--checkpoint", checkpoints, "repeatable")->required();
  attack_cmd->add_option("--input", attack_input);
  attack_cmd->add_option("--epsilon", epsilon, "pixel-scale perturbation");
  attack_cmd->add_option("--gamma", attack_gamma,
                         "input filter in front of the discriminator");
  attack_cmd->add_option("--out", out_dir)->required();

  std::string real_spec, fake_spec;
  bool lower_band = false;
  double gap_gamma = 0.8;
  CLI::App* gap_cmd = app.add_subcommand("gap", "mean DCT-spectrum gap");
  gap_cmd->add_option("--real", real_spec)->required();
  gap_cmd->add_option("--fake", fake_spec)->required();
  gap_cmd->add_flag("--lower-band", lower_band);
  gap_cmd->add_option("--gamma", gap_gamma, "lower-band mask threshold");
  gap_cmd->add_option("--out", out_dir);

  CLI::App* spectrum_cmd =
      app.add_subcommand("spectrum", "mean |DCT| of an image set");
  spectrum_cmd->add_option("--input", input)->required();
  spectrum_cmd->add_option("--out", out_dir)->required();

  std::string domain = "frequency";
  std::uint64_t detect_seed = 1;
  CLI::App* detect_cmd =
      app.add_subcommand("detect", "linear real/fake probe accuracy");
  detect_cmd->add_option("--real", real_spec)->required();
  detect_cmd->add_option("--fake", fake_spec)->required();
  detect_cmd->add_option("--domain", domain, "spatial|frequency");
  detect_cmd->add_option("--seed", detect_seed);
  detect_cmd->add_option("--out", out_dir);

  std::string checkpoint;
  int sample_n = 64;
  std::uint64_t sample_seed = 1;
  CLI::App* sample_cmd = app.add_subcommand("sample", "generate image grids");
  sample_cmd->add_option("--checkpoint", checkpoint)->required();
  sample_cmd->add_option("--n", sample_n);
  sample_cmd->add_option("--seed", sample_seed);
  sample_cmd->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(train_cmd)) return cmd_train(train_args);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(train_args, gamma_grid, lambda_grid);
    if (app.got_subcommand(filter_cmd))
      return cmd_filter(input, gammas, out_dir);
    if (app.got_subcommand(attack_cmd))
      return cmd_attack(checkpoints, attack_input, epsilon, attack_gamma,
                        out_dir);
    if (app.got_subcommand(gap_cmd))
      return cmd_gap(real_spec, fake_spec, lower_band, gap_gamma, out_dir);
    if (app.got_subcommand(spectrum_cmd)) return cmd_spectrum(input, out_dir);
    if (app.got_subcommand(detect_cmd))
      return cmd_detect(real_spec, fake_spec, domain, detect_seed, out_dir);
    if (app.got_subcommand(sample_cmd))
      return cmd_sample(checkpoint, sample_n, sample_seed, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("freqgan");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace freqgan::cli
