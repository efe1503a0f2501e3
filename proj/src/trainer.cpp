#include "freqgan/trainer.hpp"

#include <bit>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "freqgan/analysis.hpp"
#include "freqgan/config_json.hpp"
#include "freqgan/io.hpp"
#include "freqgan/optim.hpp"
#include "freqgan/spectral.hpp"

namespace freqgan {

namespace {

constexpr std::uint64_t kDataTag = 0x64617461ull;   // "data"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973ull;  // "nois"
constexpr std::uint64_t kEvalTag = 0x6576616cull;   // "eval"

double lower_band_gamma(const ExperimentConfig& cfg) {
  return cfg.gamma < 1.0 ? cfg.gamma : 0.8;
}

}  // namespace

std::uint64_t data_stream_seed(std::uint64_t seed) {
  return mix_seed(seed, kDataTag);
}
std::uint64_t noise_stream_seed(std::uint64_t seed) {
  return mix_seed(seed, kNoiseTag);
}
std::uint64_t eval_sample_seed(std::uint64_t seed, long iteration) {
  return mix_seed(mix_seed(seed, kEvalTag),
                  static_cast<std::uint64_t>(iteration));
}

long eval_holdout(long dataset_count) {
  return std::max<long>(1, std::min<long>(512, dataset_count / 4));
}

BatchSampler::BatchSampler(const Dataset& data, long train_count,
                           std::uint64_t seed)
    : data_(&data), train_count_(train_count), rng_(seed) {
  if (train_count_ < 1 || train_count_ > static_cast<long>(data.images.size()))
    throw ContractError("BatchSampler: bad train count");
}

Tensor BatchSampler::next(int batch) {
  const long n = data_->images.front().size();
  Tensor out = Tensor::zeros(
      {batch, data_->channels, data_->height, data_->width});
  for (int i = 0; i < batch; ++i) {
    const long idx = static_cast<long>(
        rng_.uniform_int(static_cast<std::uint64_t>(train_count_)));
    out.array().segment(long(i) * n, n) = data_->images[idx].array();
  }
  return out;
}

NoiseStream::NoiseStream(int latent_dim, std::uint64_t seed)
    : dim_(latent_dim), rng_(seed) {}

Tensor NoiseStream::next(int batch) {
  Tensor z = Tensor::zeros({batch, dim_});
  for (long i = 0; i < z.size(); ++i) z.array()(i) = rng_.normal();
  return z;
}

std::vector<Tensor> sample(const GanModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw ContractError("sample: n must be >= 1");
  TapePause pause;
  NoiseStream noise(model.arch.latent_dim, seed);
  std::vector<Tensor> images;
  images.reserve(n);
  int remaining = n;
  while (remaining > 0) {
    const int b = std::min(remaining, 64);
    Tensor batch = generate(model, noise.next(b));
    const long csz = batch.size() / b;
    Shape img_shape(batch.shape().begin() + 1, batch.shape().end());
    for (int i = 0; i < b; ++i)
      images.push_back(
          Tensor(img_shape, batch.array().segment(long(i) * csz, csz)));
    remaining -= b;
  }
  return images;
}

namespace {

void validate_config(const ExperimentConfig& cfg, const Dataset& data) {
  if (data.images.empty()) throw ContractError("train_gan: empty dataset");
  if (data.channels != cfg.arch.image_channels ||
      data.height != cfg.arch.image_size || data.width != cfg.arch.image_size)
    throw ContractError("train_gan: dataset shape does not match arch");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
    throw ContractError("train_gan: gamma outside [0,1]");
  if (cfg.lambda < 0.0) throw ContractError("train_gan: lambda must be >= 0");
  if (cfg.batch_size < 1 || cfg.critics < 1 || cfg.iterations < 1 ||
      cfg.eval_every < 1)
    throw ContractError("train_gan: bad loop sizes");
}

}  // namespace

TrainResult train_gan(const ExperimentConfig& cfg, const Dataset& data,
                      const std::string& out_dir) {
  validate_config(cfg, data);
  namespace fs = std::filesystem;
  const bool writing = !out_dir.empty();
  if (writing) {
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "checkpoints");
  }

  const long count = static_cast<long>(data.images.size());
  const long n_eval = eval_holdout(count);
  const long train_count = count > n_eval ? count - n_eval : count;
  std::vector<Tensor> eval_set(data.images.end() - n_eval, data.images.end());

  TrainResult result;
  result.model = init_model(cfg.arch, cfg.seed);
  BatchSampler sampler(data, train_count, data_stream_seed(cfg.seed));
  NoiseStream noise(cfg.arch.latent_dim, noise_stream_seed(cfg.seed));
  AdamState g_state, d_state;
  g_state.lr = cfg.lr_g;
  d_state.lr = cfg.lr_d;
  g_state.beta1 = d_state.beta1 = cfg.beta1;
  g_state.beta2 = d_state.beta2 = cfg.beta2;

  const bool filtered = cfg.gamma < 1.0;
  const bool regularized =
      cfg.regularizer != Regularizer::kNone && cfg.lambda != 0.0;
  const long fdrop_before = fdrop_invocations();
  const auto start = std::chrono::steady_clock::now();

  double win_d = 0.0, win_g = 0.0, win_match = 0.0;
  long win_iters = 0;
  std::vector<Tensor> last_samples;

  for (long iter = 1; iter <= cfg.iterations; ++iter) {
    double iter_d = 0.0, iter_g = 0.0, iter_match = 0.0;
    for (int k = 1; k <= cfg.critics; ++k) {
      Tensor real = sampler.next(cfg.batch_size);
      Tensor z = noise.next(cfg.batch_size);

      if (k == 1) {
        result.model.zero_grad();
        GradientTape tape;
        Tensor fake = generate(result.model, z);
        Tensor fake_d = filtered ? f_drop(fake, cfg.gamma) : fake;
        Tensor total =
            generator_adversarial_loss(discriminate(result.model, fake_d));
        if (regularized) {
          Tensor reg = cfg.regularizer == Regularizer::kFMatch
                           ? f_match_loss(real, fake, cfg.match_variant)
                           : sr_loss(real, fake);
          iter_match = reg.value();
          total = add(total, smul(reg, cfg.lambda));
        }
        iter_g = total.value();
        tape.backward(total);
        adam_step(result.model.gen_params, g_state);
        ++result.generator_updates;
      }

      result.model.zero_grad();
      GradientTape tape;
      Tensor fake_detached;
      {
        TapePause pause;
        fake_detached = generate(result.model, z);
      }
      Tensor xr = filtered ? f_drop(real, cfg.gamma) : real;
      Tensor xf = filtered ? f_drop(fake_detached, cfg.gamma) : fake_detached;
      Tensor d_total = discriminator_loss(discriminate(result.model, xr),
                                          discriminate(result.model, xf));
      iter_d += d_total.value();
      tape.backward(d_total);
      adam_step(result.model.disc_params, d_state);
    }
    iter_d /= cfg.critics;
    result.iter_losses.push_back({iter, iter_d, iter_g, iter_match});
    win_d += iter_d;
    win_g += iter_g;
    win_match += iter_match;
    ++win_iters;

    if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
      std::vector<Tensor> fakes = sample(result.model, static_cast<int>(n_eval),
                                         eval_sample_seed(cfg.seed, iter));
      GapReport gap = frequency_gap(eval_set, fakes, lower_band_gamma(cfg));
      const double wall_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - start)
              .count();
      result.log.rows.push_back({iter, win_d / win_iters, win_g / win_iters,
                                 win_match / win_iters, gap.all_band_gap,
                                 gap.lower_band_gap.value_or(0.0), wall_ms});
      win_d = win_g = win_match = 0.0;
      win_iters = 0;
      if (gap.all_band_gap < result.best_gap) {
        result.best_gap = gap.all_band_gap;
        result.best_iteration = iter;
        result.best_model = result.model.clone();
      }
      if (iter == cfg.iterations) last_samples = std::move(fakes);
      if (writing) {
        char name[48];
        std::snprintf(name, sizeof(name), "iter_%06ld.ckpt", iter);
        save_checkpoint(result.model, iter,
                        (fs::path(out_dir) / "checkpoints" / name).string());
      }
      if (iter == cfg.iterations) break;  // no duplicate final row
    }
  }
  result.fdrop_count = fdrop_invocations() - fdrop_before;

  if (writing) {
    write_metrics_csv(result.log, (fs::path(out_dir) / "metrics.csv").string());
    save_checkpoint(result.model, cfg.iterations,
                    (fs::path(out_dir) / "final.ckpt").string());
    save_checkpoint(result.best_model, result.best_iteration,
                    (fs::path(out_dir) / "best.ckpt").string());
    io::write_tensor_set((fs::path(out_dir) / "eval_set.fgt").string(),
                         eval_set);
    io::write_tensor_set((fs::path(out_dir) / "samples.fgt").string(),
                         last_samples);
    const int grid_n = std::min<int>(64, static_cast<int>(last_samples.size()));
    io::save_image_png(
        (fs::path(out_dir) / "samples_grid.png").string(),
        io::image_grid({last_samples.begin(), last_samples.begin() + grid_n},
                       8));
    nlohmann::json manifest;
    manifest["command"] = "train";
    manifest["config"] = config_to_json(cfg);
    manifest["outputs"] = {"metrics.csv", "final.ckpt", "best.ckpt",
                           "eval_set.fgt", "samples.fgt", "samples_grid.png",
                           "checkpoints/"};
    io::write_manifest(out_dir, manifest);
  }
  return result;
}

std::vector<SweepCell> sweep(const ExperimentConfig& base,
                             const std::vector<double>& gammas,
                             const std::vector<double>& lambdas,
                             const Dataset& data, const std::string& out_dir) {
  if (gammas.empty() || lambdas.empty())
    throw ContractError("sweep: empty grid");
  namespace fs = std::filesystem;
  const bool writing = !out_dir.empty();
  if (writing) fs::create_directories(out_dir);
  std::vector<SweepCell> cells;
  for (double g : gammas)
    for (double l : lambdas) {
      ExperimentConfig cfg = base;
      cfg.gamma = g;
      cfg.lambda = l;
      cfg.seed = mix_seed(mix_seed(base.seed, std::bit_cast<std::uint64_t>(g)),
                          std::bit_cast<std::uint64_t>(l));
      std::string cell_dir;
      if (writing) {
        char name[64];
        std::snprintf(name, sizeof(name), "cell_g%.3f_l%.0e", g, l);
        cell_dir = (fs::path(out_dir) / name).string();
      }
      TrainResult r = train_gan(cfg, data, cell_dir);
      const EvalRecord& last = r.log.rows.back();
      cells.push_back({g, l, cfg.seed, last.gap, last.lower_band_gap,
                       last.d_loss, last.g_loss});
    }
  if (writing) {
    std::ofstream out(fs::path(out_dir) / "summary.csv");
    out << "gamma,lambda,seed,gap,lower_band_gap,d_loss,g_loss\n";
    for (const SweepCell& c : cells)
      out << io::format_double(c.gamma) << "," << io::format_double(c.lambda)
          << "," << c.seed << "," << io::format_double(c.gap) << ","
          << io::format_double(c.lower_band_gap) << ","
          << io::format_double(c.d_loss) << "," << io::format_double(c.g_loss)
          << "\n";
    nlohmann::json manifest;
    manifest["command"] = "sweep";
    manifest["config"] = config_to_json(base);
    manifest["outputs"] = {"summary.csv"};
    io::write_manifest(out_dir, manifest);
  }
  return cells;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write metrics: " + path);
  out << "iteration,d_loss,g_loss,match_loss,gap,lower_band_gap,wall_ms\n";
  for (const EvalRecord& r : log.rows)
    out << r.iteration << "," << io::format_double(r.d_loss) << ","
        << io::format_double(r.g_loss) << "," << io::format_double(r.match_loss)
        << "," << io::format_double(r.gap) << ","
        << io::format_double(r.lower_band_gap) << ","
        << io::format_double(r.wall_ms) << "\n";
  if (!out) throw IngestError("metrics write failed: " + path);
}

}  // namespace freqgan
