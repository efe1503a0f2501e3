#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "freqgan/dataset.hpp"
#include "freqgan/models.hpp"
#include "freqgan/objectives.hpp"
#include "freqgan/rng.hpp"

namespace freqgan {

/// Complete hyperparameter record of one experiment.
struct ExperimentConfig {
  double gamma = 0.8;
  double lambda = 1e-2;
  MatchVariant match_variant;
  Regularizer regularizer = Regularizer::kFMatch;
  int batch_size = 64;
  int critics = 5;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  long iterations = 5000;
  std::uint64_t seed = 1;
  long eval_every = 500;
  DatasetDescriptor dataset;
  GanArch arch;
};

struct EvalRecord {
  long iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double match_loss = 0.0;
  double gap = 0.0;
  double lower_band_gap = 0.0;
  double wall_ms = 0.0;
};

struct MetricsLog {
  std::vector<EvalRecord> rows;
};

struct IterRecord {
  long iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double match_loss = 0.0;
};

struct TrainResult {
  GanModel model;
  GanModel best_model;
  long best_iteration = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  MetricsLog log;
  std::vector<IterRecord> iter_losses;
  long fdrop_count = 0;
  long generator_updates = 0;
};

/// Seeded with-replacement batch source over the training slice of a dataset.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, long train_count, std::uint64_t seed);
  Tensor next(int batch);  // [B,C,H,W]

 private:
  const Dataset* data_;
  long train_count_;
  Rng rng_;
};

/// Seeded z ~ N(0,I) stream; draws are sequential, so a prefix of a longer
/// batch equals the shorter batch.
class NoiseStream {
 public:
  NoiseStream(int latent_dim, std::uint64_t seed);
  Tensor next(int batch);  // [B,latent_dim]

 private:
  int dim_;
  Rng rng_;
};

/// Sub-stream seeds used by train_gan, exposed so a reference loop can
/// reproduce the exact sampling sequences.
std::uint64_t data_stream_seed(std::uint64_t seed);
std::uint64_t noise_stream_seed(std::uint64_t seed);
std::uint64_t eval_sample_seed(std::uint64_t seed, long iteration);

/// Images held out for gap evaluation: min(512, count/4), at least 1.
long eval_holdout(long dataset_count);

/// Runs the full training loop: K critic steps per outer iteration, one
/// generator update on the first critic step using that step's pre-fetched
/// real batch for the regularizer; discriminator inputs pass through the
/// low-pass filter whenever gamma < 1; fakes enter the regularizer raw.
/// A non-empty out_dir receives checkpoints, metrics.csv, eval_set.fgt,
/// samples.fgt, a sample grid, and a manifest.
TrainResult train_gan(const ExperimentConfig& config, const Dataset& data,
                      const std::string& out_dir = "");

/// n generated images [C,H,W], deterministic per seed.
std::vector<Tensor> sample(const GanModel& model, int n, std::uint64_t seed);

struct SweepCell {
  double gamma = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double gap = 0.0;
  double lower_band_gap = 0.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// Grid of (gamma, lambda) cells; each cell's seed derives from the cell key,
/// so reordering the grid cannot change any cell's result.
std::vector<SweepCell> sweep(const ExperimentConfig& base,
                             const std::vector<double>& gammas,
                             const std::vector<double>& lambdas,
                             const Dataset& data,
                             const std::string& out_dir = "");

void write_metrics_csv(const MetricsLog& log, const std::string& path);

}  // namespace freqgan
