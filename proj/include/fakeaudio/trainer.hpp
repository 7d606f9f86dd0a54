#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakeaudio/nn.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::train {

struct TrainConfig {
  double lr = 7e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::size_t checkpoint_every = 10;
  double threshold = 0.5;
  double dropout_p = nn::kDefaultDropout;
  std::uint64_t seed = 0;
  std::size_t runs = 10;
  std::size_t jobs = 1;  // run-level parallelism; results do not depend on it
};

// Throws ConfigError naming the offending field.
void validate(const TrainConfig& config);

struct CheckpointRecord {
  std::size_t epoch = 0;
  double validation_accuracy = 0.0;
};

struct TrainRunResult {
  std::uint64_t run_seed = 0;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_train_accuracy;
  std::vector<std::vector<double>> batch_losses;  // [epoch][batch]
  std::vector<CheckpointRecord> checkpoints;
  std::size_t selected_epoch = 0;
  double selected_validation_accuracy = 0.0;
  nn::MlpModel model;  // parameters at selected_epoch
};

// Hooks may be invoked concurrently from different runs when jobs > 1.
struct TrainHooks {
  std::function<void(std::uint64_t run_seed, std::size_t epoch, const nn::MlpModel&, const nn::AdamState&)>
      on_checkpoint;
  std::function<void(std::uint64_t run_seed, std::size_t epoch, double loss, double accuracy)> on_epoch;
};

// Sub-seeds of a run. Fixed offsets so each component is reproducible alone.
enum class SeedStream : std::uint64_t { kInit = 0, kShuffle = 1, kDropout = 2 };
std::uint64_t stream_seed(std::uint64_t run_seed, SeedStream stream);

/// Mini-batch Adam on mean BCE. Each epoch reshuffles, trains on every batch
/// (the last one may be partial), and every `checkpoint_every` epochs scores
/// the validation set in eval mode and snapshots the model. The snapshot with
/// the highest validation accuracy is returned; the earliest wins ties.
TrainRunResult train_one_run(std::span<const store::FeatureVector> train,
                             std::span<const store::FeatureVector> validation, const TrainConfig& config,
                             std::uint64_t run_seed, const TrainHooks& hooks = {});

struct AccuracySummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 when n == 1
};

AccuracySummary summarize(std::span<const double> values);
// "mean ± std" with the given number of decimals, optionally scaled to percent.
std::string format_mean_std(const AccuracySummary& summary, int decimals = 2, bool as_percent = true);

struct RunManyResult {
  std::vector<TrainRunResult> runs;
  std::vector<double> evaluation_accuracies;
  AccuracySummary summary;
};

/// Runs seeds config.seed + 0 .. config.seed + runs - 1, up to config.jobs at
/// a time, and scores each selected model on `evaluation`.
RunManyResult run_many(std::span<const store::FeatureVector> train, std::span<const store::FeatureVector> validation,
                       std::span<const store::FeatureVector> evaluation, const TrainConfig& config,
                       const TrainHooks& hooks = {});

nlohmann::json to_json(const TrainRunResult& run, std::optional<double> evaluation_accuracy = std::nullopt);
nlohmann::json to_json(const RunManyResult& result, const TrainConfig& config, const std::string& embedding = "");

}  // namespace fakeaudio::train
