#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"
#include "fakeaudio/random.hpp"
#include "fakeaudio/trainer.hpp"

namespace fakeaudio::train {

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("lr must be positive");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.checkpoint_every < 1 || c.checkpoint_every > c.epochs || c.epochs % c.checkpoint_every != 0) {
    throw ConfigError("checkpoint_every must divide epochs");
  }
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
}

std::uint64_t stream_seed(std::uint64_t run_seed, SeedStream stream) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(stream));
}

TrainRunResult train_one_run(std::span<const store::FeatureVector> train,
                             std::span<const store::FeatureVector> validation, const TrainConfig& config,
                             std::uint64_t run_seed, const TrainHooks& hooks) {
  validate(config);
  if (train.empty()) throw ConfigError("training set is empty");
  if (validation.empty()) throw ConfigError("validation set is empty");

  const Eigen::MatrixXd x = eval::feature_matrix(train);
  const Eigen::VectorXd y = eval::label_vector(train);
  const auto dim = static_cast<std::size_t>(x.cols());
  if (validation.front().features.size() != dim) throw ShapeError("validation feature dim differs from training");

  TrainRunResult result;
  result.run_seed = run_seed;
  nn::MlpModel model = nn::init_model(dim, config.dropout_p, stream_seed(run_seed, SeedStream::kInit));
  nn::AdamState adam = nn::AdamState::for_model(model, nn::AdamHyper{.lr = config.lr});
  Rng shuffle_rng(stream_seed(run_seed, SeedStream::kShuffle));
  const std::uint64_t dropout_base = stream_seed(run_seed, SeedStream::kDropout);

  const std::size_t n = train.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::uint64_t batch_counter = 0;
  bool have_selection = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    auto& batch_losses = result.batch_losses.emplace_back();

    for (std::size_t start = 0, b = 0; start < n; start += config.batch_size, ++b) {
      const auto rows = static_cast<Eigen::Index>(std::min(config.batch_size, n - start));
      Eigen::MatrixXd xb(rows, x.cols());
      Eigen::VectorXd yb(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[start + static_cast<std::size_t>(r)];
        xb.row(r) = x.row(src);
        yb[r] = y[src];
      }

      const auto fwd = nn::forward(model, xb, nn::Mode::kTrain, derive_seed(dropout_base, batch_counter++));
      const double batch_loss = nn::mean_bce_loss(yb, fwd.likelihoods);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      batch_losses.push_back(batch_loss);
      loss_sum += batch_loss * static_cast<double>(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const bool fake = fwd.likelihoods[r] >= config.threshold;
        correct += fake == (yb[r] == 1.0);
      }

      nn::adam_step(model, adam, nn::backward(model, fwd.cache, yb));
    }

    const double epoch_loss = loss_sum / static_cast<double>(n);
    const double epoch_acc = static_cast<double>(correct) / static_cast<double>(n);
    result.epoch_train_loss.push_back(epoch_loss);
    result.epoch_train_accuracy.push_back(epoch_acc);
    if (hooks.on_epoch) hooks.on_epoch(run_seed, epoch, epoch_loss, epoch_acc);

    if (epoch % config.checkpoint_every == 0) {
      const double val_acc = eval::accuracy(model, validation, config.threshold);
      result.checkpoints.push_back({epoch, val_acc});
      if (!have_selection || val_acc > result.selected_validation_accuracy) {
        have_selection = true;
        result.selected_epoch = epoch;
        result.selected_validation_accuracy = val_acc;
        result.model = model;
      }
      if (hooks.on_checkpoint) hooks.on_checkpoint(run_seed, epoch, model, adam);
    }
  }
  return result;
}

AccuracySummary summarize(std::span<const double> values) {
  AccuracySummary s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string format_mean_std(const AccuracySummary& summary, int decimals, bool as_percent) {
  const double scale = as_percent ? 100.0 : 1.0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f \xC2\xB1 %.*f", decimals, scale * summary.mean, decimals, scale * summary.std);
  return buf;
}

RunManyResult run_many(std::span<const store::FeatureVector> train, std::span<const store::FeatureVector> validation,
                       std::span<const store::FeatureVector> evaluation, const TrainConfig& config,
                       const TrainHooks& hooks) {
  validate(config);
  if (evaluation.empty()) throw ConfigError("evaluation set is empty");

  RunManyResult result;
  result.runs.resize(config.runs);
  result.evaluation_accuracies.resize(config.runs);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_run = config.runs;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.runs) return;
      try {
        auto run = train_one_run(train, validation, config, config.seed + i, hooks);
        result.evaluation_accuracies[i] = eval::accuracy(run.model, evaluation, config.threshold);
        result.runs[i] = std::move(run);
      } catch (...) {
        // Report the lowest-index failure so errors are deterministic too.
        std::lock_guard lock(error_mutex);
        if (i < first_error_run) {
          first_error_run = i;
          first_error = std::current_exception();
        }
      }
    }
  };

  const std::size_t jobs = std::min(config.jobs, config.runs);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  result.summary = summarize(result.evaluation_accuracies);
  return result;
}

nlohmann::json to_json(const TrainRunResult& run, std::optional<double> evaluation_accuracy) {
  nlohmann::json checkpoints = nlohmann::json::array();
  for (const auto& c : run.checkpoints) {
    checkpoints.push_back({{"epoch", c.epoch}, {"validation_accuracy", c.validation_accuracy}});
  }
  nlohmann::json j = {
      {"run_seed", run.run_seed},
      {"epoch_train_loss", run.epoch_train_loss},
      {"epoch_train_accuracy", run.epoch_train_accuracy},
      {"checkpoints", checkpoints},
      {"selected_epoch", run.selected_epoch},
      {"selected_validation_accuracy", run.selected_validation_accuracy},
  };
  if (evaluation_accuracy) j["evaluation_accuracy"] = *evaluation_accuracy;
  return j;
}

nlohmann::json to_json(const RunManyResult& result, const TrainConfig& config, const std::string& embedding) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    runs.push_back(to_json(result.runs[i], result.evaluation_accuracies[i]));
  }
  return {
      {"embedding", embedding},
      {"config",
       {{"lr", config.lr},
        {"batch_size", config.batch_size},
        {"epochs", config.epochs},
        {"checkpoint_every", config.checkpoint_every},
        {"threshold", config.threshold},
        {"dropout", config.dropout_p},
        {"seed", config.seed},
        {"runs", config.runs}}},
      {"evaluation_accuracies", result.evaluation_accuracies},
      {"mean", result.summary.mean},
      {"std", result.summary.std},
      {"formatted", format_mean_std(result.summary)},
      {"runs", runs},
  };
}

}  // namespace fakeaudio::train
