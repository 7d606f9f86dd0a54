#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fakeaudio/store.hpp"
#include "fakeaudio/trainer.hpp"

namespace fakeaudio::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Settings shared by `train` and `pipeline`. Loaded from a JSON file
/// (`--config`), then overridden by explicit flags.
struct ExperimentConfig {
  std::filesystem::path container;
  std::filesystem::path manifest;
  std::filesystem::path fad_csv;
  std::filesystem::path out_dir;
  std::string embedding;
  std::optional<std::uint64_t> seed;
  store::Proportions proportions;
  train::TrainConfig train;
};

// Reads the JSON keys container, manifest, fad, out, embedding, seed,
// proportions, runs, epochs, batch_size, lr, dropout, threshold,
// checkpoint_every and jobs. Unknown keys are a ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Throws ConfigError unless the seed is set and every non-empty input path
// exists; also validates the training settings.
void check_experiment_config(const ExperimentConfig& config, bool need_manifest);

// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fakeaudio::cli
