#include <fstream>

#include <json.hpp>

#include "fakeaudio/cli.hpp"
#include "fakeaudio/error.hpp"

namespace fakeaudio::cli {

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file '" + path.string() + "' is not a JSON object");

  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "container") cfg.container = value.get<std::string>();
      else if (key == "manifest") cfg.manifest = value.get<std::string>();
      else if (key == "fad") cfg.fad_csv = value.get<std::string>();
      else if (key == "out") cfg.out_dir = value.get<std::string>();
      else if (key == "embedding") cfg.embedding = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "proportions") {
        if (value.is_string()) {
          cfg.proportions = store::parse_proportions(value.get<std::string>());
        } else {
          const auto p = value.get<std::vector<double>>();
          if (p.size() != 3) throw ConfigError("proportions must have three entries");
          cfg.proportions = {p[0], p[1], p[2]};
        }
      }
      else if (key == "runs") cfg.train.runs = value.get<std::size_t>();
      else if (key == "epochs") cfg.train.epochs = value.get<std::size_t>();
      else if (key == "batch_size") cfg.train.batch_size = value.get<std::size_t>();
      else if (key == "lr") cfg.train.lr = value.get<double>();
      else if (key == "dropout") cfg.train.dropout_p = value.get<double>();
      else if (key == "threshold") cfg.train.threshold = value.get<double>();
      else if (key == "checkpoint_every") cfg.train.checkpoint_every = value.get<std::size_t>();
      else if (key == "jobs") cfg.train.jobs = value.get<std::size_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return cfg;
}

void check_experiment_config(const ExperimentConfig& cfg, bool need_manifest) {
  if (!cfg.seed) throw ConfigError("a seed is required (--seed)");
  if (cfg.container.empty()) throw ConfigError("a container path is required (--container)");
  if (!std::filesystem::exists(cfg.container)) throw ConfigError("container '" + cfg.container.string() + "' does not exist");
  if (need_manifest) {
    if (cfg.manifest.empty()) throw ConfigError("a split manifest is required (--manifest)");
    if (!std::filesystem::exists(cfg.manifest)) throw ConfigError("manifest '" + cfg.manifest.string() + "' does not exist");
  }
  if (!cfg.fad_csv.empty() && !std::filesystem::exists(cfg.fad_csv)) {
    throw ConfigError("FAD table '" + cfg.fad_csv.string() + "' does not exist");
  }
  if (cfg.out_dir.empty()) throw ConfigError("an output directory is required (--out)");
  store::validate(cfg.proportions);
  train::validate(cfg.train);
}

}  // namespace fakeaudio::cli
