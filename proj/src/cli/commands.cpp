#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fakeaudio/analysis.hpp"
#include "fakeaudio/cli.hpp"
#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"
#include "fakeaudio/nn.hpp"
#include "fakeaudio/random.hpp"

namespace fakeaudio::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw FormatError("'" + path.string() + "' is not valid JSON");
  return j;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " '" + path.string() + "' does not exist");
}

json manifest_to_json(const store::DatasetSplit& split) {
  return {
      {"seed", split.seed},
      {"proportions", {split.proportions.train, split.proportions.validation, split.proportions.evaluation}},
      {"counts",
       {{"train", split.train.size()}, {"validation", split.validation.size()}, {"evaluation", split.evaluation.size()}}},
      {"train", split.train},
      {"validation", split.validation},
      {"evaluation", split.evaluation},
  };
}

store::DatasetSplit read_manifest(const fs::path& path) {
  const auto j = read_json(path);
  store::DatasetSplit split;
  try {
    split.seed = j.at("seed").get<std::uint64_t>();
    const auto p = j.at("proportions").get<std::vector<double>>();
    if (p.size() != 3) throw FormatError("manifest proportions must have three entries");
    split.proportions = {p[0], p[1], p[2]};
    split.train = j.at("train").get<std::vector<std::string>>();
    split.validation = j.at("validation").get<std::vector<std::string>>();
    split.evaluation = j.at("evaluation").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("manifest '" + path.string() + "' malformed: " + e.what());
  }
  return split;
}

std::vector<store::FeatureVector> fakes_only(std::vector<store::FeatureVector> features) {
  std::erase_if(features, [](const auto& f) { return f.label != store::Label::kFake; });
  return features;
}

// --- split -----------------------------------------------------------------

store::DatasetSplit do_split(const fs::path& container, const store::Proportions& proportions, std::uint64_t seed,
                             const fs::path& out_path) {
  const auto records = store::read_container_file(container);
  auto split = store::split_dataset(records, proportions, seed);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_json(out_path, manifest_to_json(split));
  return split;
}

// --- train -----------------------------------------------------------------

struct TrainOutcome {
  train::RunManyResult result;
  std::vector<store::FeatureVector> evaluation;
};

TrainOutcome do_train(const ExperimentConfig& cfg, const store::DatasetSplit& split,
                      const std::vector<store::EmbeddingRecord>& records, bool save_optimizer, std::ostream& out,
                      std::ostream& err) {
  const auto features = store::time_average(records);
  const auto balanced = store::balance_training_set(split.train, records, *cfg.seed);
  const auto train_set = store::select(features, balanced);
  const auto validation = store::select(features, split.validation);
  auto evaluation = store::select(features, split.evaluation);

  fs::create_directories(cfg.out_dir);
  std::mutex log_mutex;
  train::TrainHooks hooks;
  hooks.on_epoch = [&](std::uint64_t run_seed, std::size_t epoch, double loss, double acc) {
    std::lock_guard lock(log_mutex);
    err << "run " << run_seed << " epoch " << epoch << "/" << cfg.train.epochs << " loss " << loss << " acc " << acc
        << '\n';
  };
  hooks.on_checkpoint = [&](std::uint64_t run_seed, std::size_t epoch, const nn::MlpModel& model,
                            const nn::AdamState& adam) {
    const auto name = std::to_string(run_seed) + "_" + std::to_string(epoch) + ".mlpc";
    nn::save_checkpoint(cfg.out_dir / name, model, save_optimizer ? &adam : nullptr);
  };

  auto result = train::run_many(train_set, validation, evaluation, cfg.train, hooks);

  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    const auto seed = std::to_string(run.run_seed);
    write_json(cfg.out_dir / ("run_" + seed + ".json"), train::to_json(run, result.evaluation_accuracies[i]));
    nn::save_checkpoint(cfg.out_dir / ("best_" + seed + ".mlpc"), run.model);
  }
  write_json(cfg.out_dir / "summary.json", train::to_json(result, cfg.train, cfg.embedding));
  out << "evaluation accuracy over " << result.summary.n << " run(s): " << train::format_mean_std(result.summary)
      << " %\n";
  return {std::move(result), std::move(evaluation)};
}

// --- evaluate / benchmark / correlate ----------------------------------------

eval::EvalReport do_evaluate(const nn::MlpModel& model, std::span<const store::FeatureVector> set, double threshold,
                             const std::string& embedding, const fs::path& out_path, std::ostream& out) {
  const auto report = eval::evaluate(model, set, threshold);
  auto j = eval::to_json(report);
  j["embedding"] = embedding;
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json(out_path, j);
    out << eval::render_confusion(report, embedding) << '\n' << eval::render_per_class(report);
  }
  return report;
}

eval::TimingReport do_benchmark(const nn::MlpModel& model, const std::vector<store::EmbeddingRecord>& records,
                                const std::string& clip_id, std::uint64_t seed, std::size_t runs,
                                double clip_duration, const fs::path& out_path, std::ostream& out) {
  if (records.empty()) throw ValidationError("container holds no records to benchmark");
  const store::EmbeddingRecord* sample = nullptr;
  if (clip_id.empty()) {
    Rng rng(derive_seed(seed, 0xBE4C));
    sample = &records[rng.uniform_index(records.size())];
  } else {
    for (const auto& r : records) {
      if (r.clip_id == clip_id) sample = &r;
    }
    if (!sample) throw ValidationError("clip '" + clip_id + "' not in container");
  }
  const auto report = eval::benchmark_inference(model, *sample, runs, clip_duration);
  const auto j = eval::to_json(report);
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json(out_path, j);
    out << eval::render_timing(report);
  }
  return report;
}

analysis::CorrelationReport do_correlate(const nn::MlpModel& model, std::span<const store::FeatureVector> fake_clips,
                                         const fs::path& fad_path, const fs::path& out_path, std::ostream& out,
                                         std::ostream& err) {
  const auto scores = analysis::score_generators(model, fake_clips);
  const auto fad = store::read_fad_csv_file(fad_path);
  auto join = analysis::attach_fad(scores, fad);
  auto report = analysis::correlate_tracks(join.scores);
  report.warnings.insert(report.warnings.begin(), join.warnings.begin(), join.warnings.end());
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  const auto j = analysis::to_json(report);
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json(out_path, j);
    for (const auto& t : report.tracks) {
      out << "track " << store::to_string(t.track) << ": r = " << t.r << " over " << t.n << " generators\n";
    }
  }
  return report;
}

std::vector<double> accuracies_from_summary(const fs::path& path) {
  const auto j = read_json(path);
  std::vector<double> acc;
  if (j.contains("evaluation_accuracies")) {
    acc = j.at("evaluation_accuracies").get<std::vector<double>>();
  } else if (j.contains("evaluation_accuracy")) {
    acc.push_back(j.at("evaluation_accuracy").get<double>());
  }
  if (acc.empty()) throw ValidationError("'" + path.string() + "' holds no evaluation accuracies");
  return acc;
}

// Flags shared by train and pipeline. Values only override the config file
// when given explicitly.
struct TrainFlags {
  std::string config_path;
  std::string container, manifest, fad, out, embedding, proportions;
  std::uint64_t seed = 0;
  std::size_t runs = 0, epochs = 0, batch_size = 0, checkpoint_every = 0, jobs = 0;
  double lr = 0, dropout = 0, threshold = 0;
  bool no_optimizer_state = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* cmd, bool with_manifest) {
    opts["config"] = cmd->add_option("--config", config_path, "JSON experiment config");
    opts["container"] = cmd->add_option("--container", container, "EMBD container");
    if (with_manifest) opts["manifest"] = cmd->add_option("--manifest", manifest, "split manifest JSON");
    opts["fad"] = cmd->add_option("--fad", fad, "FAD score CSV");
    opts["out"] = cmd->add_option("--out", out, "output directory");
    opts["embedding"] = cmd->add_option("--embedding", embedding, "embedding name tag");
    opts["proportions"] = cmd->add_option("--proportions", proportions, "split proportions a,b,c");
    opts["seed"] = cmd->add_option("--seed", seed, "base seed");
    opts["runs"] = cmd->add_option("--runs", runs, "training runs");
    opts["epochs"] = cmd->add_option("--epochs", epochs, "epochs per run");
    opts["batch-size"] = cmd->add_option("--batch-size", batch_size, "mini-batch size");
    opts["lr"] = cmd->add_option("--lr", lr, "Adam learning rate");
    opts["dropout"] = cmd->add_option("--dropout", dropout, "dropout probability");
    opts["threshold"] = cmd->add_option("--threshold", threshold, "decision threshold");
    opts["checkpoint-every"] = cmd->add_option("--checkpoint-every", checkpoint_every, "checkpoint period in epochs");
    opts["jobs"] = cmd->add_option("--jobs", jobs, "parallel runs");
    cmd->add_flag("--no-optimizer-state", no_optimizer_state, "omit Adam state from checkpoints");
  }

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (given("config")) cfg = load_experiment_config(config_path);
    if (given("container")) cfg.container = container;
    if (given("manifest")) cfg.manifest = manifest;
    if (given("fad")) cfg.fad_csv = fad;
    if (given("out")) cfg.out_dir = out;
    if (given("embedding")) cfg.embedding = embedding;
    if (given("proportions")) cfg.proportions = store::parse_proportions(proportions);
    if (given("seed")) cfg.seed = seed;
    if (given("runs")) cfg.train.runs = runs;
    if (given("epochs")) cfg.train.epochs = epochs;
    if (given("batch-size")) cfg.train.batch_size = batch_size;
    if (given("lr")) cfg.train.lr = lr;
    if (given("dropout")) cfg.train.dropout_p = dropout;
    if (given("threshold")) cfg.train.threshold = threshold;
    if (given("checkpoint-every")) cfg.train.checkpoint_every = checkpoint_every;
    if (given("jobs")) cfg.train.jobs = jobs;
    if (cfg.seed) cfg.train.seed = *cfg.seed;
    return cfg;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train, evaluate and analyze fake environmental audio detectors on precomputed embeddings.",
               "fakeaudio"};
  app.require_subcommand(1);

  // split
  auto* split_cmd = app.add_subcommand("split", "Stratified train/validation/evaluation split of a container");
  std::string split_container, split_out, split_props = "0.7,0.1,0.2";
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--container", split_container, "EMBD container")->required();
  split_cmd->add_option("--proportions", split_props, "split proportions a,b,c")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "shuffle seed")->required();
  split_cmd->add_option("--out", split_out, "manifest JSON path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train detector runs and write checkpoints and summaries");
  TrainFlags train_flags;
  train_flags.attach(train_cmd, /*with_manifest=*/true);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Confusion matrix and per-class accuracy of a checkpoint");
  std::string eval_model, eval_container, eval_manifest, eval_out, eval_embedding;
  double eval_threshold = 0.5;
  eval_cmd->add_option("--model", eval_model, "MLPC checkpoint")->required();
  eval_cmd->add_option("--container", eval_container, "EMBD container")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "split manifest; evaluates its evaluation subset");
  eval_cmd->add_option("--threshold", eval_threshold, "decision threshold")->capture_default_str();
  eval_cmd->add_option("--embedding", eval_embedding, "embedding name tag");
  eval_cmd->add_option("--out", eval_out, "report JSON path (default: JSON on stdout)");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "Time the classifier path on one clip");
  std::string bench_model, bench_container, bench_clip, bench_out;
  std::size_t bench_runs = 100;
  std::uint64_t bench_seed = 0;
  double bench_duration = 4.0;
  bench_cmd->add_option("--model", bench_model, "MLPC checkpoint")->required();
  bench_cmd->add_option("--container", bench_container, "EMBD container")->required();
  bench_cmd->add_option("--runs", bench_runs, "timed runs")->capture_default_str();
  bench_cmd->add_option("--clip-id", bench_clip, "clip to time (default: seeded random pick)");
  bench_cmd->add_option("--seed", bench_seed, "seed for the random pick")->capture_default_str();
  bench_cmd->add_option("--clip-duration", bench_duration, "clip length in seconds")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "report JSON path (default: JSON on stdout)");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Mann-Whitney U test between two training summaries");
  std::string cmp_a, cmp_b, cmp_out;
  cmp_cmd->add_option("summary_a", cmp_a, "summary JSON A")->required();
  cmp_cmd->add_option("summary_b", cmp_b, "summary JSON B")->required();
  cmp_cmd->add_option("--out", cmp_out, "result JSON path (default: stdout)");

  // correlate
  auto* corr_cmd = app.add_subcommand("correlate", "Correlate per-generator detector scores with FAD");
  std::string corr_model, corr_container, corr_fad, corr_manifest, corr_out;
  corr_cmd->add_option("--model", corr_model, "MLPC checkpoint")->required();
  corr_cmd->add_option("--container", corr_container, "EMBD container")->required();
  corr_cmd->add_option("--fad", corr_fad, "FAD score CSV")->required();
  corr_cmd->add_option("--manifest", corr_manifest, "split manifest; restricts to its evaluation subset");
  corr_cmd->add_option("--out", corr_out, "report JSON path (default: stdout)");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "split, train, evaluate, benchmark and (optionally) correlate");
  TrainFlags pipe_flags;
  pipe_flags.attach(pipe_cmd, /*with_manifest=*/false);
  std::size_t pipe_bench_runs = 100;
  pipe_cmd->add_option("--benchmark-runs", pipe_bench_runs, "timed benchmark runs")->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("fakeaudio");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*split_cmd) {
      require_file(split_container, "container");
      const auto props = store::parse_proportions(split_props);
      const auto split = do_split(split_container, props, split_seed, split_out);
      out << "split: " << split.train.size() << " train / " << split.validation.size() << " validation / "
          << split.evaluation.size() << " evaluation\n";
    } else if (*train_cmd) {
      const auto cfg = train_flags.resolve();
      check_experiment_config(cfg, /*need_manifest=*/true);
      const auto records = store::read_container_file(cfg.container);
      const auto split = read_manifest(cfg.manifest);
      do_train(cfg, split, records, !train_flags.no_optimizer_state, out, err);
    } else if (*eval_cmd) {
      require_file(eval_model, "model");
      require_file(eval_container, "container");
      if (!eval_manifest.empty()) require_file(eval_manifest, "manifest");
      const auto model = nn::load_checkpoint(eval_model).model;
      auto features = store::time_average(store::read_container_file(eval_container));
      if (!eval_manifest.empty()) features = store::select(features, read_manifest(eval_manifest).evaluation);
      do_evaluate(model, features, eval_threshold, eval_embedding, eval_out, out);
    } else if (*bench_cmd) {
      require_file(bench_model, "model");
      require_file(bench_container, "container");
      if (bench_runs < 1) throw ConfigError("--runs must be >= 1");
      const auto model = nn::load_checkpoint(bench_model).model;
      const auto records = store::read_container_file(bench_container);
      do_benchmark(model, records, bench_clip, bench_seed, bench_runs, bench_duration, bench_out, out);
    } else if (*cmp_cmd) {
      require_file(cmp_a, "summary");
      require_file(cmp_b, "summary");
      const auto result = analysis::mann_whitney_u(accuracies_from_summary(cmp_a), accuracies_from_summary(cmp_b));
      const auto j = analysis::to_json(result);
      if (cmp_out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        write_json(cmp_out, j);
        out << "U = " << result.u << ", p = " << result.p_value << '\n';
      }
    } else if (*corr_cmd) {
      require_file(corr_model, "model");
      require_file(corr_container, "container");
      require_file(corr_fad, "FAD table");
      if (!corr_manifest.empty()) require_file(corr_manifest, "manifest");
      const auto model = nn::load_checkpoint(corr_model).model;
      auto features = store::time_average(store::read_container_file(corr_container));
      if (!corr_manifest.empty()) features = store::select(features, read_manifest(corr_manifest).evaluation);
      do_correlate(model, fakes_only(std::move(features)), corr_fad, corr_out, out, err);
    } else if (*pipe_cmd) {
      auto cfg = pipe_flags.resolve();
      check_experiment_config(cfg, /*need_manifest=*/false);
      if (pipe_bench_runs < 1) throw ConfigError("--benchmark-runs must be >= 1");
      const fs::path root = cfg.out_dir;
      fs::create_directories(root);
      const auto records = store::read_container_file(cfg.container);

      auto split = store::split_dataset(records, cfg.proportions, *cfg.seed);
      write_json(root / "manifest.json", manifest_to_json(split));
      cfg.manifest = root / "manifest.json";

      cfg.out_dir = root / "train";
      const auto outcome = do_train(cfg, split, records, !pipe_flags.no_optimizer_state, out, err);
      const auto& accs = outcome.result.evaluation_accuracies;
      const std::size_t best = static_cast<std::size_t>(std::max_element(accs.begin(), accs.end()) - accs.begin());
      const auto& model = outcome.result.runs[best].model;
      out << "best run: seed " << outcome.result.runs[best].run_seed << '\n';

      do_evaluate(model, outcome.evaluation, cfg.train.threshold, cfg.embedding, root / "eval.json", out);
      do_benchmark(model, records, "", *cfg.seed, pipe_bench_runs, 4.0, root / "benchmark.json", out);
      if (!cfg.fad_csv.empty()) {
        do_correlate(model, fakes_only(outcome.evaluation), cfg.fad_csv, root / "correlation.json", out, err);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace fakeaudio::cli
