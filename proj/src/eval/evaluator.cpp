#include <algorithm>
#include <chrono>
#include <string>

#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"

namespace fakeaudio::eval {

Eigen::MatrixXd feature_matrix(std::span<const store::FeatureVector> features) {
  if (features.empty()) return {};
  const auto dim = features.front().features.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i].features;
    if (f.size() != dim) throw ShapeError("clip '" + features[i].clip_id + "' has a different feature dim");
    for (std::size_t j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
  }
  return x;
}

Eigen::VectorXd label_vector(std::span<const store::FeatureVector> features) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = features[i].label == store::Label::kFake ? 1.0 : 0.0;
  }
  return y;
}

Eigen::VectorXd likelihoods(const nn::MlpModel& model, std::span<const store::FeatureVector> features,
                            std::size_t chunk_rows) {
  chunk_rows = std::max<std::size_t>(chunk_rows, 1);
  Eigen::VectorXd out(static_cast<Eigen::Index>(features.size()));
  for (std::size_t start = 0; start < features.size(); start += chunk_rows) {
    const auto count = std::min(chunk_rows, features.size() - start);
    const auto x = feature_matrix(features.subspan(start, count));
    if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
      throw ShapeError("feature dim " + std::to_string(x.cols()) + " does not match model input dim " +
                       std::to_string(model.input_dim()));
    }
    out.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = nn::predict(model, x);
  }
  return out;
}

std::vector<Prediction> predict(const nn::MlpModel& model, std::span<const store::FeatureVector> features,
                                double threshold) {
  const auto p = likelihoods(model, features);
  std::vector<Prediction> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& pred = out[i];
    pred.clip_id = features[i].clip_id;
    pred.sound_class = features[i].sound_class;
    pred.likelihood = p[static_cast<Eigen::Index>(i)];
    pred.label = features[i].label;
    pred.decision = decide(pred.likelihood, threshold);
  }
  return out;
}

double accuracy(const nn::MlpModel& model, std::span<const store::FeatureVector> features, double threshold) {
  if (features.empty()) throw ConfigError("accuracy of an empty set is undefined");
  const auto p = likelihoods(model, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    correct += decide(p[static_cast<Eigen::Index>(i)], threshold) == features[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

double ConfusionMatrix::percent(store::Label predicted, store::Label actual) const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(at(predicted, actual)) / static_cast<double>(n);
}

EvalReport report_from_predictions(std::span<const Prediction> predictions, double threshold) {
  if (predictions.empty()) throw ConfigError("cannot evaluate an empty set");
  EvalReport report;
  report.threshold = threshold;
  report.n_examples = predictions.size();
  std::uint64_t correct = 0;
  for (const auto& p : predictions) {
    report.confusion.counts[static_cast<int>(p.decision)][static_cast<int>(p.label)] += 1;
    auto& cls = report.per_class[p.sound_class];
    cls.total += 1;
    if (p.decision == p.label) {
      cls.correct += 1;
      correct += 1;
    }
  }
  report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(report.n_examples);
  return report;
}

EvalReport evaluate(const nn::MlpModel& model, std::span<const store::FeatureVector> features, double threshold) {
  if (features.empty()) throw ConfigError("cannot evaluate an empty set");
  const auto predictions = predict(model, features, threshold);
  return report_from_predictions(predictions, threshold);
}

double percent_of_realtime(double mean_seconds, double clip_duration_seconds) {
  return 100.0 * mean_seconds / clip_duration_seconds;
}

namespace {

template <typename Fn>
TimingReport time_runs(std::size_t runs, double clip_duration, Fn&& once) {
  if (runs == 0) throw ConfigError("benchmark needs at least one run");
  if (!(clip_duration > 0.0)) throw ConfigError("clip duration must be positive");
  using Clock = std::chrono::steady_clock;

  volatile double sink = once();  // warm-up, not recorded
  TimingReport report;
  report.runs = runs;
  report.clip_duration_seconds = clip_duration;
  report.run_seconds.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto start = Clock::now();
    sink = once();
    const auto stop = Clock::now();
    report.run_seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  (void)sink;

  double total = 0.0;
  for (double s : report.run_seconds) total += s;
  report.mean_seconds = total / static_cast<double>(runs);
  auto sorted = report.run_seconds;
  std::sort(sorted.begin(), sorted.end());
  report.median_seconds = runs % 2 == 1 ? sorted[runs / 2] : 0.5 * (sorted[runs / 2 - 1] + sorted[runs / 2]);
  report.percent_of_realtime = percent_of_realtime(report.mean_seconds, clip_duration);
  return report;
}

Eigen::MatrixXd row_of(const std::vector<double>& f) {
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(f.size()));
  for (std::size_t j = 0; j < f.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = f[j];
  return x;
}

}  // namespace

TimingReport benchmark_inference(const nn::MlpModel& model, const store::FeatureVector& sample, std::size_t runs,
                                 double clip_duration_seconds) {
  if (sample.features.size() != model.input_dim()) throw ShapeError("sample dim does not match model input dim");
  auto report = time_runs(runs, clip_duration_seconds, [&] { return nn::predict(model, row_of(sample.features))[0]; });
  report.clip_id = sample.clip_id;
  report.includes_time_average = false;
  return report;
}

TimingReport benchmark_inference(const nn::MlpModel& model, const store::EmbeddingRecord& sample, std::size_t runs,
                                 double clip_duration_seconds) {
  if (sample.dim != model.input_dim()) throw ShapeError("sample dim does not match model input dim");
  store::validate(sample);
  auto report = time_runs(runs, clip_duration_seconds, [&] {
    const auto fv = store::time_average(sample);
    return nn::predict(model, row_of(fv.features))[0];
  });
  report.clip_id = sample.clip_id;
  report.includes_time_average = true;
  return report;
}

}  // namespace fakeaudio::eval
