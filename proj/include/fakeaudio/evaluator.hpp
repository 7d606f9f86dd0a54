#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fakeaudio/nn.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::eval {

// Stacks feature vectors as rows. Throws ShapeError on ragged input.
Eigen::MatrixXd feature_matrix(std::span<const store::FeatureVector> features);
Eigen::VectorXd label_vector(std::span<const store::FeatureVector> features);

// Eval-mode likelihoods, computed in row chunks to bound memory.
Eigen::VectorXd likelihoods(const nn::MlpModel& model, std::span<const store::FeatureVector> features,
                            std::size_t chunk_rows = 4096);

// A likelihood exactly at the threshold counts as fake.
inline store::Label decide(double likelihood, double threshold) noexcept {
  return likelihood >= threshold ? store::Label::kFake : store::Label::kNonfake;
}

struct Prediction {
  std::string clip_id;
  store::SoundClass sound_class = store::SoundClass::kDogBark;
  double likelihood = 0.0;
  store::Label label = store::Label::kNonfake;
  store::Label decision = store::Label::kNonfake;
};

std::vector<Prediction> predict(const nn::MlpModel& model, std::span<const store::FeatureVector> features,
                                double threshold = 0.5);

double accuracy(const nn::MlpModel& model, std::span<const store::FeatureVector> features, double threshold = 0.5);

/// counts[predicted][actual], index 0 = nonfake, 1 = fake.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  std::uint64_t total() const noexcept { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::uint64_t at(store::Label predicted, store::Label actual) const noexcept {
    return counts[static_cast<int>(predicted)][static_cast<int>(actual)];
  }
  // Share of the whole evaluated set, in percent. Unrounded.
  double percent(store::Label predicted, store::Label actual) const noexcept;
};

struct ClassAccuracy {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  double accuracy() const noexcept { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalReport {
  std::uint64_t n_examples = 0;
  double threshold = 0.5;
  double overall_accuracy = 0.0;
  ConfusionMatrix confusion;
  std::map<store::SoundClass, ClassAccuracy> per_class;  // classes present only
};

EvalReport report_from_predictions(std::span<const Prediction> predictions, double threshold = 0.5);

/// Throws ConfigError on an empty set, ShapeError on a dim mismatch.
EvalReport evaluate(const nn::MlpModel& model, std::span<const store::FeatureVector> features,
                    double threshold = 0.5);

struct TimingReport {
  std::string clip_id;
  bool includes_time_average = false;
  std::uint64_t runs = 0;
  double clip_duration_seconds = 4.0;
  std::vector<double> run_seconds;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  double percent_of_realtime = 0.0;
};

// 100 * mean / clip duration.
double percent_of_realtime(double mean_seconds, double clip_duration_seconds);

/// Times the classifier path (time averaging when given a record, then an
/// eval-mode forward pass) sequentially on the calling thread. One untimed
/// warm-up run precedes the measured ones.
TimingReport benchmark_inference(const nn::MlpModel& model, const store::FeatureVector& sample,
                                 std::size_t runs = 100, double clip_duration_seconds = 4.0);
TimingReport benchmark_inference(const nn::MlpModel& model, const store::EmbeddingRecord& sample,
                                 std::size_t runs = 100, double clip_duration_seconds = 4.0);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const TimingReport& report);

// Text renderings laid out like the confusion, per-class and timing tables.
std::string render_confusion(const EvalReport& report, const std::string& embedding = "");
std::string render_per_class(const EvalReport& report);
std::string render_timing(const TimingReport& report, const std::string& embedding = "");

}  // namespace fakeaudio::eval
