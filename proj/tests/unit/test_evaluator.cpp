#include <doctest.h>

#include <algorithm>

#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"
#include "support/synthetic.hpp"

using namespace fakeaudio;
using namespace fakeaudio::eval;
using store::Label;

namespace {

// features[0] = +1 for fake, -1 for nonfake, so sign_model is an oracle.
std::vector<store::FeatureVector> signed_set(std::size_t n, std::uint64_t seed, std::size_t dim = 3) {
  Rng rng(seed);
  std::vector<store::FeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    store::FeatureVector f;
    f.clip_id = "e" + std::to_string(i);
    f.label = rng.uniform01() < 0.8 ? Label::kFake : Label::kNonfake;
    f.sound_class = store::kAllSoundClasses[rng.uniform_index(7)];
    f.features.assign(dim, 0.0);
    f.features[0] = f.label == Label::kFake ? 1.0 : -1.0;
    for (std::size_t j = 1; j < dim; ++j) f.features[j] = rng.uniform(-1, 1);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_CASE("oracle model gives an identity confusion matrix") {
  const auto set = signed_set(300, 1);
  const auto r = evaluate(testing::sign_model(3), set);
  CHECK(r.overall_accuracy == 1.0);
  CHECK(r.confusion.at(Label::kFake, Label::kNonfake) == 0);
  CHECK(r.confusion.at(Label::kNonfake, Label::kFake) == 0);
  CHECK(r.confusion.total() == 300);
  for (const auto& [cls, acc] : r.per_class) CHECK(acc.accuracy() == 1.0);
}

TEST_CASE("constant 0.5 model calls everything fake") {
  const auto set = signed_set(250, 2);
  const auto fakes = std::count_if(set.begin(), set.end(), [](const auto& f) { return f.label == Label::kFake; });
  const auto r = evaluate(testing::half_model(3), set, 0.5);
  CHECK(r.confusion.at(Label::kNonfake, Label::kNonfake) == 0);
  CHECK(r.confusion.at(Label::kNonfake, Label::kFake) == 0);
  CHECK(r.confusion.at(Label::kFake, Label::kFake) == static_cast<std::uint64_t>(fakes));
  CHECK(r.overall_accuracy == doctest::Approx(static_cast<double>(fakes) / 250.0).epsilon(1e-15));
}

TEST_CASE("report invariants on a random model") {
  const auto set = signed_set(400, 3, 6);
  const auto model = nn::init_model(6, 0.2, 4);
  const auto r = evaluate(model, set);
  CHECK(r.confusion.total() == r.n_examples);
  const auto& c = r.confusion.counts;
  CHECK(r.overall_accuracy == doctest::Approx(static_cast<double>(c[0][0] + c[1][1]) / 400));
  double pct = 0;
  for (auto p : {Label::kNonfake, Label::kFake})
    for (auto a : {Label::kNonfake, Label::kFake}) pct += r.confusion.percent(p, a);
  CHECK(pct == doctest::Approx(100.0));

  double weighted = 0;
  std::uint64_t total = 0;
  for (const auto& [cls, acc] : r.per_class) {
    weighted += acc.accuracy() * acc.total;
    total += acc.total;
  }
  CHECK(total == 400);
  CHECK(weighted / 400 == doctest::Approx(r.overall_accuracy).epsilon(1e-14));

  CHECK(to_json(evaluate(model, set)).dump() == to_json(r).dump());

  std::uint64_t prev_fake = r.n_examples + 1;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    const auto rt = evaluate(model, set, t);
    const auto fake = rt.confusion.counts[1][0] + rt.confusion.counts[1][1];
    CHECK(fake <= prev_fake);
    prev_fake = fake;
  }
}

TEST_CASE("threshold boundary counts as fake") {
  CHECK(decide(0.5, 0.5) == Label::kFake);
  CHECK(decide(std::nextafter(0.5, 0.0), 0.5) == Label::kNonfake);
}

TEST_CASE("evaluate errors") {
  const auto set = signed_set(10, 1, 3);
  CHECK_THROWS_AS(evaluate(testing::half_model(4), set), ShapeError);
  CHECK_THROWS_AS(evaluate(testing::half_model(3), std::span<const store::FeatureVector>{}), ConfigError);
}

TEST_CASE("likelihood chunking only perturbs rounding") {
  // Eigen picks different product kernels for small and large row counts.
  const auto set = signed_set(37, 9, 5);
  const auto model = nn::init_model(5, 0.2, 1);
  CHECK((likelihoods(model, set, 4) - likelihoods(model, set, 4096)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(likelihoods(model, set, 4) == likelihoods(model, set, 4));
}

TEST_CASE("report json schema") {
  const auto r = evaluate(testing::sign_model(3), signed_set(50, 4));
  const auto j = to_json(r);
  for (const char* key : {"n_examples", "threshold", "overall_accuracy", "confusion", "per_class"}) CHECK(j.contains(key));
  CHECK(j["confusion"]["counts"]["predicted_fake"].contains("actual_fake"));
  CHECK(j["confusion"]["percent"]["predicted_nonfake"].contains("actual_nonfake"));
  const auto table = render_confusion(r, "test");
  CHECK(table.find("Fake") != std::string::npos);
  CHECK_FALSE(render_per_class(r).empty());
}

TEST_CASE("timing") {
  CHECK(percent_of_realtime(0.04, 4.0) == doctest::Approx(1.0));
  const auto model = nn::init_model(16, 0.2, 1);
  const auto sample = signed_set(1, 2, 16)[0];

  const auto one = benchmark_inference(model, sample, 1);
  REQUIRE(one.run_seconds.size() == 1);
  CHECK(one.mean_seconds == one.run_seconds[0]);
  CHECK(one.runs == 1);

  const auto r = benchmark_inference(model, sample, 25);
  CHECK(r.run_seconds.size() == 25);
  CHECK(r.percent_of_realtime == doctest::Approx(100.0 * r.mean_seconds / 4.0));
  CHECK(r.percent_of_realtime >= 0.0);
  CHECK_FALSE(r.includes_time_average);

  Rng rng(3);
  const auto rec = testing::make_record("rec", store::SoundClass::kRain, Label::kNonfake, 4, 16, rng);
  const auto rr = benchmark_inference(model, rec, 5);
  CHECK(rr.includes_time_average);
  CHECK(rr.clip_id == "rec");
  const auto j = to_json(rr);
  CHECK(j["timed_path"] == "time_average+classifier");
  CHECK(j["includes_embedding_extraction"] == false);
  CHECK_THROWS_AS(benchmark_inference(model, sample, 0), ConfigError);
}

TEST_CASE("timing grows with input width") {
  const auto small = nn::init_model(256, 0.2, 1);
  const auto large = nn::init_model(512, 0.2, 1);
  const auto a = benchmark_inference(small, signed_set(1, 1, 256)[0], 60);
  const auto b = benchmark_inference(large, signed_set(1, 1, 512)[0], 60);
  CHECK(b.median_seconds >= 0.8 * a.median_seconds);
}
