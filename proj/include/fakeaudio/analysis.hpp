#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakeaudio/nn.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::analysis {

// ---------------------------------------------------------------------------
// Mann-Whitney U
// ---------------------------------------------------------------------------

enum class UTestMethod { kExact, kNormalApprox };

struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;  // compare reduced forms
};

Rational reduced(std::uint64_t num, std::uint64_t den);

struct UTestResult {
  double u = 0.0;  // statistic of the first sample
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  UTestMethod method = UTestMethod::kExact;
  std::optional<Rational> exact_p;  // set for the exact method
};

inline constexpr std::size_t kExactMaxSampleSize = 12;

// Midranks (1-based) of the pooled values; ties share the mean rank.
std::vector<double> midranks(std::span<const double> pooled);

/// Null distribution of U for tie-free samples: entry u is the number of the
/// C(n1+n2, n1) rank assignments whose first-sample statistic equals u.
std::vector<std::uint64_t> u_null_counts(std::size_t n1, std::size_t n2);

/// Two-sided test, p = min(1, 2 min(P(U <= u), P(U >= u))). Exact null
/// distribution when max(n1, n2) <= 12 and there are no ties; otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction. Throws ValidationError on an empty or non-finite sample.
UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b);

// ---------------------------------------------------------------------------
// Detector score vs. FAD
// ---------------------------------------------------------------------------

/// Sample Pearson r. Throws ValidationError on length mismatch, fewer than
/// two points, or zero variance in either argument.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

struct GeneratorScore {
  std::string generator_id;
  store::Track track = store::Track::kA;
  double detector_score = 0.0;  // mean BCE against target 1; higher = harder to detect
  std::size_t n_clips = 0;
  std::optional<double> fad_score;
};

/// Groups fake clips by generator and averages bce_loss(1, likelihood).
/// Results are sorted by generator_id and do not depend on input order.
std::vector<GeneratorScore> score_generators(const nn::MlpModel& model,
                                             std::span<const store::FeatureVector> fake_clips);
std::vector<GeneratorScore> score_generators(const nn::MlpModel& model,
                                             std::span<const store::EmbeddingRecord> fake_records);

struct FadJoin {
  std::vector<GeneratorScore> scores;  // only generators with a FAD row
  std::vector<std::string> warnings;
};

FadJoin attach_fad(std::span<const GeneratorScore> scores, std::span<const store::FadEntry> fad);

struct TrackCorrelation {
  store::Track track = store::Track::kA;
  std::size_t n = 0;
  double r = 0.0;
  std::vector<GeneratorScore> generators;
};

struct CorrelationReport {
  std::vector<TrackCorrelation> tracks;
  std::vector<std::string> warnings;
};

/// Pearson r between detector_score and fad_score within each track. Tracks
/// with fewer than two generators (or constant scores) are skipped with a
/// warning. Scores without a FAD value are ignored with a warning.
CorrelationReport correlate_tracks(std::span<const GeneratorScore> scores);

nlohmann::json to_json(const UTestResult& result);
nlohmann::json to_json(const GeneratorScore& score);
nlohmann::json to_json(const CorrelationReport& report);

}  // namespace fakeaudio::analysis
