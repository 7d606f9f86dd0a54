#include <algorithm>
#include <cmath>
#include <map>

#include "fakeaudio/analysis.hpp"
#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"

namespace fakeaudio::analysis {

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlation inputs differ in length");
  if (xs.size() < 2) throw ValidationError("correlation needs at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ValidationError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<GeneratorScore> score_generators(const nn::MlpModel& model,
                                             std::span<const store::FeatureVector> fake_clips) {
  std::map<std::string, std::vector<const store::FeatureVector*>> groups;
  for (const auto& clip : fake_clips) {
    if (clip.label != store::Label::kFake) {
      throw ValidationError("clip '" + clip.clip_id + "' is not fake; generator scores use fake clips only");
    }
    if (!clip.generator_id || !clip.track) {
      throw ValidationError("clip '" + clip.clip_id + "' lacks generator_id or track");
    }
    groups[*clip.generator_id].push_back(&clip);
  }

  std::vector<GeneratorScore> scores;
  scores.reserve(groups.size());
  for (auto& [generator, clips] : groups) {
    // Canonical order so batching, and thus rounding, is input-order free.
    std::sort(clips.begin(), clips.end(), [](auto* a, auto* b) { return a->clip_id < b->clip_id; });
    std::vector<store::FeatureVector> batch;
    batch.reserve(clips.size());
    for (const auto* c : clips) {
      if (*c->track != *clips.front()->track) {
        throw ValidationError("generator '" + generator + "' appears in both tracks");
      }
      batch.push_back(*c);
    }
    const auto p = eval::likelihoods(model, batch);
    std::vector<double> losses(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) losses[i] = nn::bce_loss(1.0, p[static_cast<Eigen::Index>(i)]);
    std::sort(losses.begin(), losses.end());
    double sum = 0.0;
    for (double l : losses) sum += l;

    GeneratorScore s;
    s.generator_id = generator;
    s.track = *clips.front()->track;
    s.n_clips = batch.size();
    s.detector_score = sum / static_cast<double>(batch.size());
    scores.push_back(std::move(s));
  }
  return scores;
}

std::vector<GeneratorScore> score_generators(const nn::MlpModel& model,
                                             std::span<const store::EmbeddingRecord> fake_records) {
  return score_generators(model, store::time_average(fake_records));
}

FadJoin attach_fad(std::span<const GeneratorScore> scores, std::span<const store::FadEntry> fad) {
  std::map<std::string, const store::FadEntry*> by_id;
  for (const auto& e : fad) by_id[e.generator_id] = &e;
  FadJoin join;
  for (const auto& s : scores) {
    const auto it = by_id.find(s.generator_id);
    if (it == by_id.end()) {
      join.warnings.push_back("generator '" + s.generator_id + "' has no FAD score; skipped");
      continue;
    }
    if (it->second->track != s.track) {
      join.warnings.push_back("generator '" + s.generator_id + "' track differs between container and FAD table; skipped");
      continue;
    }
    auto joined = s;
    joined.fad_score = it->second->fad_score;
    join.scores.push_back(std::move(joined));
  }
  return join;
}

CorrelationReport correlate_tracks(std::span<const GeneratorScore> scores) {
  CorrelationReport report;
  std::map<store::Track, std::vector<GeneratorScore>> by_track;
  for (const auto& s : scores) {
    if (!s.fad_score) {
      report.warnings.push_back("generator '" + s.generator_id + "' has no FAD score; ignored");
      continue;
    }
    by_track[s.track].push_back(s);
  }
  for (auto& [track, rows] : by_track) {
    const std::string name(store::to_string(track));
    if (rows.size() < 2) {
      report.warnings.push_back("track " + name + " has fewer than two generators; no correlation reported");
      continue;
    }
    std::vector<double> detector;
    std::vector<double> fad;
    for (const auto& r : rows) {
      detector.push_back(r.detector_score);
      fad.push_back(*r.fad_score);
    }
    TrackCorrelation tc;
    tc.track = track;
    tc.n = rows.size();
    try {
      tc.r = pearson_correlation(detector, fad);
    } catch (const ValidationError& e) {
      report.warnings.push_back("track " + name + ": " + e.what());
      continue;
    }
    tc.generators = std::move(rows);
    report.tracks.push_back(std::move(tc));
  }
  return report;
}

nlohmann::json to_json(const GeneratorScore& s) {
  nlohmann::json j = {
      {"generator_id", s.generator_id},
      {"track", std::string(store::to_string(s.track))},
      {"detector_score", s.detector_score},
      {"n_clips", s.n_clips},
  };
  j["fad_score"] = s.fad_score ? nlohmann::json(*s.fad_score) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const CorrelationReport& report) {
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : report.tracks) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& g : t.generators) rows.push_back(to_json(g));
    tracks.push_back({{"track", std::string(store::to_string(t.track))}, {"n", t.n}, {"r", t.r}, {"generators", rows}});
  }
  return {{"tracks", tracks}, {"warnings", report.warnings}};
}

}  // namespace fakeaudio::analysis
