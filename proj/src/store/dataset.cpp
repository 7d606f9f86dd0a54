#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

#include "fakeaudio/error.hpp"
#include "fakeaudio/random.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::store {

FeatureVector time_average(const EmbeddingRecord& record) {
  validate(record);
  FeatureVector fv;
  fv.clip_id = record.clip_id;
  fv.label = record.label;
  fv.sound_class = record.sound_class;
  fv.generator_id = record.generator_id;
  fv.track = record.track;
  fv.features.assign(record.dim, 0.0);
  for (std::uint32_t t = 0; t < record.frames; ++t) {
    for (std::uint32_t j = 0; j < record.dim; ++j) fv.features[j] += record.at(t, j);
  }
  const double inv = 1.0 / record.frames;
  for (double& x : fv.features) x *= inv;
  return fv;
}

std::vector<FeatureVector> time_average(std::span<const EmbeddingRecord> records) {
  std::vector<FeatureVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(time_average(r));
  return out;
}

void validate(const Proportions& p) {
  for (double x : {p.train, p.validation, p.evaluation}) {
    if (!std::isfinite(x) || x < 0.0) throw ConfigError("split proportions must be finite and non-negative");
  }
  if (std::abs(p.train + p.validation + p.evaluation - 1.0) > 1e-9) {
    throw ConfigError("split proportions must sum to 1");
  }
}

Proportions parse_proportions(std::string_view text) {
  std::array<double, 3> parts{};
  std::size_t idx = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (idx >= 3) throw ConfigError("proportions need exactly three comma-separated values");
    const auto* first = piece.data();
    const auto* last = piece.data() + piece.size();
    const auto res = std::from_chars(first, last, parts[idx]);
    if (res.ec != std::errc{} || res.ptr != last || piece.empty()) {
      throw ConfigError("cannot parse proportion '" + std::string(piece) + "'");
    }
    ++idx;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (idx != 3) throw ConfigError("proportions need exactly three comma-separated values");
  Proportions p{parts[0], parts[1], parts[2]};
  validate(p);
  return p;
}

std::array<std::size_t, 3> stratum_allocation(std::size_t n, const Proportions& p) {
  constexpr double kTieTol = 1e-9;
  const std::array<double, 3> quota = {n * p.train, n * p.validation, n * p.evaluation};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double fl = std::floor(quota[i] + kTieTol);
    sizes[i] = static_cast<std::size_t>(fl);
    remainder[i] = quota[i] - fl;
    assigned += sizes[i];
  }
  // Proportions sum to 1 within 1e-9, so at most 2 seats remain.
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainder[i] > remainder[best] + kTieTol) best = i;
    }
    ++sizes[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  while (assigned > n) {
    // Only reachable through rounding noise on degenerate quotas.
    for (std::size_t i = 3; i-- > 0;) {
      if (sizes[i] > 0) {
        --sizes[i];
        --assigned;
        break;
      }
    }
  }
  return sizes;
}

DatasetSplit split_dataset(std::span<const EmbeddingRecord> manifest, const Proportions& proportions,
                           std::uint64_t seed) {
  validate(proportions);
  if (manifest.empty()) throw ConfigError("cannot split an empty manifest");

  // Stratum key: class index * 2 + label.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest[i];
    strata[static_cast<int>(r.sound_class) * 2 + static_cast<int>(r.label)].push_back(i);
  }

  DatasetSplit split;
  split.seed = seed;
  split.proportions = proportions;
  for (auto& [key, indices] : strata) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(key)));
    rng.shuffle(indices.begin(), indices.end());
    const auto sizes = stratum_allocation(indices.size(), proportions);
    std::size_t k = 0;
    for (std::size_t n = 0; n < sizes[0]; ++n) split.train.push_back(manifest[indices[k++]].clip_id);
    for (std::size_t n = 0; n < sizes[1]; ++n) split.validation.push_back(manifest[indices[k++]].clip_id);
    for (std::size_t n = 0; n < sizes[2]; ++n) split.evaluation.push_back(manifest[indices[k++]].clip_id);
  }
  return split;
}

std::vector<std::string> balance_training_set(std::span<const std::string> train_ids,
                                              std::span<const EmbeddingRecord> manifest,
                                              std::uint64_t seed) {
  if (train_ids.empty()) throw ValidationError("cannot balance an empty training set");
  std::unordered_map<std::string_view, Label> label_of;
  label_of.reserve(manifest.size());
  for (const auto& r : manifest) label_of.emplace(r.clip_id, r.label);

  std::vector<std::string_view> by_label[2];
  for (const auto& id : train_ids) {
    const auto it = label_of.find(id);
    if (it == label_of.end()) throw ValidationError("training id '" + id + "' not in manifest");
    by_label[static_cast<int>(it->second)].push_back(id);
  }
  if (by_label[0].empty() || by_label[1].empty()) {
    throw ValidationError("balancing needs both labels in the training set");
  }

  const int minority = by_label[0].size() < by_label[1].size() ? 0 : 1;
  const auto& pool = by_label[minority];
  const std::size_t deficit = by_label[1 - minority].size() - pool.size();

  std::vector<std::string> out(train_ids.begin(), train_ids.end());
  out.reserve(train_ids.size() + deficit);
  Rng rng(derive_seed(seed, 0xBA1A2CEULL));
  for (std::size_t i = 0; i < deficit; ++i) out.emplace_back(pool[rng.uniform_index(pool.size())]);
  return out;
}

std::vector<FeatureVector> select(std::span<const FeatureVector> records, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].clip_id, i);
  std::vector<FeatureVector> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw ValidationError("clip id '" + id + "' not present in the container");
    out.push_back(records[it->second]);
  }
  return out;
}

}  // namespace fakeaudio::store
