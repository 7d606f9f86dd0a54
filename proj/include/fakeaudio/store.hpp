#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fakeaudio::store {

enum class SoundClass : std::uint8_t {
  kDogBark,
  kFootstep,
  kGunshot,
  kKeyboard,
  kMovingMotorVehicle,
  kRain,
  kSneezeCough,
};

inline constexpr std::size_t kNumSoundClasses = 7;
inline constexpr std::array<SoundClass, kNumSoundClasses> kAllSoundClasses = {
    SoundClass::kDogBark,  SoundClass::kFootstep,           SoundClass::kGunshot,
    SoundClass::kKeyboard, SoundClass::kMovingMotorVehicle, SoundClass::kRain,
    SoundClass::kSneezeCough,
};

std::string_view to_string(SoundClass c) noexcept;
// Throws ValidationError for unknown names.
SoundClass parse_sound_class(std::string_view name);

enum class Label : std::uint8_t { kNonfake = 0, kFake = 1 };

enum class Track : std::uint8_t { kA, kB };

std::string_view to_string(Track t) noexcept;
Track parse_track(std::string_view name);

/// One clip's frame-wise embedding. `values` is row-major frames x dim and
/// kept in single precision, the container's storage type.
struct EmbeddingRecord {
  std::string clip_id;
  SoundClass sound_class = SoundClass::kDogBark;
  Label label = Label::kNonfake;
  std::optional<std::string> generator_id;  // present iff label == kFake
  std::optional<Track> track;               // present iff label == kFake
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;

  float at(std::uint32_t frame, std::uint32_t j) const { return values[std::size_t{frame} * dim + j]; }

  bool operator==(const EmbeddingRecord&) const = default;
};

// Throws ValidationError naming the clip if any invariant fails.
void validate(const EmbeddingRecord& record);

/// Time-averaged (1, dim) representation fed to the detector.
struct FeatureVector {
  std::string clip_id;
  Label label = Label::kNonfake;
  SoundClass sound_class = SoundClass::kDogBark;
  std::optional<std::string> generator_id;
  std::optional<Track> track;
  std::vector<double> features;
};

FeatureVector time_average(const EmbeddingRecord& record);
std::vector<FeatureVector> time_average(std::span<const EmbeddingRecord> records);

// ---------------------------------------------------------------------------
// EMBD container
//
//   "EMBD" | u32 version (=1) | u32 dim | u32 count |
//   count x ( u32 meta_len | meta_len bytes of JSON | frames*dim f32 )
//
// All integers and floats little-endian. An empty container stores dim = 0.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kContainerVersion = 1;

std::uint64_t write_container(std::span<const EmbeddingRecord> records, std::ostream& out);
std::vector<EmbeddingRecord> read_container(std::istream& in);

std::uint64_t write_container_file(std::span<const EmbeddingRecord> records,
                                   const std::filesystem::path& path);
std::vector<EmbeddingRecord> read_container_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset preparation
// ---------------------------------------------------------------------------

struct Proportions {
  double train = 0.7;
  double validation = 0.1;
  double evaluation = 0.2;
};

// Throws ConfigError unless all parts are >= 0 and sum to 1 within 1e-9.
void validate(const Proportions& p);
// Parses "a,b,c". Throws ConfigError on malformed input.
Proportions parse_proportions(std::string_view text);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> evaluation;
  std::uint64_t seed = 0;
  Proportions proportions;
};

// Sizes of the three subsets for one stratum of n records, by the
// largest-remainder rule with ties resolved train > validation > evaluation.
std::array<std::size_t, 3> stratum_allocation(std::size_t n, const Proportions& p);

/// Stratified by (sound_class, label). Within a stratum records are taken in
/// manifest order, shuffled with a seeded Fisher-Yates, then cut by
/// stratum_allocation. Output lists are grouped by stratum in enum order.
DatasetSplit split_dataset(std::span<const EmbeddingRecord> manifest, const Proportions& proportions,
                           std::uint64_t seed);

/// Random oversampling of the minority label, with replacement, up to the
/// majority count. The result starts with `train_ids` unchanged, followed by
/// the extra draws.
std::vector<std::string> balance_training_set(std::span<const std::string> train_ids,
                                              std::span<const EmbeddingRecord> manifest,
                                              std::uint64_t seed);

// Selects records by clip id, preserving the order of `ids` (repeats allowed).
// Throws ValidationError for ids absent from `records`.
std::vector<FeatureVector> select(std::span<const FeatureVector> records,
                                  std::span<const std::string> ids);

// ---------------------------------------------------------------------------
// FAD score table: CSV with header "generator_id,track,fad_score".
// ---------------------------------------------------------------------------

struct FadEntry {
  std::string generator_id;
  Track track = Track::kA;
  double fad_score = 0.0;
};

std::vector<FadEntry> read_fad_csv(std::istream& in);
std::vector<FadEntry> read_fad_csv_file(const std::filesystem::path& path);
void write_fad_csv(std::span<const FadEntry> entries, std::ostream& out);

// ---------------------------------------------------------------------------
// Labels CSV consumed by the extractor:
//   clip_id,sound_class,label,generator_id,track
// generator_id and track are empty for nonfake clips.
// ---------------------------------------------------------------------------

struct LabelRow {
  std::string clip_id;
  SoundClass sound_class = SoundClass::kDogBark;
  Label label = Label::kNonfake;
  std::optional<std::string> generator_id;
  std::optional<Track> track;

  bool operator==(const LabelRow&) const = default;
};

std::vector<LabelRow> read_labels_csv(std::istream& in);
std::vector<LabelRow> read_labels_csv_file(const std::filesystem::path& path);
void write_labels_csv(std::span<const LabelRow> rows, std::ostream& out);

// Checks that `records` holds exactly one record per labels row with matching
// metadata. Throws ValidationError describing the first discrepancy.
void check_against_labels(std::span<const EmbeddingRecord> records, std::span<const LabelRow> labels);

}  // namespace fakeaudio::store
