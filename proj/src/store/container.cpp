#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "fakeaudio/error.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::store {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'M', 'B', 'D'};

constexpr std::array<std::string_view, kNumSoundClasses> kClassNames = {
    "dog_bark", "footstep", "gunshot", "keyboard", "moving_motor_vehicle", "rain", "sneeze_cough",
};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

void put_floats(std::ostream& out, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    buf[4 * i + 0] = static_cast<char>(bits & 0xFF);
    buf[4 * i + 1] = static_cast<char>((bits >> 8) & 0xFF);
    buf[4 * i + 2] = static_cast<char>((bits >> 16) & 0xFF);
    buf[4 * i + 3] = static_cast<char>((bits >> 24) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw IoError(std::string("EMBD container truncated while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

json metadata_of(const EmbeddingRecord& r) {
  json meta = {
      {"clip_id", r.clip_id},
      {"sound_class", std::string(to_string(r.sound_class))},
      {"label", static_cast<int>(r.label)},
      {"frames", r.frames},
  };
  if (r.generator_id) meta["generator_id"] = *r.generator_id;
  if (r.track) meta["track"] = std::string(to_string(*r.track));
  return meta;
}

EmbeddingRecord record_from_metadata(const json& meta, std::uint32_t dim) {
  if (!meta.is_object()) throw FormatError("EMBD record metadata is not a JSON object");
  EmbeddingRecord r;
  try {
    r.clip_id = meta.at("clip_id").get<std::string>();
    r.sound_class = parse_sound_class(meta.at("sound_class").get<std::string>());
    const int label = meta.at("label").get<int>();
    if (label != 0 && label != 1) {
      throw ValidationError("clip '" + r.clip_id + "': label must be 0 or 1");
    }
    r.label = static_cast<Label>(label);
    r.frames = meta.at("frames").get<std::uint32_t>();
    if (auto it = meta.find("generator_id"); it != meta.end()) r.generator_id = it->get<std::string>();
    if (auto it = meta.find("track"); it != meta.end()) r.track = parse_track(it->get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("EMBD record metadata malformed: ") + e.what());
  }
  r.dim = dim;
  return r;
}

}  // namespace

std::string_view to_string(SoundClass c) noexcept { return kClassNames[static_cast<std::size_t>(c)]; }

SoundClass parse_sound_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<SoundClass>(i);
  }
  throw ValidationError("unknown sound class '" + std::string(name) + "'");
}

std::string_view to_string(Track t) noexcept { return t == Track::kA ? "A" : "B"; }

Track parse_track(std::string_view name) {
  if (name == "A") return Track::kA;
  if (name == "B") return Track::kB;
  throw ValidationError("unknown track '" + std::string(name) + "'");
}

void validate(const EmbeddingRecord& r) {
  const std::string who = "clip '" + r.clip_id + "': ";
  if (r.clip_id.empty()) throw ValidationError("record with empty clip_id");
  if (r.frames == 0 || r.dim == 0) throw ValidationError(who + "frames and dim must be positive");
  if (r.values.size() != std::size_t{r.frames} * r.dim) {
    throw ValidationError(who + "value count does not equal frames*dim");
  }
  const bool fake = r.label == Label::kFake;
  if (r.label != Label::kFake && r.label != Label::kNonfake) throw ValidationError(who + "label must be 0 or 1");
  if (r.generator_id.has_value() != fake || r.track.has_value() != fake) {
    throw ValidationError(who + "generator_id and track must be present exactly when label = 1");
  }
  for (float v : r.values) {
    if (!std::isfinite(v)) throw ValidationError(who + "non-finite embedding value");
  }
}

std::uint64_t write_container(std::span<const EmbeddingRecord> records, std::ostream& out) {
  const std::uint32_t dim = records.empty() ? 0 : records.front().dim;
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records) {
    if (r.dim != dim) throw FormatError("EMBD container requires a single dim; clip '" + r.clip_id + "' differs");
    validate(r);
    if (!seen.insert(r.clip_id).second) throw ValidationError("duplicate clip_id '" + r.clip_id + "'");
  }

  std::uint64_t written = 0;
  out.write(kMagic, 4);
  put_u32(out, kContainerVersion);
  put_u32(out, dim);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  written += 16;
  for (const auto& r : records) {
    const std::string meta = metadata_of(r).dump();
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put_floats(out, r.values);
    written += 4 + meta.size() + 4 * r.values.size();
  }
  if (!out) throw IoError("failed writing EMBD container");
  return written;
}

std::vector<EmbeddingRecord> read_container(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) {
    throw FormatError("not an EMBD container (bad magic)");
  }
  const auto version = get_u32(in, "version");
  if (version != kContainerVersion) {
    throw FormatError("unsupported EMBD version " + std::to_string(version));
  }
  const auto dim = get_u32(in, "dim");
  const auto count = get_u32(in, "record count");
  if (count > 0 && dim == 0) throw FormatError("EMBD container declares dim 0 with records");

  std::vector<EmbeddingRecord> records;
  records.reserve(std::min<std::uint32_t>(count, 1u << 16));
  std::unordered_set<std::string> seen;
  std::vector<char> raw;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto meta_len = get_u32(in, "metadata length");
    std::string meta_text(meta_len, '\0');
    read_exact(in, meta_text.data(), meta_len, "metadata");
    json meta = json::parse(meta_text, nullptr, /*allow_exceptions=*/false);
    if (meta.is_discarded()) throw FormatError("EMBD record " + std::to_string(i) + " has invalid JSON metadata");
    EmbeddingRecord r = record_from_metadata(meta, dim);
    if (r.frames == 0) throw ValidationError("clip '" + r.clip_id + "': frames must be positive");

    const std::size_t n = std::size_t{r.frames} * dim;
    raw.resize(4 * n);
    read_exact(in, raw.data(), raw.size(), "embedding values");
    r.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * k);
      const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                                 (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
      r.values[k] = std::bit_cast<float>(bits);
    }
    validate(r);
    if (!seen.insert(r.clip_id).second) throw ValidationError("duplicate clip_id '" + r.clip_id + "'");
    records.push_back(std::move(r));
  }
  return records;
}

std::uint64_t write_container_file(std::span<const EmbeddingRecord> records,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return write_container(records, out);
}

std::vector<EmbeddingRecord> read_container_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open container '" + path.string() + "'");
  return read_container(in);
}

}  // namespace fakeaudio::store
