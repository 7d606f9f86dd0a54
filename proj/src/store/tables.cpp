#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fakeaudio/error.hpp"
#include "fakeaudio/store.hpp"

namespace fakeaudio::store {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::vector<FadEntry> read_fad_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("FAD table is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  if (header.size() != 3 || header[0] != "generator_id" || header[1] != "track" || header[2] != "fad_score") {
    throw FormatError("FAD table header must be 'generator_id,track,fad_score'");
  }

  std::vector<FadEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = "FAD table line " + std::to_string(line_no);
    if (fields.size() != 3) throw FormatError(where + ": expected 3 fields");
    FadEntry e;
    e.generator_id = std::string(fields[0]);
    if (e.generator_id.empty()) throw ValidationError(where + ": empty generator_id");
    e.track = parse_track(fields[1]);
    const auto res = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), e.fad_score);
    if (res.ec != std::errc{} || res.ptr != fields[2].data() + fields[2].size() || !std::isfinite(e.fad_score)) {
      throw FormatError(where + ": fad_score is not a finite number");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<FadEntry> read_fad_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open FAD table '" + path.string() + "'");
  return read_fad_csv(in);
}

void write_fad_csv(std::span<const FadEntry> entries, std::ostream& out) {
  out << "generator_id,track,fad_score\n";
  for (const auto& e : entries) {
    std::ostringstream value;
    value.precision(17);
    value << e.fad_score;
    out << e.generator_id << ',' << to_string(e.track) << ',' << value.str() << '\n';
  }
}

}  // namespace fakeaudio::store

namespace fakeaudio::store {

std::vector<LabelRow> read_labels_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("labels table is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  const std::array<std::string_view, 5> expected = {"clip_id", "sound_class", "label", "generator_id", "track"};
  if (header.size() != expected.size() || !std::equal(header.begin(), header.end(), expected.begin())) {
    throw FormatError("labels header must be 'clip_id,sound_class,label,generator_id,track'");
  }

  std::vector<LabelRow> rows;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "labels line " + std::to_string(line_no);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    LabelRow row;
    row.clip_id = std::string(f[0]);
    if (row.clip_id.empty()) throw ValidationError(where + ": empty clip_id");
    if (!seen.insert(row.clip_id).second) throw ValidationError(where + ": duplicate clip_id '" + row.clip_id + "'");
    row.sound_class = parse_sound_class(f[1]);
    if (f[2] == "0") {
      row.label = Label::kNonfake;
    } else if (f[2] == "1") {
      row.label = Label::kFake;
    } else {
      throw ValidationError(where + ": label must be 0 or 1");
    }
    if (!f[3].empty()) row.generator_id = std::string(f[3]);
    if (!f[4].empty()) row.track = parse_track(f[4]);
    const bool fake = row.label == Label::kFake;
    if (fake != row.generator_id.has_value() || fake != row.track.has_value()) {
      throw ValidationError(where + ": generator_id and track must be set exactly for fake clips");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LabelRow> read_labels_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels table '" + path.string() + "'");
  return read_labels_csv(in);
}

void write_labels_csv(std::span<const LabelRow> rows, std::ostream& out) {
  out << "clip_id,sound_class,label,generator_id,track\n";
  for (const auto& r : rows) {
    out << r.clip_id << ',' << to_string(r.sound_class) << ',' << static_cast<int>(r.label) << ','
        << r.generator_id.value_or("") << ',' << (r.track ? to_string(*r.track) : std::string_view{}) << '\n';
  }
}

void check_against_labels(std::span<const EmbeddingRecord> records, std::span<const LabelRow> labels) {
  std::unordered_map<std::string_view, const LabelRow*> by_id;
  for (const auto& row : labels) by_id.emplace(row.clip_id, &row);
  std::unordered_set<std::string_view> covered;
  for (const auto& r : records) {
    const auto it = by_id.find(r.clip_id);
    if (it == by_id.end()) throw ValidationError("record '" + r.clip_id + "' has no labels row");
    if (!covered.insert(r.clip_id).second) throw ValidationError("record '" + r.clip_id + "' appears twice");
    const LabelRow& row = *it->second;
    if (row.sound_class != r.sound_class || row.label != r.label || row.generator_id != r.generator_id ||
        row.track != r.track) {
      throw ValidationError("record '" + r.clip_id + "' metadata disagrees with its labels row");
    }
  }
  if (covered.size() != labels.size()) {
    for (const auto& row : labels) {
      if (!covered.contains(row.clip_id)) throw ValidationError("labels row '" + row.clip_id + "' has no record");
    }
  }
}

}  // namespace fakeaudio::store
