#include <cstdio>
#include <sstream>

#include "fakeaudio/evaluator.hpp"

namespace fakeaudio::eval {
namespace {

using nlohmann::json;
using store::Label;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

json to_json(const EvalReport& report) {
  const auto& c = report.confusion;
  auto cells = [&](auto value) {
    return json{
        {"predicted_nonfake", {{"actual_nonfake", value(Label::kNonfake, Label::kNonfake)},
                               {"actual_fake", value(Label::kNonfake, Label::kFake)}}},
        {"predicted_fake", {{"actual_nonfake", value(Label::kFake, Label::kNonfake)},
                            {"actual_fake", value(Label::kFake, Label::kFake)}}},
    };
  };
  json per_class = json::object();
  for (const auto& [cls, acc] : report.per_class) {
    per_class[std::string(store::to_string(cls))] = {
        {"correct", acc.correct}, {"total", acc.total}, {"accuracy", acc.accuracy()}};
  }
  return json{
      {"n_examples", report.n_examples},
      {"threshold", report.threshold},
      {"overall_accuracy", report.overall_accuracy},
      {"confusion",
       {{"counts", cells([&](Label p, Label a) { return c.at(p, a); })},
        {"percent", cells([&](Label p, Label a) { return c.percent(p, a); })}}},
      {"per_class", per_class},
  };
}

json to_json(const TimingReport& report) {
  return json{
      {"clip_id", report.clip_id},
      {"timed_path", report.includes_time_average ? "time_average+classifier" : "classifier"},
      {"includes_embedding_extraction", false},
      {"runs", report.runs},
      {"clip_duration_seconds", report.clip_duration_seconds},
      {"mean_seconds", report.mean_seconds},
      {"median_seconds", report.median_seconds},
      {"percent_of_realtime", report.percent_of_realtime},
      {"run_seconds", report.run_seconds},
  };
}

std::string render_confusion(const EvalReport& report, const std::string& embedding) {
  const auto& c = report.confusion;
  std::ostringstream out;
  out << "Confusion matrix, % of evaluation set" << (embedding.empty() ? "" : " [" + embedding + "]") << "\n";
  out << pad_right("Predicted", 12) << pad_left("Nonfake (%)", 13) << pad_left("Fake (%)", 11) << "\n";
  for (Label p : {Label::kNonfake, Label::kFake}) {
    out << pad_right(p == Label::kNonfake ? "Nonfake" : "Fake", 12)
        << pad_left(fixed(c.percent(p, Label::kNonfake), 0), 13) << pad_left(fixed(c.percent(p, Label::kFake), 0), 11)
        << "   (n = " << c.at(p, Label::kNonfake) << " / " << c.at(p, Label::kFake) << ")\n";
  }
  out << "Overall accuracy: " << fixed(100.0 * report.overall_accuracy, 2) << " % over " << report.n_examples
      << " clips\n";
  return out.str();
}

std::string render_per_class(const EvalReport& report) {
  std::ostringstream header;
  std::ostringstream values;
  header << pad_right("Sound Class", 14);
  values << pad_right("Accuracy (%)", 14);
  for (const auto& [cls, acc] : report.per_class) {
    const std::string name(store::to_string(cls));
    const auto width = name.size() + 3;
    header << pad_left(name, width);
    values << pad_left(fixed(100.0 * acc.accuracy(), 1), width);
  }
  return header.str() + "\n" + values.str() + "\n";
}

std::string render_timing(const TimingReport& report, const std::string& embedding) {
  std::ostringstream out;
  out << "Inference time" << (embedding.empty() ? "" : " [" + embedding + "]") << " ("
      << (report.includes_time_average ? "time averaging + classifier" : "classifier") << ", embedding excluded)\n"
      << "  runs: " << report.runs << "\n"
      << "  mean: " << report.mean_seconds * 1e3 << " ms, median: " << report.median_seconds * 1e3 << " ms\n"
      << "  real-time percentage: " << fixed(report.percent_of_realtime, 4) << " % of "
      << report.clip_duration_seconds << " s\n";
  return out.str();
}

}  // namespace fakeaudio::eval
