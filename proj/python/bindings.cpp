#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fakeaudio/analysis.hpp"
#include "fakeaudio/cli.hpp"
#include "fakeaudio/error.hpp"
#include "fakeaudio/evaluator.hpp"
#include "fakeaudio/nn.hpp"
#include "fakeaudio/store.hpp"
#include "fakeaudio/trainer.hpp"

namespace py = pybind11;
using namespace fakeaudio;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::dict record_to_dict(const store::EmbeddingRecord& r) {
  py::dict d;
  d["clip_id"] = r.clip_id;
  d["sound_class"] = std::string(store::to_string(r.sound_class));
  d["label"] = static_cast<int>(r.label);
  d["generator_id"] = r.generator_id ? py::cast(*r.generator_id) : py::none();
  d["track"] = r.track ? py::cast(std::string(store::to_string(*r.track))) : py::none();
  F32Array values({static_cast<py::ssize_t>(r.frames), static_cast<py::ssize_t>(r.dim)});
  std::copy(r.values.begin(), r.values.end(), values.mutable_data());
  d["values"] = values;
  return d;
}

store::EmbeddingRecord record_from_dict(const py::dict& d) {
  store::EmbeddingRecord r;
  r.clip_id = d["clip_id"].cast<std::string>();
  r.sound_class = store::parse_sound_class(d["sound_class"].cast<std::string>());
  r.label = d["label"].cast<int>() == 1 ? store::Label::kFake : store::Label::kNonfake;
  if (d.contains("generator_id") && !d["generator_id"].is_none()) r.generator_id = d["generator_id"].cast<std::string>();
  if (d.contains("track") && !d["track"].is_none()) r.track = store::parse_track(d["track"].cast<std::string>());
  const auto values = d["values"].cast<F32Array>();
  if (values.ndim() != 2) throw ShapeError("record values must be a (frames, dim) array");
  r.frames = static_cast<std::uint32_t>(values.shape(0));
  r.dim = static_cast<std::uint32_t>(values.shape(1));
  r.values.assign(values.data(), values.data() + values.size());
  store::validate(r);
  return r;
}

// Features from an (n, dim) array plus labels and optional class names.
std::vector<store::FeatureVector> features_from(const F64Array& x, const py::array_t<int>& y,
                                                const std::optional<std::vector<std::string>>& classes) {
  if (x.ndim() != 2) throw ShapeError("features must be a 2-D array");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto dim = static_cast<std::size_t>(x.shape(1));
  if (static_cast<std::size_t>(y.size()) != n) throw ShapeError("label count differs from feature rows");
  if (classes && classes->size() != n) throw ShapeError("class count differs from feature rows");
  std::vector<store::FeatureVector> out(n);
  const double* px = x.data();
  const int* py_ = y.data();
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = out[i];
    f.clip_id = "row" + std::to_string(i);
    f.label = py_[i] == 1 ? store::Label::kFake : store::Label::kNonfake;
    if (classes) f.sound_class = store::parse_sound_class((*classes)[i]);
    f.features.assign(px + i * dim, px + (i + 1) * dim);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fake environmental audio detector core";

  static py::exception<Error> base_error(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", base_error.ptr());
  py::register_exception<IoError>(m, "IoError", base_error.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base_error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base_error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base_error.ptr());
  py::register_exception<StateError>(m, "StateError", base_error.ptr());
  py::register_exception<NumericError>(m, "NumericError", base_error.ptr());

  // ---- embedding store
  m.def("read_container", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : store::read_container_file(path)) out.append(record_to_dict(r));
    return out;
  }, py::arg("path"));
  m.def("write_container", [](const std::filesystem::path& path, const py::list& records) {
    std::vector<store::EmbeddingRecord> rs;
    for (const auto& item : records) rs.push_back(record_from_dict(item.cast<py::dict>()));
    return store::write_container_file(rs, path);
  }, py::arg("path"), py::arg("records"));
  m.def("time_average", [](const F32Array& values) {
    if (values.ndim() != 2) throw ShapeError("values must be a (frames, dim) array");
    store::EmbeddingRecord r;
    r.clip_id = "x";
    r.frames = static_cast<std::uint32_t>(values.shape(0));
    r.dim = static_cast<std::uint32_t>(values.shape(1));
    r.values.assign(values.data(), values.data() + values.size());
    const auto fv = store::time_average(r);
    return py::array_t<double>(static_cast<py::ssize_t>(fv.features.size()), fv.features.data());
  }, py::arg("values"));
  m.def("split_container", [](const std::filesystem::path& path, std::string proportions, std::uint64_t seed) {
    const auto records = store::read_container_file(path);
    const auto split = store::split_dataset(records, store::parse_proportions(proportions), seed);
    py::dict d;
    d["train"] = split.train;
    d["validation"] = split.validation;
    d["evaluation"] = split.evaluation;
    return d;
  }, py::arg("path"), py::arg("proportions") = "0.7,0.1,0.2", py::arg("seed"));
  m.def("read_fad_csv", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& e : store::read_fad_csv_file(path))
      out.append(py::make_tuple(e.generator_id, std::string(store::to_string(e.track)), e.fad_score));
    return out;
  }, py::arg("path"));
  m.def("check_labels", [](const std::filesystem::path& container, const std::filesystem::path& labels) {
    store::check_against_labels(store::read_container_file(container), store::read_labels_csv_file(labels));
  }, py::arg("container"), py::arg("labels"),
        "Raise ValidationError unless the container matches the labels CSV one-to-one.");

  // ---- model
  py::class_<nn::MlpModel>(m, "Model")
      .def(py::init([](std::size_t dim, double dropout, std::uint64_t seed) { return nn::init_model(dim, dropout, seed); }),
           py::arg("dim"), py::arg("dropout") = nn::kDefaultDropout, py::arg("seed") = 0)
      .def_property_readonly("layer_dims", [](const nn::MlpModel& mdl) { return mdl.layer_dims; })
      .def_readonly("dropout", &nn::MlpModel::dropout_p)
      .def("weight", [](const nn::MlpModel& mdl, std::size_t l) { return mdl.layers.at(l).weight; }, py::arg("layer"))
      .def("bias", [](const nn::MlpModel& mdl, std::size_t l) { return mdl.layers.at(l).bias; }, py::arg("layer"))
      .def("predict", [](const nn::MlpModel& mdl, const Eigen::MatrixXd& x) { return nn::predict(mdl, x); },
           py::arg("features"))
      .def("save", [](const nn::MlpModel& mdl, const std::filesystem::path& p) { nn::save_checkpoint(p, mdl); },
           py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return nn::load_checkpoint(p).model; }, py::arg("path"));

  m.def("bce_loss", &nn::bce_loss, py::arg("y"), py::arg("likelihood"));

  m.def("train_run",
        [](const F64Array& x_train, const py::array_t<int>& y_train, const F64Array& x_val,
           const py::array_t<int>& y_val, std::uint64_t seed, std::size_t epochs, std::size_t batch_size,
           std::size_t checkpoint_every, double lr, double dropout) {
          train::TrainConfig cfg;
          cfg.epochs = epochs;
          cfg.batch_size = batch_size;
          cfg.checkpoint_every = checkpoint_every;
          cfg.lr = lr;
          cfg.dropout_p = dropout;
          const auto tr = features_from(x_train, y_train, std::nullopt);
          const auto va = features_from(x_val, y_val, std::nullopt);
          train::TrainRunResult run;
          {
            py::gil_scoped_release release;
            run = train::train_one_run(tr, va, cfg, seed);
          }
          return py::make_tuple(run.model, to_python(train::to_json(run)));
        },
        py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"), py::arg("seed"),
        py::arg("epochs") = 100, py::arg("batch_size") = 128, py::arg("checkpoint_every") = 10,
        py::arg("lr") = 7e-4, py::arg("dropout") = nn::kDefaultDropout);

  // ---- evaluation
  m.def("evaluate",
        [](const nn::MlpModel& mdl, const F64Array& x, const py::array_t<int>& y,
           const std::optional<std::vector<std::string>>& classes, double threshold) {
          return to_python(eval::to_json(eval::evaluate(mdl, features_from(x, y, classes), threshold)));
        },
        py::arg("model"), py::arg("features"), py::arg("labels"), py::arg("classes") = py::none(),
        py::arg("threshold") = 0.5);
  m.def("benchmark",
        [](const nn::MlpModel& mdl, const F64Array& sample, std::size_t runs, double clip_duration) {
          store::FeatureVector f;
          f.clip_id = "sample";
          f.features.assign(sample.data(), sample.data() + sample.size());
          return to_python(eval::to_json(eval::benchmark_inference(mdl, f, runs, clip_duration)));
        },
        py::arg("model"), py::arg("sample"), py::arg("runs") = 100, py::arg("clip_duration") = 4.0);

  // ---- analysis
  m.def("mann_whitney_u", [](const std::vector<double>& a, const std::vector<double>& b) {
    return to_python(analysis::to_json(analysis::mann_whitney_u(a, b)));
  }, py::arg("a"), py::arg("b"));
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
    return analysis::pearson_correlation(x, y);
  }, py::arg("x"), py::arg("y"));

  // ---- command line
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run a fakeaudio subcommand in-process; returns (exit_code, stdout, stderr).");
}
