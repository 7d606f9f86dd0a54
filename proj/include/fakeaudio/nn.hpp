#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>

#include <Eigen/Dense>

namespace fakeaudio::nn {

// Detector head: dim -> 512 -> 1024 -> 512 -> 1. The first three linear
// layers are followed by ReLU and dropout, the last by a sigmoid.
inline constexpr std::size_t kNumLayers = 4;
inline constexpr std::array<std::size_t, 3> kHiddenWidths = {512, 1024, 512};
inline constexpr double kDefaultDropout = 0.2;

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::VectorXd bias;    // fan_out

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

using LayerStack = std::array<DenseLayer, kNumLayers>;
using Gradients = LayerStack;

struct MlpModel {
  std::array<std::size_t, kNumLayers + 1> layer_dims{};
  LayerStack layers;
  double dropout_p = kDefaultDropout;

  std::size_t input_dim() const noexcept { return layer_dims[0]; }
  bool operator==(const MlpModel& o) const {
    return layer_dims == o.layer_dims && layers == o.layers && dropout_p == o.dropout_p;
  }
};

std::array<std::size_t, kNumLayers + 1> layer_dims_for(std::size_t input_dim);

// A stack of zero matrices shaped like the model's parameters.
LayerStack zeros_like(const MlpModel& model);

// Throws StateError if shapes disagree with layer_dims, NumericError if any
// parameter is non-finite.
void validate(const MlpModel& model);

/// He-uniform weights in +-sqrt(6 / fan_in), zero biases.
/// Throws ConfigError for dim == 0 or dropout_p outside [0, 1).
MlpModel init_model(std::size_t dim, double dropout_p, std::uint64_t seed);

enum class Mode { kTrain, kEval };

/// Everything backward() needs from a forward pass. Rows are examples.
struct ForwardCache {
  std::array<std::size_t, kNumLayers + 1> layer_dims{};
  Mode mode = Mode::kEval;
  Eigen::MatrixXd input;
  std::array<Eigen::MatrixXd, kNumLayers> pre;       // pre-activations z
  std::array<Eigen::MatrixXd, kNumLayers - 1> post;  // relu(z) * dropout scale
  // Per-unit dropout scale (0 or 1/(1-p)); empty in eval mode.
  std::array<Eigen::MatrixXd, kNumLayers - 1> dropout_scale;
  Eigen::VectorXd likelihoods;
};

struct ForwardResult {
  Eigen::VectorXd likelihoods;
  ForwardCache cache;
};

/// Inverted dropout: train mode zeroes each hidden activation with
/// probability p and scales survivors by 1/(1-p); eval mode is deterministic
/// and ignores `dropout_seed`.
ForwardResult forward(const MlpModel& model, const Eigen::MatrixXd& batch, Mode mode,
                      std::uint64_t dropout_seed = 0);

// Eval-mode likelihoods without keeping a cache.
Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& batch);

inline constexpr double kBceClamp = 1e-7;

// -(y log p + (1-y) log(1-p)) with both log arguments floored at 1e-7.
double bce_loss(double y, double likelihood) noexcept;
double mean_bce_loss(const Eigen::VectorXd& targets, const Eigen::VectorXd& likelihoods);

/// Gradients of the mean BCE over the batch, reusing the cached dropout
/// masks. The logit gradient is (sigmoid(z) - y) / n, i.e. the clamp only
/// bounds reported loss values and never zeroes a gradient.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::VectorXd& targets);

struct AdamHyper {
  double lr = 7e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

struct AdamState {
  std::uint64_t step = 0;
  AdamHyper hyper;
  LayerStack m;
  LayerStack v;

  static AdamState for_model(const MlpModel& model, const AdamHyper& hyper = {});
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update. Throws NumericError naming the layer if a
// gradient is non-finite; in that case neither model nor state is modified.
void adam_step(MlpModel& model, AdamState& state, const Gradients& grads);

// ---------------------------------------------------------------------------
// MLPC checkpoint
//
//   "MLPC" | u32 version (=1) | u32 n_dims (=5) | n_dims x u32 layer width |
//   f64 dropout_p | per layer: weight (fan_in x fan_out, row-major) then bias,
//   all f64 | u8 has_adam | [ u64 step | f64 lr, beta1, beta2, eps |
//   m stack | v stack, same layout as the parameters ]
//
// Little-endian throughout.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MlpModel model;
  std::optional<AdamState> adam;
};

void write_checkpoint(std::ostream& out, const MlpModel& model, const AdamState* adam = nullptr);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model, const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fakeaudio::nn
