#include <algorithm>
#include <cmath>
#include <string>

#include "fakeaudio/error.hpp"
#include "fakeaudio/nn.hpp"
#include "fakeaudio/random.hpp"

namespace fakeaudio::nn {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dims(const MlpModel& model) {
  if (model.layer_dims != layer_dims_for(model.layer_dims[0])) {
    throw StateError("model layer widths do not match the detector architecture");
  }
}

}  // namespace

std::array<std::size_t, kNumLayers + 1> layer_dims_for(std::size_t input_dim) {
  return {input_dim, kHiddenWidths[0], kHiddenWidths[1], kHiddenWidths[2], 1};
}

LayerStack zeros_like(const MlpModel& model) {
  LayerStack out;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(model.layer_dims[l]);
    const auto fan_out = static_cast<Eigen::Index>(model.layer_dims[l + 1]);
    out[l].weight = Eigen::MatrixXd::Zero(fan_in, fan_out);
    out[l].bias = Eigen::VectorXd::Zero(fan_out);
  }
  return out;
}

void validate(const MlpModel& model) {
  check_dims(model);
  if (!(model.dropout_p >= 0.0 && model.dropout_p < 1.0)) throw StateError("dropout_p must lie in [0, 1)");
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& layer = model.layers[l];
    if (static_cast<std::size_t>(layer.weight.rows()) != model.layer_dims[l] ||
        static_cast<std::size_t>(layer.weight.cols()) != model.layer_dims[l + 1] ||
        static_cast<std::size_t>(layer.bias.size()) != model.layer_dims[l + 1]) {
      throw StateError("layer " + std::to_string(l + 1) + " parameter shape mismatch");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(l + 1) + " has non-finite parameters");
    }
  }
}

MlpModel init_model(std::size_t dim, double dropout_p, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");

  MlpModel model;
  model.layer_dims = layer_dims_for(dim);
  model.dropout_p = dropout_p;
  model.layers = zeros_like(model);

  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    auto& w = model.layers[l].weight;
    const double bound = std::sqrt(6.0 / static_cast<double>(model.layer_dims[l]));
    // Row-major fill so the draw order is independent of Eigen's storage.
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return model;
}

ForwardResult forward(const MlpModel& model, const Eigen::MatrixXd& batch, Mode mode,
                      std::uint64_t dropout_seed) {
  check_dims(model);
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim()) {
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match model input dim " +
                     std::to_string(model.input_dim()));
  }
  if (!batch.allFinite()) throw ValidationError("batch contains non-finite values");

  const Eigen::Index n = batch.rows();
  const bool drop = mode == Mode::kTrain && model.dropout_p > 0.0;
  const double keep_scale = 1.0 / (1.0 - model.dropout_p);

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.layer_dims = model.layer_dims;
  cache.mode = mode;
  cache.input = batch;

  Rng rng(dropout_seed);
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const Eigen::MatrixXd& in = l == 0 ? cache.input : cache.post[l - 1];
    Eigen::MatrixXd z = in * model.layers[l].weight;
    z.rowwise() += model.layers[l].bias.transpose();
    if (l + 1 < kNumLayers) {
      Eigen::MatrixXd a = z.cwiseMax(0.0);
      if (drop) {
        Eigen::MatrixXd scale(n, z.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < z.cols(); ++j) {
            scale(i, j) = rng.uniform01() < model.dropout_p ? 0.0 : keep_scale;
          }
        }
        a.array() *= scale.array();
        cache.dropout_scale[l] = std::move(scale);
      }
      cache.post[l] = std::move(a);
    }
    cache.pre[l] = std::move(z);
  }

  cache.likelihoods = cache.pre[kNumLayers - 1].col(0).unaryExpr([](double z) { return sigmoid(z); });
  result.likelihoods = cache.likelihoods;
  return result;
}

Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& batch) {
  check_dims(model);
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim()) {
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match model input dim " +
                     std::to_string(model.input_dim()));
  }
  Eigen::MatrixXd a = batch;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    Eigen::MatrixXd z = a * model.layers[l].weight;
    z.rowwise() += model.layers[l].bias.transpose();
    a = l + 1 < kNumLayers ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return a.col(0).unaryExpr([](double z) { return sigmoid(z); });
}

double bce_loss(double y, double likelihood) noexcept {
  // Clamp each log argument at 1e-7: the loss stays finite (<= -ln 1e-7)
  // while a perfect prediction still scores exactly 0.
  double loss = 0.0;
  if (y != 0.0) loss -= y * std::log(std::max(likelihood, kBceClamp));
  if (y != 1.0) loss -= (1.0 - y) * std::log(std::max(1.0 - likelihood, kBceClamp));
  return loss;
}

double mean_bce_loss(const Eigen::VectorXd& targets, const Eigen::VectorXd& likelihoods) {
  if (targets.size() != likelihoods.size()) throw ShapeError("target and likelihood counts differ");
  if (targets.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < targets.size(); ++i) sum += bce_loss(targets[i], likelihoods[i]);
  return sum / static_cast<double>(targets.size());
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Eigen::VectorXd& targets) {
  check_dims(model);
  if (cache.layer_dims != model.layer_dims) throw StateError("forward cache was produced by a different model");
  const Eigen::Index n = cache.input.rows();
  if (targets.size() != n || cache.likelihoods.size() != n) {
    throw StateError("target count does not match the cached batch");
  }
  if (n == 0) throw StateError("cannot backpropagate an empty batch");
  const bool masked = cache.mode == Mode::kTrain && cache.dropout_scale[0].size() != 0;

  Gradients grads;
  Eigen::MatrixXd delta = (cache.likelihoods - targets) / static_cast<double>(n);
  for (std::size_t l = kNumLayers; l-- > 0;) {
    const Eigen::MatrixXd& in = l == 0 ? cache.input : cache.post[l - 1];
    grads[l].weight.noalias() = in.transpose() * delta;
    grads[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd upstream = delta * model.layers[l].weight.transpose();
    upstream.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>();
    if (masked) upstream.array() *= cache.dropout_scale[l - 1].array();
    delta = std::move(upstream);
  }
  return grads;
}

}  // namespace fakeaudio::nn
