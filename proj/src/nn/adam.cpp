#include <cmath>
#include <string>

#include "fakeaudio/error.hpp"
#include "fakeaudio/nn.hpp"

namespace fakeaudio::nn {

AdamState AdamState::for_model(const MlpModel& model, const AdamHyper& hyper) {
  AdamState state;
  state.hyper = hyper;
  state.m = zeros_like(model);
  state.v = zeros_like(model);
  return state;
}

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads) {
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& p = model.layers[l];
    const auto& g = grads[l];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() || g.bias.size() != p.bias.size() ||
        state.m[l].weight.size() != p.weight.size() || state.v[l].bias.size() != p.bias.size()) {
      throw ShapeError("Adam: gradient or moment shape mismatch in layer " + std::to_string(l + 1));
    }
    if (!g.weight.allFinite()) throw NumericError("Adam: non-finite gradient in Linear" + std::to_string(l + 1) + " weight");
    if (!g.bias.allFinite()) throw NumericError("Adam: non-finite gradient in Linear" + std::to_string(l + 1) + " bias");
  }

  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(h.beta1, t);
  const double correct2 = 1.0 - std::pow(h.beta2, t);

  auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
    m.array() = h.beta1 * m.array() + (1.0 - h.beta1) * g.array();
    v.array() = h.beta2 * v.array() + (1.0 - h.beta2) * g.array().square();
    theta.array() -= h.lr * (m.array() / correct1) / ((v.array() / correct2).sqrt() + h.eps);
  };
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    update(model.layers[l].weight, state.m[l].weight, state.v[l].weight, grads[l].weight);
    update(model.layers[l].bias, state.m[l].bias, state.v[l].bias, grads[l].bias);
  }
}

}  // namespace fakeaudio::nn
