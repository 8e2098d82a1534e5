#include "penseg/nn/optim.hpp"

#include <cmath>

#include "penseg/errors.hpp"

namespace penseg::nn {

void adam_step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("adam: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
      throw ShapeMismatch("adam: gradient shape mismatch");
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    params[i]->array() -=
        cfg.learning_rate * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + cfg.epsilon);
  }
}

void adam_step(Network& net, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  std::vector<const Matrix*> flat;
  for (const auto& layer : grads) {
    for (const auto& g : layer) flat.push_back(&g);
  }
  adam_step(net.parameters(), flat, state, cfg);
}

}  // namespace penseg::nn
