#include "penseg/nn/network.hpp"

#include <cmath>

#include "penseg/errors.hpp"

namespace penseg::nn {

namespace {
constexpr double kProbFloor = 1e-12;
}

Network::Network(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed, double l2)
    : input_(std::move(input)), specs_(std::move(specs)), seed_(seed), l2_(l2) {
  if (specs_.empty()) throw ShapeMismatch("network needs at least one layer");
  if (volume(input_) == 0) throw ShapeMismatch("empty input shape");
  Shape shape = input_;
  for (const auto& spec : specs_) {
    layers_.push_back(make_layer(spec, shape));
    shape = layers_.back()->output_shape();
  }
  Rng rng = make_rng(derive_seed(seed_, "init"));
  for (auto& l : layers_) l->init(rng);
}

Network::Network(const Network& other)
    : input_(other.input_), specs_(other.specs_), seed_(other.seed_), l2_(other.l2_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

const Shape& Network::output_shape() const { return layers_.back()->output_shape(); }

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->param_count();
  return n;
}

void Network::check_batch(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != volume(input_)) {
    throw ShapeMismatch("batch width " + std::to_string(batch.cols()) + " does not match input " + to_string(input_));
  }
}

ForwardTrace Network::forward(const Matrix& batch, Mode mode, Rng* rng) const {
  check_batch(batch);
  ForwardTrace trace;
  trace.input = batch;
  trace.outputs.reserve(layers_.size());
  trace.caches.resize(layers_.size());
  const Matrix* in = &trace.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    trace.outputs.push_back(layers_[i]->forward(*in, mode, rng, trace.caches[i]));
    in = &trace.outputs.back();
  }
  return trace;
}

Matrix Network::forward_to(const Matrix& batch, std::size_t last) const {
  check_batch(batch);
  if (last >= layers_.size()) throw ShapeMismatch("layer index out of range");
  Matrix x = batch;
  LayerCache scratch;
  for (std::size_t i = 0; i <= last; ++i) x = layers_[i]->forward(x, Mode::Infer, nullptr, scratch);
  return x;
}

Matrix Network::predict(const Matrix& batch) const { return forward_to(batch, layers_.size() - 1); }

Gradients Network::zero_gradients() const {
  Gradients g(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (const auto& p : layers_[i]->params()) g[i].push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return g;
}

Gradients Network::backward(const ForwardTrace& trace, const Matrix& output_grad) const {
  Gradients grads = zero_gradients();
  Matrix d = output_grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Matrix& in = i == 0 ? trace.input : trace.outputs[i - 1];
    d = layers_[i]->backward(in, trace.outputs[i], d, trace.caches[i], grads[i], i > 0);
  }
  if (l2_ != 0.0) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& info = layers_[i]->param_info();
      for (std::size_t k = 0; k < info.size(); ++k) {
        if (info[k].regularized) grads[i][k] += l2_ * layers_[i]->params()[k];
      }
    }
  }
  return grads;
}

double Network::l2_penalty() const {
  double s = 0.0;
  for (const auto& l : layers_) {
    const auto& info = l->param_info();
    for (std::size_t k = 0; k < info.size(); ++k) {
      if (info[k].regularized) s += l->params()[k].squaredNorm();
    }
  }
  return 0.5 * l2_ * s;
}

std::vector<Matrix*> Network::parameters() {
  std::vector<Matrix*> out;
  for (auto& l : layers_) {
    for (auto& p : l->params()) out.push_back(&p);
  }
  return out;
}

std::vector<const Matrix*> Network::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers_) {
    for (const auto& p : l->params()) out.push_back(&p);
  }
  return out;
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) throw ShapeMismatch("label count mismatch");
  double loss = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    loss -= std::log(std::max(probs(r, labels[static_cast<std::size_t>(r)]), kProbFloor));
  }
  return loss / static_cast<double>(probs.rows());
}

Matrix cross_entropy_grad(const Matrix& probs, const std::vector<int>& labels) {
  Matrix g = Matrix::Zero(probs.rows(), probs.cols());
  const double inv = 1.0 / static_cast<double>(probs.rows());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    g(r, y) = -inv / std::max(probs(r, y), kProbFloor);
  }
  return g;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace penseg::nn
