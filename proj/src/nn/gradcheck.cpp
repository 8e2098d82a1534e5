#include "penseg/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace penseg::nn {

namespace {

double objective_value(const Network& net, const Matrix& inputs, const Objective& obj, Mode mode,
                       std::uint64_t mask_seed) {
  Rng rng = make_rng(mask_seed);
  const ForwardTrace trace = net.forward(inputs, mode, &rng);
  double loss = 0.0;
  if (const auto* labels = std::get_if<std::vector<int>>(&obj)) {
    loss = cross_entropy(trace.output(), *labels);
  } else {
    loss = trace.output().cwiseProduct(std::get<Matrix>(obj)).sum();
  }
  return loss + net.l2_penalty();
}

}  // namespace

GradCheckReport gradient_check(Network& net, const Matrix& inputs, const Objective& obj, double eps, Mode mode,
                               std::uint64_t mask_seed) {
  Rng rng = make_rng(mask_seed);
  const ForwardTrace trace = net.forward(inputs, mode, &rng);
  Matrix out_grad;
  if (const auto* labels = std::get_if<std::vector<int>>(&obj)) {
    out_grad = cross_entropy_grad(trace.output(), *labels);
  } else {
    out_grad = std::get<Matrix>(obj);
  }
  const Gradients grads = net.backward(trace, out_grad);

  GradCheckReport report;
  for (std::size_t l = 0; l < net.size(); ++l) {
    auto& params = net.layer(l).params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix& p = params[k];
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        double& w = p.data()[i];
        const double saved = w;
        w = saved + eps;
        const double up = objective_value(net, inputs, obj, mode, mask_seed);
        w = saved - eps;
        const double down = objective_value(net, inputs, obj, mode, mask_seed);
        w = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = grads[l][k].data()[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
        ++report.checked;
      }
    }
  }
  return report;
}

GradCheckReport check_layers(const Shape& input, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                             std::size_t batch, double l2, double eps) {
  Network net(input, specs, seed, l2);
  Rng rng = make_rng(derive_seed(seed, "gradcheck"));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(volume(input)));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  // Biases start at zero; jitter them so ReLU kinks are not sitting at the origin.
  for (Matrix* p : net.parameters()) {
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] += 0.1 * u(rng);
  }
  const Shape& out_shape = net.output_shape();
  Objective obj;
  if (specs.back().kind == LayerKind::Dense && specs.back().activation == Activation::Softmax) {
    std::uniform_int_distribution<int> cls(0, static_cast<int>(out_shape[0]) - 1);
    std::vector<int> labels(batch);
    for (auto& y : labels) y = cls(rng);
    obj = labels;
  } else {
    Matrix proj(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(volume(out_shape)));
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = u(rng);
    obj = proj;
  }
  const bool stochastic = std::any_of(specs.begin(), specs.end(),
                                      [](const LayerSpec& s) { return s.kind == LayerKind::Dropout; });
  return gradient_check(net, x, obj, eps, stochastic ? Mode::Train : Mode::Infer, derive_seed(seed, "mask"));
}

}  // namespace penseg::nn
