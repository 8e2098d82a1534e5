#include "penseg/nn/layers.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "penseg/errors.hpp"

namespace penseg::nn {

std::size_t volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ')';
  return os.str();
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::LSTM: return "LSTM";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Reshape: return "Reshape";
  }
  return "?";
}

LayerSpec LayerSpec::conv2d(std::size_t kh, std::size_t kw, std::size_t filters) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.filters = filters;
  s.activation = Activation::Relu;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t ph, std::size_t pw) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.kernel_h = ph;
  s.kernel_w = pw;
  return s;
}

LayerSpec LayerSpec::lstm(std::size_t units, bool return_sequences) {
  LayerSpec s;
  s.kind = LayerKind::LSTM;
  s.units = units;
  s.return_sequences = return_sequences;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec s;
  s.kind = LayerKind::Reshape;
  s.target = std::move(target);
  return s;
}

Layer::Layer(LayerSpec spec, Shape input) : spec_(std::move(spec)), input_(std::move(input)) {}

std::size_t Layer::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

void Layer::add_param(std::string name, std::size_t rows, std::size_t cols, bool regularized) {
  params_.push_back(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
  info_.push_back({std::move(name), regularized});
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

namespace {

using Index = Eigen::Index;

void uniform_fill(Matrix& m, Rng& rng, double limit) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

// ---------------------------------------------------------------------------

class Conv2D final : public Layer {
 public:
  Conv2D(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (in.size() != 3) throw ShapeMismatch("Conv2D expects (H, W, C) input, got " + to_string(in));
    if (spec.kernel_h < 1 || spec.kernel_w < 1 || spec.filters < 1) throw ShapeMismatch("Conv2D: bad kernel or filters");
    if (spec.kernel_h > in[0] || spec.kernel_w > in[1]) {
      throw ShapeMismatch("Conv2D kernel larger than input " + to_string(in));
    }
    h_ = in[0];
    w_ = in[1];
    c_ = in[2];
    oh_ = h_ - spec.kernel_h + 1;
    ow_ = w_ - spec.kernel_w + 1;
    k_ = spec.kernel_h * spec.kernel_w * c_;
    output_ = {oh_, ow_, spec.filters};
    add_param("kernel", k_, spec.filters, true);
    add_param("bias", 1, spec.filters, false);
  }

  void init(Rng& rng) override {
    const double fan_in = static_cast<double>(k_);
    uniform_fill(params_[0], rng, std::sqrt((spec_.activation == Activation::Relu ? 6.0 : 3.0) / fan_in));
    params_[1].setZero();
  }

  Matrix forward(const Matrix& in, Mode, Rng*, LayerCache& cache) const override {
    const Index batch = in.rows();
    const Index rows = batch * static_cast<Index>(oh_ * ow_);
    Matrix z(rows, static_cast<Index>(spec_.filters));
    if (pointwise()) {
      Eigen::Map<const Matrix> patches(in.data(), rows, static_cast<Index>(c_));
      z.noalias() = patches * params_[0];
    } else {
      cache.mats.assign(1, im2col(in));
      z.noalias() = cache.mats[0] * params_[0];
    }
    z.rowwise() += params_[1].row(0);
    if (spec_.activation == Activation::Relu) z = z.cwiseMax(0.0);
    return Eigen::Map<Matrix>(z.data(), batch, static_cast<Index>(volume(output_)));
  }

  Matrix backward(const Matrix& in, const Matrix& out, const Matrix& dout, const LayerCache& cache,
                  std::vector<Matrix>& grads, bool want_input_grad) const override {
    const Index batch = in.rows();
    const Index rows = batch * static_cast<Index>(oh_ * ow_);
    const Index f = static_cast<Index>(spec_.filters);
    Eigen::Map<const Matrix> dy(dout.data(), rows, f);
    Matrix dz = dy;
    if (spec_.activation == Activation::Relu) {
      Eigen::Map<const Matrix> y(out.data(), rows, f);
      dz = (y.array() > 0.0).select(dy, 0.0);
    }
    grads[1].row(0) += dz.colwise().sum();
    if (pointwise()) {
      Eigen::Map<const Matrix> patches(in.data(), rows, static_cast<Index>(c_));
      grads[0].noalias() += patches.transpose() * dz;
      if (!want_input_grad) return {};
      Matrix dp = dz * params_[0].transpose();
      return Eigen::Map<Matrix>(dp.data(), batch, in.cols());
    }
    grads[0].noalias() += cache.mats[0].transpose() * dz;
    if (!want_input_grad) return {};
    const Matrix dp = dz * params_[0].transpose();
    return col2im(dp, batch);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

 private:
  bool pointwise() const { return spec_.kernel_h == 1 && spec_.kernel_w == 1; }

  Matrix im2col(const Matrix& in) const {
    const Index batch = in.rows();
    Matrix p(batch * static_cast<Index>(oh_ * ow_), static_cast<Index>(k_));
    for (Index b = 0; b < batch; ++b) {
      const double* src = in.row(b).data();
      for (std::size_t oh = 0; oh < oh_; ++oh) {
        for (std::size_t ow = 0; ow < ow_; ++ow) {
          double* dst = p.row((b * static_cast<Index>(oh_) + static_cast<Index>(oh)) * static_cast<Index>(ow_) +
                              static_cast<Index>(ow)).data();
          for (std::size_t i = 0; i < spec_.kernel_h; ++i) {
            for (std::size_t j = 0; j < spec_.kernel_w; ++j) {
              const double* s = src + ((oh + i) * w_ + (ow + j)) * c_;
              std::copy(s, s + c_, dst + (i * spec_.kernel_w + j) * c_);
            }
          }
        }
      }
    }
    return p;
  }

  Matrix col2im(const Matrix& dp, Index batch) const {
    Matrix din = Matrix::Zero(batch, static_cast<Index>(h_ * w_ * c_));
    for (Index b = 0; b < batch; ++b) {
      double* dst = din.row(b).data();
      for (std::size_t oh = 0; oh < oh_; ++oh) {
        for (std::size_t ow = 0; ow < ow_; ++ow) {
          const double* src = dp.row((b * static_cast<Index>(oh_) + static_cast<Index>(oh)) * static_cast<Index>(ow_) +
                                     static_cast<Index>(ow)).data();
          for (std::size_t i = 0; i < spec_.kernel_h; ++i) {
            for (std::size_t j = 0; j < spec_.kernel_w; ++j) {
              double* d = dst + ((oh + i) * w_ + (ow + j)) * c_;
              const double* s = src + (i * spec_.kernel_w + j) * c_;
              for (std::size_t c = 0; c < c_; ++c) d[c] += s[c];
            }
          }
        }
      }
    }
    return din;
  }

  std::size_t h_, w_, c_, oh_, ow_, k_;
};

// ---------------------------------------------------------------------------

class MaxPool final : public Layer {
 public:
  MaxPool(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (in.size() != 3) throw ShapeMismatch("MaxPool expects (H, W, C) input, got " + to_string(in));
    if (spec.kernel_h < 1 || spec.kernel_w < 1 || spec.kernel_h > in[0] || spec.kernel_w > in[1]) {
      throw ShapeMismatch("MaxPool window does not fit input " + to_string(in));
    }
    output_ = {in[0] / spec.kernel_h, in[1] / spec.kernel_w, in[2]};
  }

  void init(Rng&) override {}

  Matrix forward(const Matrix& in, Mode, Rng*, LayerCache& cache) const override {
    const std::size_t oh = output_[0], ow = output_[1], c = output_[2];
    const std::size_t w = input_[1];
    const Index batch = in.rows();
    Matrix out(batch, static_cast<Index>(volume(output_)));
    cache.indices.assign(1, std::vector<std::size_t>(static_cast<std::size_t>(out.size())));
    auto& arg = cache.indices[0];
    for (Index b = 0; b < batch; ++b) {
      const double* src = in.row(b).data();
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            std::size_t best = ((y * spec_.kernel_h) * w + x * spec_.kernel_w) * c + ch;
            for (std::size_t i = 0; i < spec_.kernel_h; ++i) {
              for (std::size_t j = 0; j < spec_.kernel_w; ++j) {
                const std::size_t idx = ((y * spec_.kernel_h + i) * w + x * spec_.kernel_w + j) * c + ch;
                if (src[idx] > src[best]) best = idx;
              }
            }
            const std::size_t o = (y * ow + x) * c + ch;
            out(b, static_cast<Index>(o)) = src[best];
            arg[static_cast<std::size_t>(b) * volume(output_) + o] = best;
          }
        }
      }
    }
    return out;
  }

  Matrix backward(const Matrix& in, const Matrix&, const Matrix& dout, const LayerCache& cache,
                  std::vector<Matrix>&, bool want_input_grad) const override {
    if (!want_input_grad) return {};
    Matrix din = Matrix::Zero(in.rows(), in.cols());
    const std::size_t vol = volume(output_);
    const auto& arg = cache.indices[0];
    for (Index b = 0; b < in.rows(); ++b) {
      for (std::size_t o = 0; o < vol; ++o) {
        din(b, static_cast<Index>(arg[static_cast<std::size_t>(b) * vol + o])) += dout(b, static_cast<Index>(o));
      }
    }
    return din;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }
};

// ---------------------------------------------------------------------------

// Gate blocks in the 4U-wide pre-activation: input, forget, cell, output.
class Lstm final : public Layer {
 public:
  Lstm(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (in.size() != 2) throw ShapeMismatch("LSTM expects (T, D) input, got " + to_string(in));
    if (spec.units < 1) throw ShapeMismatch("LSTM needs at least one unit");
    t_ = in[0];
    d_ = in[1];
    u_ = spec.units;
    output_ = spec.return_sequences ? Shape{t_, u_} : Shape{u_};
    add_param("kernel", d_, 4 * u_, true);
    add_param("recurrent_kernel", u_, 4 * u_, true);
    add_param("bias", 1, 4 * u_, false);
  }

  void init(Rng& rng) override {
    const double limit = 1.0 / std::sqrt(static_cast<double>(u_));
    uniform_fill(params_[0], rng, limit);
    uniform_fill(params_[1], rng, limit);
    params_[2].setZero();
    params_[2].block(0, static_cast<Index>(u_), 1, static_cast<Index>(u_)).setConstant(1.0);
  }

  Matrix forward(const Matrix& in, Mode, Rng*, LayerCache& cache) const override {
    const Index batch = in.rows();
    const Index u = static_cast<Index>(u_), d = static_cast<Index>(d_);
    cache.mats.assign(3 * t_, Matrix());
    Matrix out(batch, static_cast<Index>(volume(output_)));
    Matrix h = Matrix::Zero(batch, u), c = Matrix::Zero(batch, u);
    for (std::size_t t = 0; t < t_; ++t) {
      Matrix z(batch, 4 * u);
      z.noalias() = in.middleCols(static_cast<Index>(t) * d, d) * params_[0];
      if (t > 0) z.noalias() += h * params_[1];
      z.rowwise() += params_[2].row(0);
      Matrix g(batch, 4 * u);
      g.leftCols(2 * u) = sigmoid(z.leftCols(2 * u));
      g.middleCols(2 * u, u) = z.middleCols(2 * u, u).array().tanh().matrix();
      g.rightCols(u) = sigmoid(z.rightCols(u));
      c = (g.middleCols(u, u).array() * c.array() + g.leftCols(u).array() * g.middleCols(2 * u, u).array()).matrix();
      h = (g.rightCols(u).array() * c.array().tanh()).matrix();
      if (spec_.return_sequences) out.middleCols(static_cast<Index>(t) * u, u) = h;
      cache.mats[t] = std::move(g);
      cache.mats[t_ + t] = c;
      cache.mats[2 * t_ + t] = h;
    }
    if (!spec_.return_sequences) out = h;
    return out;
  }

  Matrix backward(const Matrix& in, const Matrix&, const Matrix& dout, const LayerCache& cache,
                  std::vector<Matrix>& grads, bool want_input_grad) const override {
    const Index batch = in.rows();
    const Index u = static_cast<Index>(u_), d = static_cast<Index>(d_);
    Matrix din;
    if (want_input_grad) din = Matrix::Zero(batch, in.cols());
    Matrix dh_next = Matrix::Zero(batch, u), dc_next = Matrix::Zero(batch, u);
    for (std::size_t step = t_; step-- > 0;) {
      const Matrix& g = cache.mats[step];
      const Matrix& c = cache.mats[t_ + step];
      Matrix dh = dh_next;
      if (spec_.return_sequences) dh += dout.middleCols(static_cast<Index>(step) * u, u);
      else if (step + 1 == t_) dh += dout;
      const auto gi = g.leftCols(u).array(), gf = g.middleCols(u, u).array();
      const auto gg = g.middleCols(2 * u, u).array(), go = g.rightCols(u).array();
      const Eigen::ArrayXXd tc = c.array().tanh();
      const Eigen::ArrayXXd dc = dh.array() * go * (1.0 - tc * tc) + dc_next.array();
      Matrix dz(batch, 4 * u);
      if (step > 0) {
        const auto c_prev = cache.mats[t_ + step - 1].array();
        dz.middleCols(u, u) = (dc * c_prev * gf * (1.0 - gf)).matrix();
      } else {
        dz.middleCols(u, u).setZero();
      }
      dz.leftCols(u) = (dc * gg * gi * (1.0 - gi)).matrix();
      dz.middleCols(2 * u, u) = (dc * gi * (1.0 - gg * gg)).matrix();
      dz.rightCols(u) = (dh.array() * tc * go * (1.0 - go)).matrix();
      dc_next = (dc * gf).matrix();

      grads[0].noalias() += in.middleCols(static_cast<Index>(step) * d, d).transpose() * dz;
      if (step > 0) {
        grads[1].noalias() += cache.mats[2 * t_ + step - 1].transpose() * dz;
        dh_next.noalias() = dz * params_[1].transpose();
      }
      grads[2].row(0) += dz.colwise().sum();
      if (want_input_grad) din.middleCols(static_cast<Index>(step) * d, d).noalias() = dz * params_[0].transpose();
    }
    return din;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Lstm>(*this); }

 private:
  std::size_t t_, d_, u_;
};

// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (spec.units < 1) throw ShapeMismatch("Dense needs at least one unit");
    n_ = volume(in);
    output_ = {spec.units};
    add_param("kernel", n_, spec.units, true);
    add_param("bias", 1, spec.units, false);
  }

  void init(Rng& rng) override {
    const double gain = spec_.activation == Activation::Relu ? 6.0 : 3.0;
    uniform_fill(params_[0], rng, std::sqrt(gain / static_cast<double>(n_)));
    params_[1].setZero();
  }

  Matrix forward(const Matrix& in, Mode, Rng*, LayerCache&) const override {
    Matrix z(in.rows(), static_cast<Index>(spec_.units));
    z.noalias() = in * params_[0];
    z.rowwise() += params_[1].row(0);
    switch (spec_.activation) {
      case Activation::Linear: return z;
      case Activation::Relu: return z.cwiseMax(0.0);
      case Activation::Softmax: return softmax_rows(z);
    }
    return z;
  }

  Matrix backward(const Matrix& in, const Matrix& out, const Matrix& dout, const LayerCache&,
                  std::vector<Matrix>& grads, bool want_input_grad) const override {
    Matrix dz;
    switch (spec_.activation) {
      case Activation::Linear: dz = dout; break;
      case Activation::Relu: dz = (out.array() > 0.0).select(dout, 0.0); break;
      case Activation::Softmax: {
        const Eigen::VectorXd dot = (dout.array() * out.array()).rowwise().sum();
        dz = (out.array() * (dout.array().colwise() - dot.array())).matrix();
        break;
      }
    }
    grads[0].noalias() += in.transpose() * dz;
    grads[1].row(0) += dz.colwise().sum();
    if (!want_input_grad) return {};
    return dz * params_[0].transpose();
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  std::size_t n_;
};

// ---------------------------------------------------------------------------

class Dropout final : public Layer {
 public:
  Dropout(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw ShapeMismatch("Dropout rate must be in [0, 1)");
    output_ = in;
  }

  void init(Rng&) override {}

  Matrix forward(const Matrix& in, Mode mode, Rng* rng, LayerCache& cache) const override {
    if (mode == Mode::Infer || spec_.rate == 0.0) {
      cache.mats.clear();
      return in;
    }
    if (rng == nullptr) throw Error("Dropout in training mode needs an RNG");
    const double keep = 1.0 - spec_.rate;
    std::bernoulli_distribution bern(keep);
    Matrix mask(in.rows(), in.cols());
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = bern(*rng) ? 1.0 / keep : 0.0;
    Matrix out = in.cwiseProduct(mask);
    cache.mats.assign(1, std::move(mask));
    return out;
  }

  Matrix backward(const Matrix&, const Matrix&, const Matrix& dout, const LayerCache& cache, std::vector<Matrix>&,
                  bool want_input_grad) const override {
    if (!want_input_grad) return {};
    if (cache.mats.empty()) return dout;
    return dout.cwiseProduct(cache.mats[0]);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
};

// ---------------------------------------------------------------------------

class Reshape final : public Layer {
 public:
  Reshape(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    if (volume(spec.target) != volume(in)) {
      throw ShapeMismatch("cannot reshape " + to_string(in) + " to " + to_string(spec.target));
    }
    output_ = spec.target;
  }
  void init(Rng&) override {}
  Matrix forward(const Matrix& in, Mode, Rng*, LayerCache&) const override { return in; }
  Matrix backward(const Matrix&, const Matrix&, const Matrix& dout, const LayerCache&, std::vector<Matrix>&,
                  bool want_input_grad) const override {
    return want_input_grad ? dout : Matrix();
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::Conv2D: return std::make_unique<Conv2D>(spec, input);
    case LayerKind::MaxPool: return std::make_unique<MaxPool>(spec, input);
    case LayerKind::LSTM: return std::make_unique<Lstm>(spec, input);
    case LayerKind::Dense: return std::make_unique<Dense>(spec, input);
    case LayerKind::Dropout: return std::make_unique<Dropout>(spec, input);
    case LayerKind::Reshape: return std::make_unique<Reshape>(spec, input);
  }
  throw ShapeMismatch("unknown layer kind");
}

}  // namespace penseg::nn
