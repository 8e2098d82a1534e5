#include "penseg/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "penseg/errors.hpp"

namespace penseg::nn {

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience_ < 1) throw Error("patience must be at least 1");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

Matrix predict_batched(const Network& model, const Matrix& inputs, std::size_t batch_size) {
  const Eigen::Index n = inputs.rows();
  Matrix out(n, static_cast<Eigen::Index>(volume(model.output_shape())));
  for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(batch_size)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch_size), n - start);
    out.middleRows(start, len) = model.predict(inputs.middleRows(start, len));
  }
  return out;
}

double evaluate_loss(const Network& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw Error("cannot evaluate on an empty dataset");
  return cross_entropy(predict_batched(model, data.inputs, batch_size), data.labels);
}

TrainResult train(Network model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  if (train_set.size() == 0 || val_set.size() == 0) throw Error("train: empty split");
  if (cfg.batch_size < 1) throw Error("train: batch size must be at least 1");
  model.set_l2(cfg.l2_rate);
  Rng rng = make_rng(derive_seed(cfg.seed, "train"));
  AdamState adam;
  const AdamConfig adam_cfg{cfg.learning_rate};
  EarlyStopping stopper(cfg.patience);

  TrainResult result{model, {}, 0, false};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  Matrix batch;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      batch.resize(static_cast<Eigen::Index>(len), train_set.inputs.cols());
      batch_labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = train_set.inputs.row(static_cast<Eigen::Index>(order[start + i]));
        batch_labels[i] = train_set.labels[order[start + i]];
      }
      const ForwardTrace trace = model.forward(batch, Mode::Train, &rng);
      const double loss = cross_entropy(trace.output(), batch_labels);
      if (!std::isfinite(loss)) throw Diverged(epoch);
      loss_sum += loss * static_cast<double>(len);
      seen += len;
      const Gradients grads = model.backward(trace, cross_entropy_grad(trace.output(), batch_labels));
      adam_step(model, grads, adam, adam_cfg);
    }
    const double val_loss = evaluate_loss(model, val_set);
    if (!std::isfinite(val_loss)) throw Diverged(epoch);
    result.history.push_back({epoch, loss_sum / static_cast<double>(seen) + model.l2_penalty(), val_loss});
    if (stopper.update(val_loss)) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

SplitIndices split_dataset(std::size_t n, std::array<double, 3> ratios, Rng& rng) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw Error("split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1])));
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return out;
}

}  // namespace penseg::nn
