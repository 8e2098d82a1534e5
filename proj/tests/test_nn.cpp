#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "penseg/errors.hpp"
#include "penseg/nn/checkpoint.hpp"
#include "penseg/nn/gradcheck.hpp"
#include "penseg/nn/network.hpp"
#include "penseg/nn/optim.hpp"
#include "penseg/nn/train.hpp"

using namespace penseg;
using namespace penseg::nn;

namespace {

constexpr double kGradTol = 1e-4;

Network char_model(std::uint64_t seed) {
  return Network({16, 13, 1},
                 {LayerSpec::conv2d(4, 1, 32), LayerSpec::conv2d(4, 1, 64), LayerSpec::maxpool(2, 1),
                  LayerSpec::reshape({5, 13 * 64}), LayerSpec::lstm(128), LayerSpec::dropout(0.5),
                  LayerSpec::dense(15, Activation::Softmax)},
                 seed, 0.01);
}

}  // namespace

TEST_CASE("forward examples") {
  Network id({1}, {LayerSpec::dense(1)}, 1);
  id.layer(0).params()[0](0, 0) = 1.0;
  id.layer(0).params()[1](0, 0) = 0.0;
  Matrix x(1, 1);
  x << 3.25;
  CHECK(id.predict(x)(0, 0) == 3.25);

  Network conv({16, 13, 1}, {LayerSpec::conv2d(4, 1, 8)}, 1);
  CHECK(conv.output_shape() == Shape{13, 13, 8});
  Network pool({10, 13, 3}, {LayerSpec::maxpool(2, 1)}, 1);
  CHECK(pool.output_shape() == Shape{5, 13, 3});

  const auto m = char_model(1);
  CHECK(m.layer_output_shape(0) == Shape{13, 13, 32});
  CHECK(m.layer_output_shape(1) == Shape{10, 13, 64});
  CHECK(m.layer_output_shape(2) == Shape{5, 13, 64});
  CHECK(m.output_shape() == Shape{15});

  CHECK_THROWS_AS(Network({3, 13, 1}, {LayerSpec::conv2d(4, 1, 2)}, 1), ShapeMismatch);
  CHECK_THROWS_AS(m.predict(Matrix::Zero(2, 10)), ShapeMismatch);
}

TEST_CASE("maxpool picks the lower index on ties") {
  Network pool({4, 1, 1}, {LayerSpec::maxpool(2, 1)}, 1);
  Matrix x(1, 4);
  x << 1, 1, 0, 2;
  const auto t = pool.forward(x, Mode::Infer);
  CHECK(t.output()(0, 0) == 1.0);
  CHECK(t.output()(0, 1) == 2.0);
}

TEST_CASE("infer-mode forward is pure and softmax rows sum to one") {
  const auto m = char_model(3);
  Rng rng = make_rng(1);
  Matrix x = Matrix::NullaryExpr(4, 16 * 13, [&] { return uniform(rng, 0, 1); });
  const Matrix a = m.predict(x), b = m.predict(x);
  CHECK(a == b);
  for (Eigen::Index r = 0; r < a.rows(); ++r) CHECK(std::abs(a.row(r).sum() - 1.0) <= 1e-9);
  CHECK(cross_entropy(Matrix::Identity(2, 2), {0, 1}) == 0.0);
}

TEST_CASE("gradient checks per layer kind") {
  SUBCASE("dense") { CHECK(check_layers({5}, {LayerSpec::dense(4, Activation::Relu), LayerSpec::dense(3)}, 1).max_rel_error <= kGradTol); }
  SUBCASE("conv 4x1") { CHECK(check_layers({8, 3, 2}, {LayerSpec::conv2d(4, 1, 3)}, 2).max_rel_error <= kGradTol); }
  SUBCASE("conv 1x1") { CHECK(check_layers({1, 4, 1}, {LayerSpec::conv2d(1, 1, 5)}, 3).max_rel_error <= kGradTol); }
  SUBCASE("maxpool pass-through") {
    CHECK(check_layers({6, 2, 1}, {LayerSpec::conv2d(1, 1, 2), LayerSpec::maxpool(2, 1)}, 4).max_rel_error <= kGradTol);
  }
  SUBCASE("lstm 4 units, 3 steps") {
    CHECK(check_layers({3, 2}, {LayerSpec::lstm(4)}, 5).max_rel_error <= kGradTol);
    CHECK(check_layers({3, 2}, {LayerSpec::lstm(4, true)}, 6).max_rel_error <= kGradTol);
  }
  SUBCASE("softmax and cross-entropy head") {
    CHECK(check_layers({4}, {LayerSpec::dense(3, Activation::Softmax)}, 7).max_rel_error <= kGradTol);
  }
  SUBCASE("small copy of the character network with dropout") {
    const auto r = check_layers({6, 2, 1},
                                {LayerSpec::conv2d(2, 1, 2), LayerSpec::conv2d(2, 1, 2), LayerSpec::maxpool(2, 1),
                                 LayerSpec::reshape({2, 4}), LayerSpec::lstm(3), LayerSpec::dropout(0.5),
                                 LayerSpec::dense(3, Activation::Softmax)},
                                8);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= kGradTol);
  }
}

TEST_CASE("backward") {
  SUBCASE("zero loss gradient leaves the pure l2 term") {
    Network n({3}, {LayerSpec::dense(2)}, 4, 0.01);
    Matrix x = Matrix::Ones(2, 3);
    const auto trace = n.forward(x, Mode::Infer);
    const auto g = n.backward(trace, Matrix::Zero(2, 2));
    CHECK(g[0][0].isApprox(0.01 * n.layer(0).params()[0]));
    CHECK(g[0][1].isZero());
  }
  SUBCASE("2x2 dense under squared loss matches the closed form") {
    Network n({2}, {LayerSpec::dense(2)}, 4, 0.0);
    Matrix w(2, 2), b(1, 2), x(1, 2), t(1, 2);
    w << 0.5, -1.0, 2.0, 0.25;
    b << 0.1, -0.2;
    x << 1.5, -0.5;
    t << 1.0, 0.0;
    n.layer(0).params()[0] = w;
    n.layer(0).params()[1] = b;
    const auto trace = n.forward(x, Mode::Infer);
    // y = x W + b; L = 0.5 |y - t|^2  =>  dW = x^T (y - t), db = y - t.
    const double y0 = 1.5 * 0.5 + -0.5 * 2.0 + 0.1, y1 = 1.5 * -1.0 + -0.5 * 0.25 - 0.2;
    CHECK(trace.output()(0, 0) == doctest::Approx(y0));
    const Matrix r = trace.output() - t;
    const auto g = n.backward(trace, r);
    CHECK(g[0][0](0, 0) == doctest::Approx(1.5 * (y0 - 1.0)));
    CHECK(g[0][0](1, 1) == doctest::Approx(-0.5 * y1));
    CHECK(g[0][1](0, 1) == doctest::Approx(y1));
  }
}

TEST_CASE("dropout keeps the expected activation") {
  Network n({1}, {LayerSpec::dropout(0.5)}, 1);
  Rng rng = make_rng(12);
  const Matrix x = Matrix::Constant(100000, 1, 2.0);
  const auto t = n.forward(x, Mode::Train, &rng);
  CHECK(std::abs(t.output().mean() - 2.0) <= 0.02 * 2.0);
  CHECK(n.forward(x, Mode::Infer).output() == x);
}

TEST_CASE("adam") {
  SUBCASE("first step moves lr in the direction of -sign(g)") {
    Matrix w(1, 3), g(1, 3);
    w << 1, 1, 1;
    g << 0.3, -20, 1e-3;
    AdamState s;
    adam_step({&w}, std::vector<const Matrix*>{&g}, s);
    CHECK(w(0, 0) == doctest::Approx(1 - 0.001).epsilon(1e-6));
    CHECK(w(0, 1) == doctest::Approx(1 + 0.001).epsilon(1e-6));
    CHECK(w(0, 2) == doctest::Approx(1 - 0.001).epsilon(1e-4));
    CHECK(s.step == 1);
  }
  SUBCASE("zero gradient is a no-op") {
    Matrix w = Matrix::Constant(2, 2, 0.7), g = Matrix::Zero(2, 2);
    AdamState s;
    adam_step({&w}, std::vector<const Matrix*>{&g}, s);
    CHECK(w == Matrix::Constant(2, 2, 0.7));
  }
  SUBCASE("minimizes w^2") {
    Matrix w(1, 1), g(1, 1);
    w << 1.0;
    AdamState s;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    for (int i = 0; i < 200; ++i) {
      g = 2 * w;
      adam_step({&w}, std::vector<const Matrix*>{&g}, s, cfg);
    }
    // With lr 0.001 two hundred steps move w by at most 0.2, so the scalar
    // recurrence is run at lr 0.01 where the bound is reachable.
    CHECK(std::abs(w(0, 0)) < 0.1);
  }
}

TEST_CASE("early stopping trace") {
  EarlyStopping es(5);
  const std::vector<double> losses{1.0, .9, .95, .96, .97, .98, .99};
  std::size_t stopped = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    es.update(losses[e]);
    if (es.should_stop()) {
      stopped = e + 1;
      break;
    }
  }
  CHECK(stopped == 7);
  CHECK(es.best_epoch() == 2);
}

namespace {

Dataset toy_set(std::uint64_t seed, int n) {
  Rng rng = make_rng(seed);
  Dataset d;
  d.inputs.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    d.inputs(i, 0) = (y ? 1.0 : -1.0) + 0.3 * uniform(rng, -1, 1);
    d.inputs(i, 1) = uniform(rng, -1, 1);
    d.labels.push_back(y);
  }
  return d;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 8;
  cfg.l2_rate = 0.0;
  cfg.seed = 4;
  return cfg;
}

Network toy_net() {
  return Network({2}, {LayerSpec::dense(4, Activation::Relu), LayerSpec::dense(2, Activation::Softmax)}, 3, 0.0);
}

}  // namespace

TEST_CASE("training on a separable toy set") {
  const auto d = toy_set(2, 200);
  const auto v = toy_set(3, 60);
  const auto a = train(toy_net(), d, v, toy_config());
  const auto b = train(toy_net(), d, v, toy_config());
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].train_loss == b.history[e].train_loss);
  CHECK(a.model.predict(v.inputs) == b.model.predict(v.inputs));
  for (std::size_t e = 1; e < a.history.size(); ++e) CHECK(a.history[e].train_loss < a.history[e - 1].train_loss);
  const auto pred = argmax_rows(a.model.predict(v.inputs));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == v.labels[i];
  CHECK(hit >= 57);

  Dataset poisoned = d;
  poisoned.inputs(5, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(toy_net(), poisoned, v, toy_config()), Diverged);
}

TEST_CASE("split_dataset") {
  Rng rng = make_rng(9);
  const auto s = split_dataset(10, {0.6, 0.2, 0.2}, rng);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);

  const std::size_t n = 4500977;
  const auto big = split_dataset(n, {0.6, 0.2, 0.2}, rng);
  CHECK(big.train.size() + big.val.size() + big.test.size() == n);
  CHECK(std::abs(static_cast<long>(big.train.size()) - 2700585L) <= 1);
  CHECK(std::abs(static_cast<long>(big.val.size()) - 900196L) <= 1);
  CHECK(std::abs(static_cast<long>(big.test.size()) - 900196L) <= 1);
  std::vector<char> seen(n, 0);
  for (const auto* part : {&big.train, &big.val, &big.test})
    for (auto i : *part) seen[i]++;
  CHECK(std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; }));

  CHECK_THROWS(split_dataset(10, {0.5, 0.2, 0.2}, rng));
}

TEST_CASE("checkpoint round trip") {
  const auto m = char_model(11);
  std::stringstream ss;
  save_network(ss, m);
  const std::string bytes = ss.str();
  std::istringstream in(bytes);
  const auto back = load_network(in);
  CHECK(back.param_count() == m.param_count());
  CHECK(back.specs() == m.specs());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(*back.parameters()[i] == *m.parameters()[i]);
  std::ostringstream again;
  save_network(again, back);
  CHECK(again.str() == bytes);

  std::string bumped = bytes;
  bumped[4] = static_cast<char>(kCheckpointVersion + 1);
  std::istringstream vin(bumped);
  CHECK_THROWS_AS(load_network(vin), CheckpointError);
  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_network(cut), CheckpointError);
  std::istringstream junk("not a checkpoint");
  CHECK_THROWS_AS(load_network(junk), CheckpointError);
}

TEST_CASE("model sizes") {
  Network bx({1, 13, 1},
             {LayerSpec::conv2d(1, 1, 32), LayerSpec::conv2d(1, 1, 64), LayerSpec::reshape({1, 832}),
              LayerSpec::lstm(128), LayerSpec::dropout(0.5), LayerSpec::dense(2, Activation::Softmax)},
             1);
  // conv 1x1: 1*32+32, 32*64+64; lstm 4*128*(832+128+1); dense 128*2+2
  CHECK(bx.param_count() == 64 + 2112 + 4 * 128 * (832 + 128 + 1) + 258);
  CHECK(char_model(1).param_count() == char_model(2).param_count());
}
