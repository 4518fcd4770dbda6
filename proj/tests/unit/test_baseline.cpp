#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "treelearn/baseline.hpp"
#include "treelearn/errors.hpp"
#include "treelearn/random.hpp"

using namespace treelearn;

namespace {

// Direct loop evaluation, independent of the Eigen code path.
double ref_forward(const Mlp2& m, const std::vector<double>& x) {
  double out = m.b2;
  for (Eigen::Index r = 0; r < m.W1.rows(); ++r) {
    double s = m.b1(r);
    for (Eigen::Index c = 0; c < m.W1.cols(); ++c) s += m.W1(r, c) * x[static_cast<std::size_t>(c)];
    out += m.W2(r) * (s > 0 ? s : 0.0);
  }
  return out;
}

std::vector<double*> params(Mlp2& m) {
  std::vector<double*> ps;
  for (Eigen::Index i = 0; i < m.W1.size(); ++i) ps.push_back(m.W1.data() + i);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i) ps.push_back(m.b1.data() + i);
  for (Eigen::Index i = 0; i < m.W2.size(); ++i) ps.push_back(m.W2.data() + i);
  ps.push_back(&m.b2);
  return ps;
}

// Kinks: a hidden preactivation at 0 or (hinge) a margin at 1.
double kink_distance(const Mlp2& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, BaselineLoss loss) {
  double dist = 1e9;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> x(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) x[static_cast<std::size_t>(c)] = X(i, c);
    for (Eigen::Index r = 0; r < m.W1.rows(); ++r) {
      double s = m.b1(r);
      for (Eigen::Index c = 0; c < X.cols(); ++c) s += m.W1(r, c) * X(i, c);
      dist = std::min(dist, std::abs(s));
    }
    if (loss == BaselineLoss::kHinge) dist = std::min(dist, std::abs(1.0 - y(i) * ref_forward(m, x)));
  }
  return dist;
}

}  // namespace

TEST(Mlp, ForwardExamples) {
  Mlp2 m = init_mlp(3, 4, 1).zeros_like();
  m.b2 = 0.7;
  std::vector<double> x{1, -1, 1};
  EXPECT_DOUBLE_EQ(mlp_forward(m, x), 0.7);

  Mlp2 one = init_mlp(2, 1, 1).zeros_like();
  one.W1(0, 0) = 1.0;
  one.W2(0) = 1.0;
  std::vector<double> neg{-1.0, 0.5};
  EXPECT_DOUBLE_EQ(mlp_forward(one, neg), 0.0);
  std::vector<double> pos{2.0, 0.5};
  EXPECT_DOUBLE_EQ(mlp_forward(one, pos), 2.0);

  std::vector<double> bad{1.0};
  EXPECT_THROW(mlp_forward(one, bad), DimensionMismatch);
}

TEST(Mlp, ForwardMatchesLoopOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Mlp2 m = init_mlp(7, 5, static_cast<std::uint64_t>(trial));
    std::vector<double> x(7);
    for (auto& v : x) v = rng.uniform(-2, 2);
    EXPECT_NEAR(mlp_forward(m, x), ref_forward(m, x), 1e-12);
  }
}

TEST(Mlp, LossMatchesForwardAndErrors) {
  const Mlp2 m = init_mlp(4, 3, 2);
  Eigen::MatrixXd X(2, 4);
  X << 1, -1, 1, 1, -1, -1, 1, -1;
  Eigen::VectorXd y(2);
  y << 1, -1;
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> x(X.row(i).size());
    for (int c = 0; c < 4; ++c) x[static_cast<std::size_t>(c)] = X(i, c);
    expect += std::max(1.0 - y(i) * ref_forward(m, x), 0.0);
  }
  EXPECT_NEAR(mlp_loss(m, X, y, BaselineLoss::kHinge), expect / 2, 1e-12);
  EXPECT_THROW(mlp_loss(m, Eigen::MatrixXd(0, 4), Eigen::VectorXd(0), BaselineLoss::kHinge), EmptyBatch);
  EXPECT_THROW(mlp_loss(m, X, Eigen::VectorXd(3), BaselineLoss::kHinge), DimensionMismatch);
  EXPECT_THROW(mlp_loss(m, Eigen::MatrixXd(2, 5), y, BaselineLoss::kHinge), DimensionMismatch);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(77);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; checked < 100; ++trial) {
    ASSERT_LT(trial, 1000);
    const auto loss = trial % 2 == 0 ? BaselineLoss::kHinge : BaselineLoss::kLogistic;
    const std::size_t n = 2 + rng.below(5), hid = 1 + rng.below(6), b = 1 + rng.below(4);
    Mlp2 m = init_mlp(n, hid, rng.next());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(n));
    Eigen::VectorXd y(static_cast<Eigen::Index>(b));
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.5, 1.5);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.sign();
    if (kink_distance(m, X, y, loss) < 1e-3) continue;
    ++checked;
    Mlp2 grad = m.zeros_like();
    mlp_loss(m, X, y, loss, &grad);
    auto ps = params(m);
    auto gs = params(grad);
    for (std::size_t q = 0; q < ps.size(); ++q) {
      const double orig = *ps[q];
      *ps[q] = orig + h;
      const double up = mlp_loss(m, X, y, loss);
      *ps[q] = orig - h;
      const double down = mlp_loss(m, X, y, loss);
      *ps[q] = orig;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(*gs[q]), 1e-3});
      EXPECT_LE(std::abs(fd - *gs[q]) / scale, 1e-6) << "trial " << trial << " param " << q;
    }
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Mlp2 p = init_mlp(4, 3, 9);
  const Mlp2 before = p;
  AdamState s = make_adam(p);
  for (int t = 0; t < 10; ++t) adam_step(s, p.zeros_like(), p);
  EXPECT_EQ(p.W1, before.W1);
  EXPECT_EQ(p.b1, before.b1);
  EXPECT_EQ(p.W2, before.W2);
  EXPECT_EQ(p.b2, before.b2);
  EXPECT_EQ(s.step, 10u);
}

TEST(Adam, ConstantGradientMovesAlphaPerStep) {
  Mlp2 p = init_mlp(2, 2, 3).zeros_like();
  Mlp2 g = p.zeros_like();
  g.W1.setConstant(0.3);
  g.b1.setConstant(-2.0);
  g.W2.setConstant(1e-3);
  g.b2 = 5.0;
  AdamState s = make_adam(p, 1e-3);
  for (int t = 1; t <= 200; ++t) {
    const Mlp2 prev = p;
    adam_step(s, g, p);
    // Bias-corrected moments of a constant gradient are exact: the step is alpha * sign(g).
    EXPECT_NEAR(p.W1(0, 0) - prev.W1(0, 0), -1e-3, 1e-9);
    EXPECT_NEAR(p.b1(1) - prev.b1(1), 1e-3, 1e-9);
    EXPECT_NEAR(p.W2(0) - prev.W2(0), -1e-3, 1e-8);
    EXPECT_NEAR(p.b2 - prev.b2, -1e-3, 1e-9);
  }
}

TEST(Adam, ShapeMismatch) {
  Mlp2 p = init_mlp(4, 3, 1);
  AdamState s = make_adam(p);
  EXPECT_THROW(adam_step(s, init_mlp(5, 3, 1), p), ShapeMismatch);
  AdamState other = make_adam(init_mlp(4, 2, 1));
  EXPECT_THROW(adam_step(other, p.zeros_like(), p), ShapeMismatch);
}

TEST(Figure1, SmallRunIsDeterministicAndWellFormed) {
  Figure1Config cfg;
  cfg.n = 16;
  cfg.k = 3;
  cfg.h = 16;
  cfg.iters = 300;
  cfg.eval_every = 100;
  cfg.test_size = 500;
  cfg.seed = 11;
  const auto a = run_figure1(cfg);
  const auto b = run_figure1(cfg);
  ASSERT_EQ(a.curve.size(), 4u);
  EXPECT_EQ(figure1_csv(a), figure1_csv(b));
  EXPECT_EQ(a.relevant, b.relevant);
  EXPECT_EQ(a.relevant.size(), 3u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].iteration, 100 * i);
    EXPECT_GE(a.curve[i].accuracy, 0.0);
    EXPECT_LE(a.curve[i].accuracy, 1.0);
  }
  const std::string csv = figure1_csv(a);
  EXPECT_EQ(csv.rfind("iteration,accuracy\n0,", 0), 0u);
  cfg.seed = 12;
  EXPECT_NE(figure1_csv(run_figure1(cfg)), csv);
}

TEST(Figure1, EasyBiasedInstanceLearns) {
  Figure1Config cfg;
  cfg.n = 16;
  cfg.k = 3;
  cfg.h = 32;
  cfg.p = 0.8;
  cfg.iters = 2000;
  cfg.test_size = 2000;
  cfg.eval_every = 1000;
  cfg.seed = 3;
  const auto r = run_figure1(cfg);
  EXPECT_GE(r.curve.back().accuracy, 0.95);
}

TEST(Figure1, UniformLabelsBalanced) {
  Figure1Config cfg;
  cfg.p = 0.5;
  cfg.iters = 0;
  cfg.test_size = 10000;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto r = run_figure1(cfg);
    // mean of 10^4 +-1 labels: sigma = 0.01
    EXPECT_LE(std::abs(r.test_label_mean), 0.04);
    ASSERT_EQ(r.curve.size(), 1u);
  }
}

TEST(Figure1, ConfigJsonAndErrors) {
  Figure1Config cfg;
  cfg.loss = BaselineLoss::kLogistic;
  cfg.seed = 42;
  cfg.p = 0.55;
  const auto back = figure1_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_THROW(figure1_config_from_json(nlohmann::json{{"loss", "square"}}), ParseError);
  EXPECT_THROW(figure1_config_from_json(nlohmann::json::array()), ParseError);
  cfg.p = 1.0;
  EXPECT_THROW(run_figure1(cfg), InvalidRange);
  cfg.p = 0.6;
  cfg.k = 200;
  EXPECT_THROW(run_figure1(cfg), InvalidRange);
}
