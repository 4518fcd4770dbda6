#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace treelearn {

/// x -> W2 . relu(W1 x + b1) + b2.
struct Mlp2 {
  Eigen::MatrixXd W1;  ///< h x n
  Eigen::VectorXd b1;
  Eigen::VectorXd W2;
  double b2 = 0.0;

  std::size_t inputs() const { return static_cast<std::size_t>(W1.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(W1.rows()); }
  /// Zero-valued network of the same shape.
  Mlp2 zeros_like() const;
};

/// Entries uniform in +-1/sqrt(fan_in) (n for the first layer, h for the second).
Mlp2 init_mlp(std::size_t n, std::size_t h, std::uint64_t seed);

/// Throws DimensionMismatch.
double mlp_forward(const Mlp2& m, std::span<const double> x);

enum class BaselineLoss { kHinge, kLogistic };
std::string to_string(BaselineLoss l);

/// Mean loss over the rows of X (labels +-1) and, when grad is given, its
/// gradient. relu'(0) = 0 and hinge' = 0 at margin exactly 1.
/// Throws EmptyBatch / DimensionMismatch.
double mlp_loss(const Mlp2& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, BaselineLoss loss,
                Mlp2* grad = nullptr);

struct AdamState {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  Mlp2 m1;
  Mlp2 m2;
};

AdamState make_adam(const Mlp2& params, double alpha = 1e-3);

/// Bias-corrected Adam update. Throws ShapeMismatch.
void adam_step(AdamState& state, const Mlp2& grads, Mlp2& params);

struct Figure1Config {
  std::size_t n = 128;
  std::size_t k = 5;
  std::size_t h = 128;
  double p = 0.6;
  std::uint64_t iters = 10000;
  std::size_t batch = 50;
  std::uint64_t eval_every = 1000;
  std::size_t test_size = 10000;
  /// 0 draws fresh batches every iteration; otherwise batches come from a fixed training set of this size.
  std::size_t train_size = 0;
  BaselineLoss loss = BaselineLoss::kHinge;
  double alpha = 1e-3;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const Figure1Config& cfg);
/// Throws ParseError.
Figure1Config figure1_config_from_json(const nlohmann::json& j, Figure1Config base = {});

struct CurvePointAcc {
  std::uint64_t iteration = 0;
  double accuracy = 0.0;
};

struct Figure1Result {
  std::vector<std::size_t> relevant;  ///< parity index set, sorted
  std::vector<CurvePointAcc> curve;
  double test_label_mean = 0.0;
};

/// k-parity over a random index set with x_j = +1 w.p. p, trained with Adam.
/// Throws InvalidRange unless p is in (0, 1) and k <= n.
Figure1Result run_figure1(const Figure1Config& cfg);

/// "iteration,accuracy" rows.
std::string figure1_csv(const Figure1Result& r);

}  // namespace treelearn
