#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "treelearn/bits.hpp"

namespace treelearn {

class Rng;

enum class Activation { kRelu, kThreshold };

/// x, y -> sum_i u_i sigma(<w_i, x> + <v_i, y> + b_i) with integer first-layer
/// weights in [-B, B]. x and y each have n' = half_inputs coordinates.
struct QuantizedShallowNet {
  int half_inputs = 1;
  int B = 1;
  std::vector<std::vector<int>> w;  ///< k x n'
  std::vector<std::vector<int>> v;  ///< k x n'
  std::vector<int> b;
  std::vector<double> u;
  Activation activation = Activation::kRelu;

  std::size_t width() const { return u.size(); }
  /// Throws DimensionMismatch on ragged shapes, InvalidRange on weights outside [-B, B].
  void validate() const;
  int preactivation(std::size_t unit, std::span<const Bit> x, std::span<const Bit> y) const;
  double operator()(std::span<const Bit> x, std::span<const Bit> y) const;
};

/// Weights and biases uniform integers in [-B, B], u uniform in [-1, 1].
QuantizedShallowNet random_quantized_net(int half_inputs, std::size_t k, int B, Rng& rng);

/// {"n_half", "B", "w", "v", "b", "u", "activation": "relu" | "threshold"}.
nlohmann::json to_json(const QuantizedShallowNet& net);
/// Throws ParseError; shapes are checked by validate().
QuantizedShallowNet quantized_net_from_json(const nlohmann::json& j);

using PairFunction = std::function<double(std::span<const Bit>, std::span<const Bit>)>;

/// M[r][c] = f(x_r, y_c) with x_r = cube_point(n', r): rows and columns in
/// lexicographic order with -1 before +1. Throws TooLarge for n' > 7.
Eigen::MatrixXd build_value_matrix(const PairFunction& f, int half_inputs);
Eigen::MatrixXd build_value_matrix(const QuantizedShallowNet& net);

/// Entrywise sign, +1 at zero.
Eigen::MatrixXi sign_matrix(const Eigen::MatrixXd& m);

/// Rank by Gaussian elimination over the rationals; doubles convert exactly.
std::size_t exact_rank(const Eigen::MatrixXd& m);
/// Number of singular values above rel_tol * sigma_max.
std::size_t numeric_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

struct UnitRankCheck {
  std::size_t unit = 0;
  std::size_t rank = 0;
  std::size_t row_groups = 0;  ///< distinct values of <w_i, x>
  std::size_t col_groups = 0;  ///< distinct values of <v_i, y>
  bool block_constant = false;
  bool in_range = false;       ///< <w_i, x> + <v_i, y> within [-2Bn', 2Bn']
};

struct RankBoundReport {
  int half_inputs = 0;
  std::size_t k = 0;
  int B = 0;
  std::size_t bound = 0;  ///< 4 B k n'
  std::size_t rank_exact = 0;
  std::size_t rank_numeric = 0;
  std::size_t unit_rank_sum = 0;
  bool ranks_agree = false;
  std::vector<UnitRankCheck> units;
  bool pass = false;
};

nlohmann::json to_json(const RankBoundReport& r);

/// Checks rank(M) <= sum_i rank(M_i) <= 4 B k n' with M_i the single-unit
/// matrices, exact against numeric rank, and the blockwise-constant structure
/// of each M_i. Throws TooLarge for n' > 7, k > 32 or B > 7.
RankBoundReport rank_bound_check(const QuantizedShallowNet& net);

struct Verdict {
  std::string lemma;
  nlohmann::json params;
  double margin = 0.0;
  bool pass = false;
};

nlohmann::json to_json(const std::vector<Verdict>& verdicts);

struct SuiteOptions {
  /// "all" or one of lemma1..lemma5, alignment, lemma8.
  std::string scope = "all";
  int max_depth = 3;
  std::uint64_t seed = 0;
  int threads = 1;
  std::size_t lemma1_instances = 20;
  std::size_t lemma2_instances = 50;
  std::size_t lemma3_instances = 20;
  std::size_t generative_instances = 20;  ///< lemma4 and lemma5
  std::size_t rank_instances = 200;
  bool negative_controls = true;
};

/// Verdicts in suite order: instance checks first, then each lemma's
/// negative control ("<lemma>/negative_control", passing when the corrupted
/// input is rejected). Throws InvalidRange on an unknown scope or a depth
/// outside [1, 4].
std::vector<Verdict> run_lemma_suite(const SuiteOptions& opts);

bool all_pass(const std::vector<Verdict>& verdicts);

}  // namespace treelearn
