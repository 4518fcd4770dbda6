#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "treelearn/bits.hpp"
#include "treelearn/circuit.hpp"

namespace treelearn {

class Rng;

struct LabeledSample {
  BitVector x;
  Bit y = 1;
};

struct WeightedPoint {
  BitVector x;
  Bit y = 1;
  double p = 0.0;
};

/// Exact finite distribution over {+-1}^m x {+-1}. Support entries are kept
/// sorted by (x, y) and distinct; colliding entries are merged on construction.
class DiscreteDistribution {
 public:
  /// Throws DimensionMismatch on length errors and PreconditionViolated on
  /// negative masses or a total mass more than 1e-9 away from 1.
  DiscreteDistribution(std::size_t dimension, std::vector<WeightedPoint> support);

  /// Uniform empirical distribution of a sample. Throws EmptyBatch.
  static DiscreteDistribution empirical(const std::vector<LabeledSample>& samples);

  std::size_t dimension() const { return dimension_; }
  const std::vector<WeightedPoint>& support() const { return support_; }
  std::size_t size() const { return support_.size(); }

  double total_mass() const;
  double mean_label() const;
  /// E[x_j y]. Throws IndexOutOfRange.
  double correlation(std::size_t j) const;
  /// P[x_j = +1].
  double marginal_plus(std::size_t j) const;

  DiscreteDistribution with_flipped_labels() const;

  /// Probability of a point, 0 when absent.
  double mass(std::span<const Bit> x, Bit y) const;

  /// Draws a support point by inverse CDF.
  LabeledSample sample(Rng& rng) const;

 private:
  std::size_t dimension_;
  std::vector<WeightedPoint> support_;
};

/// Sum over the union of supports of |P - Q| / 2.
double total_variation(const DiscreteDistribution& a, const DiscreteDistribution& b);

/// Image of (x, y) under Gamma_{(level+1)..d}. level == depth is the identity.
DiscreteDistribution pushforward(const DiscreteDistribution& dd, const Circuit& c, int level);

/// D^(0), ..., D^(d) obtained by pushing dd forward through every level.
std::vector<DiscreteDistribution> distribution_chain(const DiscreteDistribution& dd,
                                                     const Circuit& c);

// ---------------------------------------------------------------------------
// Product family

/// Independent bits with p[j] = P[x_j = +1]. Entries must lie in [0, 1].
struct ProductDistribution {
  std::vector<double> p;

  explicit ProductDistribution(std::vector<double> probs);
  static ProductDistribution constant(std::size_t n, double value);

  std::size_t dimension() const { return p.size(); }
  /// min_j min(p_j, 1 - p_j); the distribution is Delta-non-degenerate for
  /// every Delta below this value.
  double nondegeneracy() const;
  bool is_nondegenerate(double delta) const { return nondegeneracy() > delta; }

  BitVector sample(Rng& rng) const;
};

/// (x, h_C(x)) with x drawn from a product distribution.
class LabeledProduct {
 public:
  /// Throws DimensionMismatch when |p| != 2^depth.
  LabeledProduct(ProductDistribution pd, Circuit c);

  const ProductDistribution& inputs() const { return pd_; }
  const Circuit& circuit() const { return c_; }

  LabeledSample sample(Rng& rng) const;
  /// Exact law (zero-mass points omitted). Throws TooLargeForExact for n > 20.
  DiscreteDistribution enumerate() const;

 private:
  ProductDistribution pd_;
  Circuit c_;
};

// ---------------------------------------------------------------------------
// Generative family

/// Top-down generative model over a circuit of AND, OR, NAND and NOR gates.
class GenerativeDistribution {
 public:
  /// Throws UnsupportedGate for any other gate.
  explicit GenerativeDistribution(Circuit c);

  const Circuit& circuit() const { return c_; }

  LabeledSample sample(Rng& rng) const;

  /// D^(0..d) computed level by level in exact rational arithmetic.
  /// Throws TooLargeForExact for n > 20.
  std::vector<DiscreteDistribution> enumerate_chain() const;
  /// D^(d).
  DiscreteDistribution enumerate() const;

  /// D^(level) of the model truncated at `level`, i.e. enumerate_chain()[level].
  DiscreteDistribution enumerate_level(int level) const;

 private:
  Circuit c_;
};

/// Patterns (a, b) with g(a, b) == out, in canonical order.
std::vector<std::pair<Bit, Bit>> pattern_set(const GateFn& g, Bit out);

// ---------------------------------------------------------------------------
// Certificates

struct GateRecord {
  int level = 0;          ///< level i in [1, d]
  std::size_t pos = 0;    ///< coordinate j in [0, 2^i)
  double correlation = 0.0;
  double influence = 0.0;
  double lca_margin = 0.0;  ///< |c| - E[y] - Delta
  bool influencing = false;
  bool boundary = false;  ///< |margin| <= tolerance at the bottom level, accepted
  bool pass = true;
};

struct Witness {
  std::string check;
  int level = 0;
  std::size_t pos = 0;
  std::string detail;
};

struct AnalysisReport {
  double mean_label = 0.0;  ///< after any label flip
  bool labels_flipped = false;
  double delta = 0.0;
  std::vector<GateRecord> gates;  ///< sorted by (level, pos)

  bool lca_checked = false;
  bool lca_holds = false;
  double lca_min_margin = std::numeric_limits<double>::infinity();
  std::size_t boundary_count = 0;

  bool properties_checked = false;
  bool property1 = false;
  bool property2 = false;
  bool property3 = false;
  /// Supremum of the Delta for which Property 1 holds (1 when no gate influences).
  double delta_certified = 0.0;
  /// Smallest positive gate-input pattern probability.
  double epsilon_certified = 0.0;

  std::vector<Witness> witnesses;
};

nlohmann::json to_json(const AnalysisReport& r);

struct CertifyOptions {
  double margin_tolerance = 1e-12;
  double independence_tolerance = 1e-10;
  InfluenceOptions influence{InfluenceMode::kAnalytic};
};

/// chain must be D^(0..d) of `c` (labels flipped internally when E[y] < 0).
AnalysisReport certify_lca(const std::vector<DiscreteDistribution>& chain, const Circuit& c,
                           double delta, const CertifyOptions& opts = {});

AnalysisReport certify_properties(const std::vector<DiscreteDistribution>& chain,
                                  const Circuit& c, const CertifyOptions& opts = {});

/// Per-gate check of |c| - |E[y]| >= (2 xi)^k and P[z_j = 1] in (xi, 1 - xi).
struct ParityBoundRecord {
  int level = 0;
  std::size_t pos = 0;
  double lhs = 0.0;  ///< |c| - |E[y]|
  double rhs = 0.0;  ///< (2 xi)^k
  double marginal = 0.0;
  bool pass = false;
};

struct ParityBoundReport {
  double xi = 0.0;
  std::size_t k = 0;
  std::vector<ParityBoundRecord> gates;  ///< influencing, non-constant values only
  std::size_t skipped_constant = 0;       ///< influencing values constant on the support
  bool pass = false;
  double min_margin = std::numeric_limits<double>::infinity();
};

/// Throws PreconditionViolated unless every p_j is in (xi, 1/2 - xi) or
/// (1/2 + xi, 1 - xi), and TooLargeForExact for n > 20.
ParityBoundReport parity_correlation_bound(const ProductDistribution& pd,
                                           const std::vector<std::size_t>& relevant, double xi);

/// The inequality part of parity_correlation_bound on a given chain D^(0..d)
/// of c, with k relevant coordinates.
ParityBoundReport parity_bound_from_chain(const std::vector<DiscreteDistribution>& chain, const Circuit& c,
                                          std::size_t k, double xi);

/// Per-gate distribution of (input pattern, label) under D^(level):
/// weights[t][y>0] for pattern index t. Used by certificates and the trainer.
struct PatternTable {
  double weight[4][2] = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};
  double pattern_mass(int t) const { return weight[t][0] + weight[t][1]; }
};

/// One table per gate of layer `level` (2^(level-1) gates), from D^(level).
std::vector<PatternTable> pattern_tables(const DiscreteDistribution& d_level);

}  // namespace treelearn
