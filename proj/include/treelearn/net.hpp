#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treelearn/bits.hpp"
#include "treelearn/circuit.hpp"

namespace treelearn {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double hard_tanh(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

/// g(p) = hard_tanh(sum_l v_l relu(<w_l, p>)) for a two-dimensional input p.
struct NeuralGate {
  std::vector<std::array<double, 2>> w;
  std::vector<Bit> v;

  std::size_t width() const { return w.size(); }
  double preactivation(double a, double b) const;
  double forward(double a, double b) const { return hard_tanh(preactivation(a, b)); }

  friend bool operator==(const NeuralGate&, const NeuralGate&) = default;
};

/// Width-k gate realizing g exactly: units 0..3 are w = p, v = g(p) for the
/// four patterns, remaining units are zero. Throws PreconditionViolated if k < 4.
NeuralGate plant_gate(const GateFn& g, std::size_t k = 4);

/// One network layer: gate j reads inputs 2j and 2j+1.
struct Block {
  std::vector<NeuralGate> gates;

  std::size_t inputs() const { return 2 * gates.size(); }
  std::size_t width() const { return gates.empty() ? 0 : gates.front().width(); }
  /// Throws DimensionMismatch.
  std::vector<double> forward(std::span<const double> in) const;

  friend bool operator==(const Block&, const Block&) = default;
};

/// 1 / (4 sqrt(2) k).
double default_init_scale(std::size_t k);

struct InitOptions {
  double scale = 0.0;  ///< 0 selects default_init_scale(k)
  bool allow_large_scale = false;
};

/// Block for layer `layer` (2^(layer-1) gates of width k). W uniform in
/// [-scale, scale], v uniform +-1, drawn gate by gate and unit by unit.
/// Throws ScaleTooLarge when scale > default_init_scale(k) without the
/// override; with the override a note is appended to `warning` when given.
Block init_block(int layer, std::size_t k, std::uint64_t seed, const InitOptions& opts = {},
                 std::string* warning = nullptr);

/// The trained prefix of the layered network. blocks[t] implements layer
/// depth - t, so the blocks are stored in training order.
struct LayeredNet {
  int depth = 1;
  std::vector<Block> blocks;

  /// Level whose values the net currently outputs.
  int boundary_level() const { return depth - static_cast<int>(blocks.size()); }
  /// Appends the block for layer boundary_level(). Throws DimensionMismatch.
  void push(Block b);

  friend bool operator==(const LayeredNet&, const LayeredNet&) = default;
};

struct NetOutput {
  std::vector<double> values;  ///< the 2^boundary_level outputs
  double pooled = 0.0;         ///< their mean
};

/// Throws DimensionMismatch unless |x| = 2^depth.
NetOutput net_forward(const LayeredNet& net, std::span<const double> x);
NetOutput net_forward(const LayeredNet& net, std::span<const Bit> x);

/// Net whose blocks realize every gate of c exactly.
LayeredNet planted_net(const Circuit& c, std::size_t k = 4);

struct LossParams {
  double lambda = 0.0;
};

/// Inputs to one block with labels and optional weights (empty: uniform).
struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<Bit> labels;
  std::vector<double> weights;

  std::size_t size() const { return inputs.size(); }
  double weight(std::size_t i) const {
    return weights.empty() ? 1.0 / static_cast<double>(inputs.size()) : weights[i];
  }
};

/// max(1 - yP, 0) + lambda |1 - P| per point, averaged with the batch weights.
/// Throws EmptyBatch / DimensionMismatch.
double pooled_loss(const Block& block, const Batch& batch, const LossParams& lp);

/// dL/dW for every gate and unit: grad[j][l] is the derivative for w_l of gate j.
using BlockGradient = std::vector<std::vector<std::array<double, 2>>>;

/// Subgradient of pooled_loss with relu'(0) = 0, hard_tanh'(+-1) = 0, hinge'
/// at margin 1 = 0 and the regularizer's derivative 0 at P = 1.
BlockGradient block_gradient(const Block& block, const Batch& batch, const LossParams& lp);

/// The law of one gate's input pair and label: distinct (a, b, y) with summed weight.
struct GateTableEntry {
  double a = 0.0;
  double b = 0.0;
  Bit y = 1;
  double weight = 0.0;
};
using GateTable = std::vector<GateTableEntry>;

/// One table per gate, entries sorted by (a, b, y).
std::vector<GateTable> gate_tables(const Batch& batch, std::size_t gates);

/// Gradient of pooled_loss restricted to one gate, from its table alone.
/// A gate's derivative is nonzero only while |s| < 1, which forces the pooled
/// output strictly inside (-1, 1); there dL/dP = -y - lambda for every point,
/// so the other gates never enter. Agrees with block_gradient exactly.
std::vector<std::array<double, 2>> gate_gradient(const NeuralGate& g, const GateTable& table,
                                                 double lambda, std::size_t gates_in_block);

struct ExtractResult {
  bool saturated = false;
  GateFn gate;                       ///< sign of the output; +1 where it is 0
  std::array<double, 4> outputs{};   ///< g on the four canonical patterns
  std::array<bool, 4> checked{};     ///< patterns that had to be saturated
  int offending = -1;                ///< first checked pattern with |g| < 1 - tol
};

/// Reads the Boolean gate off a neural gate; `support` restricts the
/// saturation check to the flagged patterns.
ExtractResult extract_gate(const NeuralGate& g, double tol = 1e-9,
                           std::array<bool, 4> support = {true, true, true, true});

}  // namespace treelearn
