#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treelearn/bits.hpp"

namespace treelearn {

class Rng;

/// A two-input Boolean gate over {-1,+1}, stored as its truth table on the
/// inputs (-1,-1), (-1,+1), (+1,-1), (+1,+1) in exactly that order.
class GateFn {
 public:
  using Table = std::array<Bit, 4>;

  /// Constant +1.
  constexpr GateFn() = default;

  /// Throws PreconditionViolated if an entry is not +-1.
  static GateFn from_table(const Table& table);
  /// Parses a 4-character "+"/"-" string in canonical order. Throws ParseError.
  static GateFn from_string(const std::string& s);

  // +1 is "true" for the Boolean names.
  static GateFn constant(Bit value);
  static GateFn land() { return GateFn({-1, -1, -1, 1}); }
  static GateFn lor() { return GateFn({-1, 1, 1, 1}); }
  static GateFn lnand() { return GateFn({1, 1, 1, -1}); }
  static GateFn lnor() { return GateFn({1, -1, -1, -1}); }
  /// The product z1*z2 (the parity gate of the +-1 encoding).
  static GateFn parity() { return GateFn({1, -1, -1, 1}); }
  /// Selects z1.
  static GateFn left() { return GateFn({-1, -1, 1, 1}); }
  /// Selects z2.
  static GateFn right() { return GateFn({-1, 1, -1, 1}); }

  /// Canonical index of the input pattern (a, b).
  static constexpr int pattern_index(Bit a, Bit b) { return (a > 0 ? 2 : 0) + (b > 0 ? 1 : 0); }
  static constexpr std::array<std::pair<Bit, Bit>, 4> kPatterns{
      {{Bit{-1}, Bit{-1}}, {Bit{-1}, Bit{1}}, {Bit{1}, Bit{-1}}, {Bit{1}, Bit{1}}}};

  Bit operator()(Bit a, Bit b) const { return table_[pattern_index(a, b)]; }

  const Table& table() const { return table_; }
  std::string to_string() const;
  /// 4-bit code, bit t set when table[t] == +1. There are exactly 16 codes.
  unsigned code() const;
  static GateFn from_code(unsigned code);

  GateFn negated() const;
  bool is_constant() const { return table_[0] == table_[1] && table_[1] == table_[2] && table_[2] == table_[3]; }
  /// True for the four gates the generative model accepts.
  bool is_and_or_family() const;

  friend bool operator==(const GateFn&, const GateFn&) = default;

 private:
  constexpr explicit GateFn(const Table& t) : table_(t) {}
  Table table_{1, 1, 1, 1};
};

/// Full-binary-tree circuit of depth d over n = 2^d inputs. Layer 1 is the
/// output gate; layer i holds 2^(i-1) gates and layer d reads the raw inputs.
/// Positions within a layer are 0-based. "Level i" denotes the 2^i values fed
/// into layer i (level d is the input, level 0 is the output).
class Circuit {
 public:
  Circuit(int depth, std::vector<std::vector<GateFn>> layers);

  /// Every gate constant +1.
  static Circuit constant_one(int depth);

  int depth() const { return depth_; }
  std::size_t inputs() const { return std::size_t{1} << depth_; }
  std::size_t gate_count() const { return inputs() - 1; }

  /// layer in [1, depth], pos in [0, 2^(layer-1)).
  const GateFn& gate(int layer, std::size_t pos) const;
  Circuit with_gate(int layer, std::size_t pos, const GateFn& g) const;

  const std::vector<GateFn>& layer(int layer) const;
  /// layers()[0] is layer 1.
  const std::vector<std::vector<GateFn>>& layers() const { return layers_; }

  friend bool operator==(const Circuit&, const Circuit&) = default;

 private:
  int depth_;
  std::vector<std::vector<GateFn>> layers_;
};

/// Gamma_layer: maps the 2^layer values of level `layer` to the 2^(layer-1)
/// values of level layer-1. Throws DimensionMismatch.
BitVector level_map(const Circuit& c, int layer, std::span<const Bit> x);

/// h_C(x). Throws DimensionMismatch unless |x| = 2^depth.
Bit eval_circuit(const Circuit& c, std::span<const Bit> x);

/// All level values for input x; result[i] is level i (so result[depth] == x
/// and result[0] is the single output bit).
std::vector<BitVector> level_values(const Circuit& c, std::span<const Bit> x);

/// Gamma_{1..level}(z): the output computed from the values at `level`.
Bit eval_from_level(const Circuit& c, int level, std::span<const Bit> z);

// ---------------------------------------------------------------------------
// Influence

enum class InfluenceMode {
  kExact,       ///< enumeration of the level's cube, capped
  kAnalytic,    ///< exact path-product over independent sibling subtrees
  kMonteCarlo,  ///< seeded sampling with a standard error
};

enum class InfluenceReading {
  kWholeCircuit,  ///< flip changes Gamma_{1..i}
  kSingleLevel,   ///< flip changes Gamma_i only
};

struct InfluenceOptions {
  InfluenceMode mode = InfluenceMode::kExact;
  InfluenceReading reading = InfluenceReading::kWholeCircuit;
  std::uint64_t exact_cap = std::uint64_t{1} << 20;  ///< max evaluations in exact mode
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
};

struct InfluenceEstimate {
  double value = 0.0;
  double std_error = 0.0;  ///< zero for the exact modes
  std::uint64_t evaluations = 0;
};

/// Influence of coordinate `coord` of level `level` (0 <= level <= depth) under
/// the uniform distribution on that level. Throws IndexOutOfRange and, in
/// exact mode, TooLargeForExact when 2^(2^level) exceeds the cap.
InfluenceEstimate influence(const Circuit& c, int level, std::size_t coord,
                            const InfluenceOptions& opts = {});

/// Replaces every gate whose output has zero influence by constant +1,
/// top-down. Preserves h_C pointwise and is idempotent.
Circuit normalize_constant_gates(const Circuit& c, const InfluenceOptions& opts = {});

// ---------------------------------------------------------------------------
// Named circuits

/// Circuit computing prod_{j in relevant} x_j. Indices are 0-based.
/// Throws EmptyIndexSet / IndexOutOfRange.
Circuit build_parity_circuit(int depth, const std::vector<std::size_t>& relevant);

/// Leaf layout of the f_m circuit. Each of the m OR-groups of m^2 terms is
/// padded to `slots` leaves pairs (a power of two), and the m groups are padded
/// to `groups` (a power of two).
struct FmLayout {
  int m = 1;
  std::size_t slots = 1;
  std::size_t groups = 1;
  int depth = 1;
  std::size_t inputs() const { return 2 * slots * groups; }
  /// Leaf index of x_{ij}; y_{ij} sits at the next index. i < m, j < m^2, 0-based.
  std::size_t leaf(std::size_t i, std::size_t j) const { return 2 * (i * slots + j); }
};

FmLayout fm_layout(int m);

/// Tree circuit for f_m(x,y) = AND_i OR_j (x_ij AND y_ij). Pad terms sit under
/// select-left gates (OR levels) or behind constant +1 subtrees (AND levels).
Circuit build_fm_circuit(int m);

/// Direct evaluation of f_m on the circuit's leaf layout (pad leaves ignored).
Bit fm_formula(const FmLayout& layout, std::span<const Bit> leaves);

/// f_m on separate x, y in {+-1}^(m^3), with x_ij at index i*m^2 + j.
Bit fm_formula_xy(int m, std::span<const Bit> x, std::span<const Bit> y);

/// Uniformly random gates drawn from `allowed` (all 16 gates if empty).
Circuit random_circuit(int depth, Rng& rng, const std::vector<GateFn>& allowed = {});

/// The four gates of the generative model.
std::vector<GateFn> and_or_gates();

}  // namespace treelearn
