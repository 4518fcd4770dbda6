#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treelearn/circuit.hpp"
#include "treelearn/dist.hpp"
#include "treelearn/net.hpp"

namespace treelearn {

enum class TheoremVariant { kThm1, kThm2 };
enum class GradientSource { kSample, kPopulation };

std::string to_string(GradientSource s);
std::string to_string(TheoremVariant v);

struct TrainConfig {
  std::size_t k = 4;
  double eta = 0.0;
  /// Regularizer weight. When auto_lambda is set the trainer uses
  /// E[y] + delta / 4 with E[y] taken from the (label-corrected) training data.
  double lambda = 0.0;
  bool auto_lambda = true;
  double delta = 0.0;
  std::uint64_t T = 1;
  double init_scale = 0.0;  ///< 0 selects 1 / (4 sqrt(2) k)
  bool allow_large_scale = false;
  std::uint64_t seed = 0;
  GradientSource source = GradientSource::kPopulation;
  /// Use eta * 2^i for layer i instead of eta.
  bool per_layer_eta = false;
  /// Practical cap on steps per layer; the trainer also stops once every gate has zero gradient.
  std::uint64_t step_cap = 100'000'000;
  /// Apply runs of steps with identical subgradient in closed form.
  bool fast_forward = true;
  /// Train layers d..last_layer only.
  int last_layer = 1;
  int threads = 1;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Reads the fields present in j over `base`. Throws ParseError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct Hyperparams {
  TrainConfig cfg;
  double T_exact = 0.0;      ///< smallest integer strictly above the theorem's bound
  double sample_size = 0.0;  ///< smallest integer strictly above the theorem's bound
};

/// k = ceil(ln(2nd/delta_fail) / ln(4/3)), eta = 1/(16 sqrt(2) k),
/// lambda = mean_label + Delta/4 (auto when mean_label is NaN), and the T and
/// |S| bounds of the chosen variant. epsilon is ignored for kThm1.
/// Throws InvalidRange.
Hyperparams derive_hyperparams(std::size_t n, int d, double delta_fail, double Delta,
                               double epsilon, TheoremVariant variant,
                               double mean_label = std::numeric_limits<double>::quiet_NaN());

struct TrainingMargins {
  double delta = 0.0;
  double epsilon = 0.0;
};

/// Delta: 0.99 * min(|c| - |E[y]|) over influencing values that are not
/// constant on the support, so that LCA holds strictly; epsilon: the smallest
/// positive gate-input pattern mass. Both are capped at 0.49 for
/// derive_hyperparams. delta is <= 0 when some influencing value is too weakly
/// correlated.
TrainingMargins training_margins(const std::vector<DiscreteDistribution>& chain, const Circuit& c);

struct SignMap {
  std::vector<Bit> nu;
  std::vector<bool> influencing;
};

/// Sign map of level `level` from D^(level): nu_j = sign(c_j) when c_j != 0,
/// +1 when the value has zero influence. Throws LcaViolated when c_j = 0 but
/// the value influences the output.
SignMap sign_map_from_correlations(const DiscreteDistribution& d_level, const Circuit& c,
                                   double zero_tolerance = 1e-12);

/// phi(z)_j = nu_j z_j on influencing values, +1 elsewhere.
Bit apply_sign_map(const SignMap& s, std::size_t j, Bit z);

/// Inputs for the gradient-alignment diagnostic.
struct AlignmentCheck {
  Circuit circuit;
  std::vector<DiscreteDistribution> chain;  ///< D^(0..d) of circuit
  double delta = 0.0;
  double epsilon = 0.0;
  double tolerance = 1e-12;
};

struct CurvePoint {
  std::uint64_t step = 0;
  double loss = 0.0;
};

struct LayerTrace {
  int layer = 0;
  double eta = 0.0;
  std::uint64_t steps = 0;          ///< largest step count over the layer's gates
  std::string stop_reason;          ///< saturated | stationary | step_cap | T
  std::size_t gates_saturated = 0;
  std::vector<CurvePoint> loss_curve;
  std::size_t events = 0;           ///< gradient evaluations

  bool alignment_checked = false;
  std::uint64_t alignment_tuples = 0;
  std::uint64_t alignment_violations = 0;
  double alignment_min_slack = std::numeric_limits<double>::infinity();
  std::string alignment_note;
};

struct TrainResult {
  LayeredNet net;
  std::vector<LayerTrace> layers;
  bool labels_flipped = false;
  double mean_label = 0.0;  ///< after any flip
  double lambda = 0.0;
};

/// Algorithm 1 on an exact or empirical distribution: for i = d..last_layer,
/// initialize block i, run full-gradient descent on the pooled loss of
/// B o N_i, freeze. Labels are flipped first when E[y] < 0.
TrainResult train_layerwise(const DiscreteDistribution& data, const TrainConfig& cfg,
                            const AlignmentCheck* alignment = nullptr);

struct LayerMatch {
  int layer = 0;
  bool match = false;
  std::size_t mismatches = 0;
};

struct GateMatch {
  int layer = 0;
  std::size_t pos = 0;
  bool influencing = false;
  bool saturated = false;
  bool match = false;
  GateFn extracted;
};

struct RecoveryReport {
  bool labels_flipped = false;
  bool complete = false;      ///< net has all d blocks
  double error_rate = 1.0;    ///< P[sign(pooled output) != y] over the support
  bool exact = false;         ///< pooled output equals y at every support point
  std::vector<LayerMatch> layers;
  std::vector<GateMatch> gates;
  std::vector<Witness> witnesses;

  bool all_layers_match() const;
  bool influencing_gates_match() const;
};

nlohmann::json to_json(const RecoveryReport& r);
nlohmann::json to_json(const TrainResult& r);

/// Compares the net with phi o Gamma o psi level by level on the support of dd
/// (D^(d) of c), and reads every trained gate off on its support patterns.
/// `labels_flipped` is the trainer's flag; by default it is inferred from dd.
RecoveryReport verify_recovery(const LayeredNet& net, const Circuit& c,
                               const DiscreteDistribution& dd,
                               std::optional<bool> labels_flipped = std::nullopt);

}  // namespace treelearn
