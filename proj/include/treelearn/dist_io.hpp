#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treelearn/circuit.hpp"
#include "treelearn/dist.hpp"

namespace treelearn {

/// {"kind": "product", "p": [...] | number, "circuit": <path or object>} or
/// {"kind": "generative", "circuit": <path or object>}. A number for p means
/// every coordinate.
struct DistSpec {
  std::string kind;
  Circuit circuit = Circuit::constant_one(1);
  std::optional<ProductDistribution> product;

  /// Throws UnsupportedGate for a generative spec over other gates.
  LabeledSample sample(Rng& rng) const;
  /// D^(0..d). Throws TooLargeForExact for n > 20.
  std::vector<DiscreteDistribution> chain() const;
};

/// Relative circuit paths resolve against base_dir. Throws ParseError.
DistSpec dist_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
DistSpec read_dist_spec(const std::filesystem::path& path);
/// Inline form with the circuit embedded.
nlohmann::json to_json(const DistSpec& s);

/// {"dimension", "support": [{"x": "+-..", "y", "p"}]} in support order.
nlohmann::json to_json(const DiscreteDistribution& d);

/// One row per sample: n columns of -1/1, then the label.
std::string samples_csv(const std::vector<LabeledSample>& samples);
/// Throws ParseError.
std::vector<LabeledSample> parse_samples_csv(const std::string& text);

}  // namespace treelearn
