#include "treelearn/dist_io.hpp"

#include <sstream>

#include "treelearn/bits.hpp"
#include "treelearn/circuit_io.hpp"
#include "treelearn/errors.hpp"

namespace treelearn {

LabeledSample DistSpec::sample(Rng& rng) const {
  if (product) return LabeledProduct(*product, circuit).sample(rng);
  return GenerativeDistribution(circuit).sample(rng);
}

std::vector<DiscreteDistribution> DistSpec::chain() const {
  if (product) return distribution_chain(LabeledProduct(*product, circuit).enumerate(), circuit);
  return GenerativeDistribution(circuit).enumerate_chain();
}

DistSpec dist_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("circuit")) {
    throw ParseError("distribution spec needs \"kind\" and \"circuit\"");
  }
  DistSpec s;
  try {
    s.kind = j["kind"].get<std::string>();
    const auto& cj = j["circuit"];
    if (cj.is_string()) {
      std::filesystem::path p = cj.get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      s.circuit = read_circuit_file(p);
    } else {
      s.circuit = circuit_from_json(cj);
    }
    if (s.kind == "product") {
      if (!j.contains("p")) throw ParseError("product spec needs \"p\"");
      if (j["p"].is_number()) {
        s.product = ProductDistribution::constant(s.circuit.inputs(), j["p"].get<double>());
      } else {
        s.product = ProductDistribution(j["p"].get<std::vector<double>>());
      }
      if (s.product->dimension() != s.circuit.inputs()) {
        throw DimensionMismatch("p has " + std::to_string(s.product->dimension()) + " entries, circuit reads " +
                                std::to_string(s.circuit.inputs()));
      }
    } else if (s.kind == "generative") {
      GenerativeDistribution check(s.circuit);
    } else {
      throw ParseError("kind must be \"product\" or \"generative\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("distribution spec: ") + e.what());
  }
  return s;
}

DistSpec read_dist_spec(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return dist_spec_from_json(j, path.parent_path());
}

nlohmann::json to_json(const DistSpec& s) {
  nlohmann::json j{{"kind", s.kind}, {"circuit", circuit_to_json(s.circuit)}};
  if (s.product) j["p"] = s.product->p;
  return j;
}

nlohmann::json to_json(const DiscreteDistribution& d) {
  nlohmann::json support = nlohmann::json::array();
  for (const auto& pt : d.support()) support.push_back({{"x", format_bits(pt.x)}, {"y", pt.y}, {"p", pt.p}});
  return {{"dimension", d.dimension()}, {"support", support}};
}

std::string samples_csv(const std::vector<LabeledSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    for (Bit b : s.x) {
      out += b > 0 ? "1," : "-1,";
    }
    out += s.y > 0 ? "1\n" : "-1\n";
  }
  return out;
}

std::vector<LabeledSample> parse_samples_csv(const std::string& text) {
  std::vector<LabeledSample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    BitVector row = parse_bits(line);
    if (row.size() < 2) throw ParseError("sample row needs inputs and a label");
    if (n == 0) n = row.size();
    if (row.size() != n) throw ParseError("sample rows differ in length");
    LabeledSample s;
    s.y = row.back();
    row.pop_back();
    s.x = std::move(row);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace treelearn
