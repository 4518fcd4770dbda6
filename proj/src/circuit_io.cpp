#include "treelearn/circuit_io.hpp"

#include <fstream>
#include <sstream>

#include "treelearn/errors.hpp"

namespace treelearn {

nlohmann::json circuit_to_json(const Circuit& c) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& layer : c.layers()) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& g : layer) row.push_back(g.to_string());
    gates.push_back(std::move(row));
  }
  nlohmann::json j;
  j["depth"] = c.depth();
  j["gates"] = std::move(gates);
  return j;
}

Circuit circuit_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("depth") || !j.contains("gates")) {
    throw ParseError("circuit JSON needs \"depth\" and \"gates\"");
  }
  if (!j["depth"].is_number_integer()) throw ParseError("circuit depth must be an integer");
  if (!j["gates"].is_array()) throw ParseError("circuit gates must be an array of layers");
  const int depth = j["depth"].get<int>();
  std::vector<std::vector<GateFn>> layers;
  for (const auto& row : j["gates"]) {
    if (!row.is_array()) throw ParseError("circuit layer must be an array of gate strings");
    std::vector<GateFn> layer;
    for (const auto& g : row) {
      if (!g.is_string()) throw ParseError("gate must be a 4-character string");
      layer.push_back(GateFn::from_string(g.get<std::string>()));
    }
    layers.push_back(std::move(layer));
  }
  return Circuit(depth, std::move(layers));
}

std::string circuit_to_text(const Circuit& c) { return circuit_to_json(c).dump(2) + "\n"; }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

Circuit read_circuit_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return circuit_from_json(j);
}

void write_circuit_file(const std::filesystem::path& path, const Circuit& c) {
  write_text_file(path, circuit_to_text(c));
}

}  // namespace treelearn
