#include "treelearn/net_io.hpp"

#include "treelearn/circuit_io.hpp"
#include "treelearn/errors.hpp"

namespace treelearn {

nlohmann::json net_to_json(const LayeredNet& net) {
  nlohmann::json blocks = nlohmann::json::array();
  int layer = net.depth;
  for (const auto& b : net.blocks) {
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& g : b.gates) {
      nlohmann::json w = nlohmann::json::array();
      for (const auto& row : g.w) w.push_back({row[0], row[1]});
      nlohmann::json v = nlohmann::json::array();
      for (Bit s : g.v) v.push_back(static_cast<int>(s));
      gates.push_back({{"W", std::move(w)}, {"v", std::move(v)}});
    }
    blocks.push_back({{"layer", layer--}, {"gates", std::move(gates)}});
  }
  nlohmann::json j;
  j["depth"] = net.depth;
  j["blocks"] = std::move(blocks);
  return j;
}

LayeredNet net_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("depth") || !j.contains("blocks")) {
    throw ParseError("net JSON needs \"depth\" and \"blocks\"");
  }
  if (!j["depth"].is_number_integer() || !j["blocks"].is_array()) {
    throw ParseError("net JSON has malformed \"depth\" or \"blocks\"");
  }
  LayeredNet net;
  net.depth = j["depth"].get<int>();
  if (net.depth < 1 || net.depth > 30) throw DimensionMismatch("net depth must be in [1, 30]");
  try {
    for (const auto& jb : j["blocks"]) {
      if (jb.at("layer").get<int>() != net.boundary_level()) {
        throw DimensionMismatch("blocks must be listed from layer d down to layer 1");
      }
      Block b;
      std::size_t width = 0;
      for (const auto& jg : jb.at("gates")) {
        NeuralGate g;
        for (const auto& row : jg.at("W")) {
          if (!row.is_array() || row.size() != 2) throw ParseError("W rows must have two entries");
          g.w.push_back({row[0].get<double>(), row[1].get<double>()});
        }
        for (const auto& s : jg.at("v")) {
          const int val = s.get<int>();
          if (val != 1 && val != -1) throw ParseError("v entries must be +-1");
          g.v.push_back(static_cast<Bit>(val));
        }
        if (g.w.size() != g.v.size() || g.w.empty()) throw DimensionMismatch("W and v widths differ");
        if (width != 0 && g.width() != width) throw DimensionMismatch("gates of a block share one width");
        width = g.width();
        b.gates.push_back(std::move(g));
      }
      net.push(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("net JSON: ") + e.what());
  }
  return net;
}

std::string net_to_text(const LayeredNet& net) { return net_to_json(net).dump() + "\n"; }

LayeredNet read_net_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return net_from_json(j);
}

void write_net_file(const std::filesystem::path& path, const LayeredNet& net) {
  write_text_file(path, net_to_text(net));
}

}  // namespace treelearn
