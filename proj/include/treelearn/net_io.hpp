#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "treelearn/net.hpp"

namespace treelearn {

/// {"depth": d, "blocks": [{"layer": i, "gates": [{"W": [[w0, w1], ...], "v": [...]}]}]},
/// blocks in training order. Doubles use shortest round-trip decimals.
nlohmann::json net_to_json(const LayeredNet& net);
/// Throws ParseError / DimensionMismatch.
LayeredNet net_from_json(const nlohmann::json& j);

std::string net_to_text(const LayeredNet& net);
LayeredNet read_net_file(const std::filesystem::path& path);
void write_net_file(const std::filesystem::path& path, const LayeredNet& net);

}  // namespace treelearn
