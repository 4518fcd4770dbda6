#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "treelearn/circuit.hpp"

namespace treelearn {

/// {"depth": d, "gates": [["+--+"], ["---+", "-+++"], ...]}, layer 1 first.
nlohmann::json circuit_to_json(const Circuit& c);
/// Throws ParseError on malformed documents, DimensionMismatch on bad shapes.
Circuit circuit_from_json(const nlohmann::json& j);

/// Canonical text: two-space indented JSON plus trailing newline.
std::string circuit_to_text(const Circuit& c);

Circuit read_circuit_file(const std::filesystem::path& path);
void write_circuit_file(const std::filesystem::path& path, const Circuit& c);

/// Reads a whole file. Throws ParseError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace treelearn
