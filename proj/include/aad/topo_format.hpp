#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "aad/graph.hpp"

namespace aad {

inline constexpr std::string_view kTopoExtension = ".topo.json";

/// Canonical `.topo.json` text: fixed key order, nodes sorted by id, edges
/// sorted by (from.node, from.port), one node or edge per line, LF endings and
/// a trailing newline. Throws Error("InvalidGraph") if the graph does not validate.
std::string serialize(const TopologyGraph& graph, const ComponentCatalog* catalog = nullptr);

/// Same layout as serialize() without the validation gate.
std::string serialize_unchecked(const TopologyGraph& graph);

/// Accepts any JSON spelling of a topology document. Throws
/// ParseError("SyntaxError") for malformed JSON and Error("SchemaError") for
/// wrong versions, unknown keys and missing fields.
TopologyGraph deserialize(std::string_view text);

TopologyGraph load_graph_file(const std::filesystem::path& path);
void save_graph_file(const std::filesystem::path& path, const TopologyGraph& graph,
                     const ComponentCatalog* catalog = nullptr);

/// Graph <-> Value in the same schema as the document (for embedding in
/// protocol replies and bundles).
Value graph_to_value(const TopologyGraph& graph);
TopologyGraph graph_from_value(const Value& doc);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace aad
