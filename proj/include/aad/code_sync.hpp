#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aad/graph.hpp"

namespace aad {

inline constexpr std::string_view kScriptExtension = ".agent.aad";

/// Agent script for a valid graph. Throws Error("InvalidGraph").
std::string generate(const TopologyGraph& graph, const ComponentCatalog* catalog = nullptr);

/// Same layout as generate() without the validation gate.
std::string render_script(const TopologyGraph& graph);

/// Graph described by the script's blocks and wires; margin text is ignored.
/// The entry is the first Start block.
/// Throws ParseError with code "ParseError" for malformed lines and code
/// "SchemaError" for unknown kinds, duplicate ids, badly typed config values
/// and malformed or undeclared wires.
TopologyGraph parse_script(std::string_view script);

enum class ChangeOrigin { FromText, FromGraph };
std::string_view to_string(ChangeOrigin o);

struct SyncChange {
    ChangeOrigin origin;
    GraphEdit edit;
    friend bool operator==(const SyncChange&, const SyncChange&) = default;
};

/// `key` is a config key, "at" for layout, "kind", "name", "wire <label>" or
/// empty when a whole node was edited on one side and removed on the other.
struct SyncConflict {
    std::string node;
    std::string key;
    Value graph_value;
    Value text_value;
};

struct SyncResult {
    TopologyGraph graph;
    std::string script;
    std::vector<SyncChange> changes;
    std::vector<SyncConflict> conflicts;
};

/// Three-way reconciliation of `edited_script` against `base`. `current` is
/// the graph as edited on the canvas since `base` was generated; it defaults
/// to `base`. Text wins conflicting edits. Margin text of `edited_script` is
/// carried into the returned script.
SyncResult sync(const TopologyGraph& base, std::string_view edited_script, const TopologyGraph* current = nullptr);

Value sync_result_to_value(const SyncResult& r);

}  // namespace aad
