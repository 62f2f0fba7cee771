#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aad/llm.hpp"
#include "aad/plugins.hpp"
#include "aad/runtime.hpp"

namespace aad::project {

inline constexpr std::string_view kProjectFile = "project.json";
inline constexpr std::string_view kBundleFile = "bundle.json";
inline constexpr std::string_view kEmbedFile = "embed.json";
inline constexpr std::string_view kRecordsFile = "records.ndjson";
inline constexpr std::string_view kProfileFile = "profile.mimic.json";

struct GatewayConfig {
    std::string mode = "mock";  // live | record | replay | mimic-first | mock
    std::string base_url;
    std::string mimic_profile;  // path relative to the project root
    std::string records;        // path relative to the project root
};

struct ProjectConfig {
    std::filesystem::path root;
    std::string name;
    std::string version = "0.1.0";
    std::string entry_graph;  // path relative to root
    std::vector<std::string> plugin_paths;
    GatewayConfig gateway;
    int debug_port = 7777;
};

/// Reads <dir>/project.json. Throws Error("ConfigError").
ProjectConfig load_project(const std::filesystem::path& dir);
Value project_to_value(const ProjectConfig& cfg);
/// Nearest directory at or above `start` holding project.json.
std::optional<std::filesystem::path> find_project_root(const std::filesystem::path& start);

/// Throws Error("ConfigError") for unknown modes.
void check_mode(std::string_view mode);

/// Everything a session needs, owned in one place.
struct Workspace {
    std::string name;
    runtime::GraphLibrary library;
    plugins::PluginRegistry plugins;
    std::unique_ptr<llm::Transport> transport;
    std::unique_ptr<llm::Gateway> gateway;
    llm::Mode mode = llm::Mode::Live;
    std::string mode_name;
    std::vector<llm::MimicRule> profile;
    std::shared_ptr<const TopologyGraph> entry;

    runtime::Services services() const { return {&library, gateway.get(), &plugins}; }
    runtime::SessionOptions session_options() const;
};

/// Loads the project's graphs, plugins and gateway. `seed` seeds the mock
/// provider. Throws MissingGraph, ConfigError, ManifestError.
std::unique_ptr<Workspace> open_project(const ProjectConfig& cfg, std::optional<long long> seed = std::nullopt);

/// Workspace for a graph file outside any project: mock provider, sibling
/// graphs as the library, plugins from `plugin_dirs`.
std::unique_ptr<Workspace> open_standalone(const std::filesystem::path& graph_file,
                                           const std::vector<std::filesystem::path>& plugin_dirs,
                                           std::optional<long long> seed = std::nullopt);

/// Loads a packaged bundle. Throws Error("InvalidBundle").
std::unique_ptr<Workspace> open_bundle(const std::filesystem::path& dir, std::optional<long long> seed = std::nullopt);

/// Writes a self-contained bundle to `out_dir` and returns its bundle.json.
/// Throws MissingGraph, UnresolvedSubAgent, UnresolvedPlugin, InvalidGraph.
Value package(const ProjectConfig& cfg, const std::filesystem::path& out_dir,
              const std::function<long long()>& clock = {});

/// {endpoint, websocket, entry_graph, protocol}
Value embed_snippet(const std::string& host, int port, const std::string& entry_graph);

/// Graphs of a project keyed by name; the entry file is always included.
std::vector<std::pair<std::filesystem::path, TopologyGraph>> project_graphs(const ProjectConfig& cfg);

std::string iso8601_utc(long long epoch_ms);

}  // namespace aad::project
