#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "aad/graph.hpp"
#include "aad/value.hpp"

namespace aad::plugins {

struct Semver {
    int major = 0;
    int minor = 0;
    int patch = 0;
    std::string prerelease;

    /// Throws Error("ManifestError").
    static Semver parse(std::string_view text);
    std::string str() const;
    friend bool operator==(const Semver&, const Semver&) = default;
};

/// Semver precedence; build metadata is not supported.
int compare(const Semver& a, const Semver& b);

struct ComponentSpec {
    std::string name;
    Value in_schema;
    Value out_schema;
    std::vector<std::string> config_keys;
    std::string description;
};

struct PluginEntry {
    std::string builtin;  // name of an in-process handler set
    std::string fixture;  // builtin data file, relative to the manifest
    std::string command;  // external handler
    int timeout_ms = 5000;
};

struct PluginManifest {
    std::string ns;
    Semver version;
    std::vector<ComponentSpec> components;
    PluginEntry entry;
    std::filesystem::path dir;
    Value raw;
};

/// Throws Error("ManifestError").
PluginManifest parse_manifest(const Value& doc, const std::filesystem::path& dir);
PluginManifest load_manifest(const std::filesystem::path& manifest_path);

struct ComponentContext {
    std::string session_id;
    std::string node_id;
    Value& scratch;  // per-session, per-namespace state
};

using Handler = std::function<Value(const Value::Object& config, const Value& input, ComponentContext& ctx)>;
using HandlerSet = std::map<std::string, Handler, std::less<>>;

/// Builds handlers for a builtin plugin. Throws Error("ManifestError").
HandlerSet make_builtin_handlers(const PluginManifest& manifest);

/// The simweb handler set over a site fixture document.
HandlerSet make_simweb_handlers(const Value& site);
/// The fixed simweb component list, in catalog order.
const std::vector<std::string>& simweb_component_names();

struct CatalogEntry {
    std::string ns;
    std::string name;
    std::string version;
    std::string description;
    friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

class PluginRegistry : public ComponentCatalog {
public:
    /// Loads a manifest file, or a directory containing plugin.json. Atomic.
    /// Throws ManifestError, NamespaceConflict or DowngradeRefused.
    std::vector<std::pair<std::string, std::string>> load_plugin(const std::filesystem::path& path);

    /// Throws Error("UnknownComponent") or Error("HandlerError").
    Value invoke_component(std::string_view ns, std::string_view name, const Value::Object& config,
                           const Value& input, ComponentContext& ctx) const;

    /// Sorted by (namespace, name).
    std::vector<CatalogEntry> list_components() const;
    bool has_component(std::string_view ns, std::string_view name) const override;
    std::vector<PluginManifest> plugins() const;
    std::optional<PluginManifest> manifest(std::string_view ns) const;

private:
    struct Loaded {
        PluginManifest manifest;
        HandlerSet handlers;
    };
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<const Loaded>, std::less<>> by_ns_;
};

}  // namespace aad::plugins
