#include "aad/plugins.hpp"

#include <charconv>
#include <cmath>
#include <mutex>
#include <set>

#include "aad/process.hpp"
#include "aad/topo_format.hpp"

namespace aad::plugins {

namespace {

[[noreturn]] void manifest_error(const std::string& msg) { throw Error("ManifestError", msg); }

bool valid_namespace(std::string_view ns) {
    if (ns.empty() || !(ns[0] >= 'a' && ns[0] <= 'z')) return false;
    for (char c : ns) {
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    }
    return true;
}

int parse_part(std::string_view s, std::string_view text) {
    int v = 0;
    if (s.empty() || (s.size() > 1 && s[0] == '0')) manifest_error("invalid semver '" + std::string(text) + "'");
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) manifest_error("invalid semver '" + std::string(text) + "'");
    return v;
}

const std::string& string_field(const Value& obj, std::string_view key, std::string_view where) {
    const Value* v = obj.find(key);
    if (!v || !v->is_string()) manifest_error(std::string(where) + "." + std::string(key) + " must be a string");
    return v->as_string();
}

Handler external_handler(std::string component, std::string command, int timeout_ms, std::string cwd) {
    return [component = std::move(component), command = std::move(command), timeout_ms, cwd = std::move(cwd)](
               const Value::Object& config, const Value& input, ComponentContext&) -> Value {
        Value req = Value::Object{{"component", component}, {"config", config}, {"input", input}};
        ProcessResult r = run_process(command, to_json(req), timeout_ms, cwd);
        if (r.timed_out) throw Error("HandlerError", component + ": external handler timed out");
        if (r.exit_code != 0) {
            throw Error("HandlerError", component + ": external handler exited with " + std::to_string(r.exit_code) +
                                            (r.err.empty() ? "" : ": " + r.err.substr(0, 200)));
        }
        try {
            return parse_json(r.out);
        } catch (const Error&) {
            throw Error("HandlerError", component + ": external handler printed malformed JSON");
        }
    };
}

}  // namespace

Semver Semver::parse(std::string_view text) {
    Semver v;
    std::string_view core = text;
    if (auto dash = text.find('-'); dash != std::string_view::npos) {
        v.prerelease = std::string(text.substr(dash + 1));
        core = text.substr(0, dash);
        if (v.prerelease.empty()) manifest_error("invalid semver '" + std::string(text) + "'");
    }
    auto d1 = core.find('.');
    auto d2 = d1 == std::string_view::npos ? d1 : core.find('.', d1 + 1);
    if (d1 == std::string_view::npos || d2 == std::string_view::npos) {
        manifest_error("invalid semver '" + std::string(text) + "'");
    }
    v.major = parse_part(core.substr(0, d1), text);
    v.minor = parse_part(core.substr(d1 + 1, d2 - d1 - 1), text);
    v.patch = parse_part(core.substr(d2 + 1), text);
    return v;
}

std::string Semver::str() const {
    std::string s = std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
    if (!prerelease.empty()) s += "-" + prerelease;
    return s;
}

int compare(const Semver& a, const Semver& b) {
    for (auto [x, y] : {std::pair{a.major, b.major}, std::pair{a.minor, b.minor}, std::pair{a.patch, b.patch}}) {
        if (x != y) return x < y ? -1 : 1;
    }
    if (a.prerelease == b.prerelease) return 0;
    if (a.prerelease.empty()) return 1;
    if (b.prerelease.empty()) return -1;
    return a.prerelease < b.prerelease ? -1 : 1;
}

PluginManifest parse_manifest(const Value& doc, const std::filesystem::path& dir) {
    if (!doc.is_object()) manifest_error("manifest must be a JSON object");
    for (const auto& [k, _] : doc.as_object()) {
        if (k != "namespace" && k != "version" && k != "components" && k != "entry" && k != "description") {
            manifest_error("unknown manifest key '" + k + "'");
        }
    }
    PluginManifest m;
    m.dir = dir;
    m.raw = doc;
    m.ns = string_field(doc, "namespace", "manifest");
    if (!valid_namespace(m.ns)) manifest_error("namespace '" + m.ns + "' must match [a-z][a-z0-9_]*");
    m.version = Semver::parse(string_field(doc, "version", "manifest"));

    const Value* comps = doc.find("components");
    if (!comps || !comps->is_array() || comps->as_array().empty()) {
        manifest_error("manifest.components must be a non-empty array");
    }
    std::set<std::string> seen;
    for (const auto& c : comps->as_array()) {
        if (!c.is_object()) manifest_error("component must be an object");
        ComponentSpec spec;
        spec.name = string_field(c, "name", "component");
        if (!is_valid_identifier(spec.name)) manifest_error("invalid component name '" + spec.name + "'");
        if (!seen.insert(spec.name).second) manifest_error("duplicate component '" + spec.name + "'");
        if (const Value* v = c.find("in_schema")) spec.in_schema = *v;
        if (const Value* v = c.find("out_schema")) spec.out_schema = *v;
        if (const Value* v = c.find("description")) {
            if (!v->is_string()) manifest_error("component.description must be a string");
            spec.description = v->as_string();
        }
        if (const Value* v = c.find("config_keys")) {
            if (!v->is_array()) manifest_error("component.config_keys must be an array");
            for (const auto& k : v->as_array()) {
                if (!k.is_string()) manifest_error("component.config_keys must hold strings");
                spec.config_keys.push_back(k.as_string());
            }
        }
        m.components.push_back(std::move(spec));
    }

    const Value* entry = doc.find("entry");
    if (!entry || !entry->is_object()) manifest_error("manifest.entry must be an object");
    if (entry->find("builtin")) {
        m.entry.builtin = string_field(*entry, "builtin", "entry");
        if (entry->find("fixture")) m.entry.fixture = string_field(*entry, "fixture", "entry");
    } else if (entry->find("command")) {
        m.entry.command = string_field(*entry, "command", "entry");
        if (const Value* t = entry->find("timeout_ms")) {
            if (!t->is_number() || t->as_number() <= 0) manifest_error("entry.timeout_ms must be positive");
            m.entry.timeout_ms = static_cast<int>(t->as_number());
        }
    } else {
        manifest_error("manifest.entry needs 'builtin' or 'command'");
    }
    return m;
}

PluginManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::string text;
    try {
        text = read_text_file(manifest_path);
    } catch (const Error& e) {
        manifest_error(e.what());
    }
    Value doc;
    try {
        doc = parse_json(text);
    } catch (const ParseError& e) {
        manifest_error(manifest_path.string() + ":" + std::to_string(e.line()) + ":" + std::to_string(e.col()) +
                       ": " + e.what());
    }
    return parse_manifest(doc, manifest_path.parent_path());
}

HandlerSet make_builtin_handlers(const PluginManifest& m) {
    HandlerSet all;
    if (m.entry.builtin == "simweb") {
        if (m.entry.fixture.empty()) manifest_error("simweb needs entry.fixture");
        Value site;
        try {
            site = parse_json(read_text_file(m.dir / m.entry.fixture));
        } catch (const Error& e) {
            manifest_error("cannot load fixture: " + std::string(e.what()));
        }
        all = make_simweb_handlers(site);
    } else {
        manifest_error("unknown builtin handler set '" + m.entry.builtin + "'");
    }
    HandlerSet out;
    for (const auto& c : m.components) {
        auto it = all.find(c.name);
        if (it == all.end()) manifest_error("builtin '" + m.entry.builtin + "' has no component '" + c.name + "'");
        out.emplace(c.name, it->second);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> PluginRegistry::load_plugin(const std::filesystem::path& path) {
    std::filesystem::path manifest_path = path;
    if (std::filesystem::is_directory(path)) manifest_path = path / "plugin.json";
    PluginManifest m = load_manifest(manifest_path);

    auto loaded = std::make_shared<Loaded>();
    loaded->manifest = m;
    if (!m.entry.builtin.empty()) {
        loaded->handlers = make_builtin_handlers(m);
    } else {
        std::string command = m.entry.command;
        for (const auto& c : m.components) {
            loaded->handlers.emplace(c.name, external_handler(m.ns + "/" + c.name, command, m.entry.timeout_ms, m.dir.string()));
        }
    }

    std::vector<std::pair<std::string, std::string>> names;
    for (const auto& c : m.components) names.emplace_back(m.ns, c.name);

    std::unique_lock lock(mu_);
    if (auto it = by_ns_.find(m.ns); it != by_ns_.end()) {
        const auto& cur = it->second->manifest;
        int cmp = compare(m.version, cur.version);
        if (cmp < 0) {
            throw Error("DowngradeRefused",
                        m.ns + " " + m.version.str() + " is older than loaded " + cur.version.str());
        }
        if (cmp == 0) {
            if (!(cur.raw == m.raw)) {
                throw Error("NamespaceConflict",
                            m.ns + " " + m.version.str() + " is already loaded with different content");
            }
            return names;
        }
    }
    by_ns_[m.ns] = std::move(loaded);
    return names;
}

Value PluginRegistry::invoke_component(std::string_view ns, std::string_view name, const Value::Object& config,
                                       const Value& input, ComponentContext& ctx) const {
    std::shared_ptr<const Loaded> plugin;
    {
        std::shared_lock lock(mu_);
        auto it = by_ns_.find(ns);
        if (it != by_ns_.end()) plugin = it->second;
    }
    std::string full = std::string(ns) + "/" + std::string(name);
    if (!plugin) throw Error("UnknownComponent", "no component " + full);
    auto h = plugin->handlers.find(name);
    if (h == plugin->handlers.end()) throw Error("UnknownComponent", "no component " + full);
    try {
        return h->second(config, input, ctx);
    } catch (const Error& e) {
        if (e.code() == "HandlerError") throw;
        throw Error("HandlerError", full + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error("HandlerError", full + ": " + e.what());
    }
}

std::vector<CatalogEntry> PluginRegistry::list_components() const {
    std::shared_lock lock(mu_);
    std::vector<CatalogEntry> out;
    for (const auto& [ns, p] : by_ns_) {
        for (const auto& c : p->manifest.components) {
            out.push_back({ns, c.name, p->manifest.version.str(), c.description});
        }
    }
    std::sort(out.begin(), out.end(), [](const CatalogEntry& a, const CatalogEntry& b) {
        return std::tie(a.ns, a.name) < std::tie(b.ns, b.name);
    });
    return out;
}

bool PluginRegistry::has_component(std::string_view ns, std::string_view name) const {
    std::shared_lock lock(mu_);
    auto it = by_ns_.find(ns);
    return it != by_ns_.end() && it->second->handlers.find(name) != it->second->handlers.end();
}

std::vector<PluginManifest> PluginRegistry::plugins() const {
    std::shared_lock lock(mu_);
    std::vector<PluginManifest> out;
    for (const auto& [_, p] : by_ns_) out.push_back(p->manifest);
    return out;
}

std::optional<PluginManifest> PluginRegistry::manifest(std::string_view ns) const {
    std::shared_lock lock(mu_);
    auto it = by_ns_.find(ns);
    if (it == by_ns_.end()) return std::nullopt;
    return it->second->manifest;
}

}  // namespace aad::plugins
