#include "aad/llm.hpp"

#include <fnmatch.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "aad/hashing.hpp"
#include "aad/topo_format.hpp"

namespace aad::llm {

namespace {

bool is_white_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
           c == 0x3000;
}

// Decodes one UTF-8 sequence at s[i]; malformed bytes decode as themselves.
char32_t decode_at(std::string_view s, std::size_t& i) {
    auto b = static_cast<unsigned char>(s[i]);
    int extra = b < 0x80 ? 0 : (b >> 5) == 0x6 ? 1 : (b >> 4) == 0xE ? 2 : (b >> 3) == 0x1E ? 3 : -1;
    if (extra <= 0 || i + static_cast<std::size_t>(extra) >= s.size()) {
        ++i;
        return b;
    }
    char32_t cp = b & (0x3F >> extra);
    for (int k = 1; k <= extra; ++k) {
        auto c = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((c & 0xC0) != 0x80) {
            ++i;
            return b;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

long long int_field(const Value& obj, std::string_view key, long long fallback) {
    const Value* v = obj.find(key);
    if (!v) return fallback;
    if (!v->is_number() || std::floor(v->as_number()) != v->as_number()) {
        throw Error("SchemaError", "field '" + std::string(key) + "' must be an integer");
    }
    return static_cast<long long>(v->as_number());
}

Value messages_value(const std::vector<Message>& messages) {
    Value::Array arr;
    for (const auto& m : messages) arr.push_back(Value::Object{{"role", m.role}, {"content", m.content}});
    return arr;
}

Value response_to_value(const Response& r) {
    return Value::Object{{"content", r.content},
                         {"usage", Value::Object{{"prompt_tokens", r.usage.prompt_tokens},
                                                 {"completion_tokens", r.usage.completion_tokens}}}};
}

Response response_from_value(const Value& v) {
    if (!v.is_object()) throw Error("SchemaError", "response must be an object");
    Response r;
    const Value* c = v.find("content");
    if (!c || !c->is_string()) throw Error("SchemaError", "response.content must be a string");
    r.content = c->as_string();
    if (const Value* u = v.find("usage")) {
        r.usage.prompt_tokens = int_field(*u, "prompt_tokens", 0);
        r.usage.completion_tokens = int_field(*u, "completion_tokens", 0);
    }
    return r;
}

}  // namespace

std::string Request::last_user_message() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") return it->content;
    }
    return {};
}

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Live: return "Live";
        case SourceKind::Mimic: return "Mimic";
        case SourceKind::Replay: return "Replay";
        case SourceKind::Mock: return "Mock";
    }
    return "Live";
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Live: return "live";
        case Mode::Record: return "record";
        case Mode::Replay: return "replay";
        case Mode::MimicFirst: return "mimic-first";
    }
    return "live";
}

Mode parse_mode(std::string_view s) {
    if (s == "live") return Mode::Live;
    if (s == "record") return Mode::Record;
    if (s == "replay") return Mode::Replay;
    if (s == "mimic-first" || s == "mimic_first") return Mode::MimicFirst;
    throw Error("InvalidMode", "unknown gateway mode '" + std::string(s) + "'");
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0, start = 0;
    bool in_token = false;
    while (i < text.size()) {
        std::size_t at = i;
        char32_t c = decode_at(text, i);
        if (is_white_space(c)) {
            if (in_token) out.emplace_back(text.substr(start, at - start));
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            start = at;
        }
    }
    if (in_token) out.emplace_back(text.substr(start));
    return out;
}

long long count_tokens(std::string_view text) {
    long long n = 0;
    std::size_t i = 0;
    bool in_token = false;
    while (i < text.size()) {
        bool ws = is_white_space(decode_at(text, i));
        if (!ws && !in_token) ++n;
        in_token = !ws;
    }
    return n;
}

long long count_request_tokens(const Request& req) {
    long long n = 0;
    for (const auto& m : req.messages) n += count_tokens(m.content);
    return n;
}

Value request_to_value(const Request& req) {
    Value::Object params{{"temperature", req.params.temperature}, {"max_tokens", req.params.max_tokens}};
    if (req.params.seed) params.emplace("seed", *req.params.seed);
    return Value::Object{{"model", req.model}, {"messages", messages_value(req.messages)}, {"params", params}};
}

Request request_from_value(const Value& v) {
    if (!v.is_object()) throw Error("SchemaError", "request must be an object");
    Request r;
    const Value* model = v.find("model");
    if (!model || !model->is_string()) throw Error("SchemaError", "request.model must be a string");
    r.model = model->as_string();
    const Value* msgs = v.find("messages");
    if (!msgs || !msgs->is_array()) throw Error("SchemaError", "request.messages must be an array");
    for (const auto& m : msgs->as_array()) {
        const Value* role = m.find("role");
        const Value* content = m.find("content");
        if (!role || !role->is_string() || !content || !content->is_string()) {
            throw Error("SchemaError", "message needs string role and content");
        }
        r.messages.push_back({role->as_string(), content->as_string()});
    }
    if (const Value* p = v.find("params")) {
        if (const Value* t = p->find("temperature"); t && t->is_number()) r.params.temperature = t->as_number();
        r.params.max_tokens = int_field(*p, "max_tokens", r.params.max_tokens);
        if (p->find("seed")) r.params.seed = int_field(*p, "seed", 0);
    }
    return r;
}

std::string fingerprint(const Request& req) {
    Value doc = Value::Object{
        {"model", req.model},
        {"messages", messages_value(req.messages)},
        {"params", Value::Object{{"temperature", req.params.temperature}, {"max_tokens", req.params.max_tokens}}}};
    return sha256_hex(to_json(doc));
}

Response MockProvider::complete(const Request& req) {
    std::string basis = to_json(messages_value(req.messages)) + "|" + std::to_string(seed_);
    std::string content = "mock(" + hex64(fnv1a64(basis)) + ")";
    auto words = whitespace_tokens(req.last_user_message());
    std::size_t from = words.size() > 8 ? words.size() - 8 : 0;
    for (std::size_t i = from; i < words.size(); ++i) content += " " + words[i];
    Response r;
    r.content = std::move(content);
    r.usage.prompt_tokens = count_request_tokens(req);
    r.usage.completion_tokens = count_tokens(r.content);
    r.source.kind = SourceKind::Mock;
    return r;
}

HttpReply CountingTransport::post(const std::string& url,
                                  const std::vector<std::pair<std::string, std::string>>& headers,
                                  const std::string& body, int timeout_ms) {
    ++requests_;
    std::uint64_t header_bytes = 0;
    for (const auto& [k, v] : headers) header_bytes += k.size() + v.size() + 4;
    sent_ += url.size() + header_bytes + body.size();
    HttpReply reply = inner_.post(url, headers, body, timeout_ms);
    received_ += reply.body.size();
    return reply;
}

HttpProvider::HttpProvider(std::string base_url, std::string api_key, Transport& transport, int timeout_ms)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), transport_(transport), timeout_ms_(timeout_ms) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

Response HttpProvider::complete(const Request& req) {
    Value body = Value::Object{{"model", req.model},
                               {"messages", messages_value(req.messages)},
                               {"temperature", req.params.temperature},
                               {"max_tokens", req.params.max_tokens}};
    std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    HttpReply reply = transport_.post(base_url_ + "/chat/completions", headers, to_json(body), timeout_ms_);
    if (reply.status < 200 || reply.status >= 300) {
        throw Error("ProviderError", "status " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
    }
    Value doc;
    try {
        doc = parse_json(reply.body);
    } catch (const Error&) {
        throw Error("ProviderError", "malformed response body: " + reply.body.substr(0, 200));
    }
    const Value* choices = doc.find("choices");
    if (!choices || !choices->is_array() || choices->as_array().empty()) {
        throw Error("ProviderError", "response has no choices");
    }
    const Value* msg = choices->as_array().front().find("message");
    const Value* content = msg ? msg->find("content") : nullptr;
    if (!content || !content->is_string()) throw Error("ProviderError", "response has no message content");
    Response r;
    r.content = content->as_string();
    r.source.kind = SourceKind::Live;
    if (const Value* u = doc.find("usage")) {
        r.usage.prompt_tokens = int_field(*u, "prompt_tokens", count_request_tokens(req));
        r.usage.completion_tokens = int_field(*u, "completion_tokens", count_tokens(r.content));
    } else {
        r.usage.prompt_tokens = count_request_tokens(req);
        r.usage.completion_tokens = count_tokens(r.content);
    }
    return r;
}

bool MimicRule::matches(const Request& req) const {
    if (!enabled) return false;
    if (node_pattern && fnmatch(node_pattern->c_str(), req.origin.node_id.c_str(), 0) != 0) return false;
    if (contains && req.last_user_message().find(*contains) == std::string::npos) return false;
    if (call_index && (req.origin.call_index < call_index->first || req.origin.call_index > call_index->second)) {
        return false;
    }
    return true;
}

Value rule_to_value(const MimicRule& rule) {
    Value::Object match;
    if (rule.node_pattern) match.emplace("node_pattern", *rule.node_pattern);
    if (rule.contains) match.emplace("contains", *rule.contains);
    if (rule.call_index) {
        if (rule.call_index->first == rule.call_index->second) {
            match.emplace("call_index", rule.call_index->first);
        } else {
            match.emplace("call_index", Value::Array{rule.call_index->first, rule.call_index->second});
        }
    }
    return Value::Object{
        {"id", rule.id}, {"match", match}, {"response", rule.response}, {"enabled", rule.enabled}};
}

MimicRule rule_from_value(const Value& v) {
    auto bad = [](const std::string& m) { return Error("InvalidRule", m); };
    if (!v.is_object()) throw bad("rule must be an object");
    MimicRule r;
    const Value* id = v.find("id");
    if (!id || !id->is_string() || id->as_string().empty()) throw bad("rule.id must be a non-empty string");
    r.id = id->as_string();
    const Value* resp = v.find("response");
    if (!resp || !resp->is_string()) throw bad("rule.response must be a string");
    r.response = resp->as_string();
    if (const Value* e = v.find("enabled")) {
        if (!e->is_bool()) throw bad("rule.enabled must be a boolean");
        r.enabled = e->as_bool();
    }
    if (const Value* m = v.find("match")) {
        if (!m->is_object()) throw bad("rule.match must be an object");
        for (const auto& [k, mv] : m->as_object()) {
            if (k == "node_pattern") {
                if (!mv.is_string()) throw bad("match.node_pattern must be a string");
                r.node_pattern = mv.as_string();
            } else if (k == "contains") {
                if (!mv.is_string()) throw bad("match.contains must be a string");
                r.contains = mv.as_string();
            } else if (k == "call_index") {
                auto as_int = [&](const Value& x) {
                    if (!x.is_number() || std::floor(x.as_number()) != x.as_number()) {
                        throw bad("match.call_index must be an integer or [lo, hi]");
                    }
                    return static_cast<long long>(x.as_number());
                };
                if (mv.is_array()) {
                    if (mv.as_array().size() != 2) throw bad("match.call_index range needs two bounds");
                    r.call_index = std::pair{as_int(mv.as_array()[0]), as_int(mv.as_array()[1])};
                } else if (mv.is_object()) {
                    const Value* lo = mv.find("min");
                    const Value* hi = mv.find("max");
                    r.call_index = std::pair{lo ? as_int(*lo) : 0LL, hi ? as_int(*hi) : (1LL << 53)};
                } else {
                    long long i = as_int(mv);
                    r.call_index = std::pair{i, i};
                }
            } else {
                throw bad("unknown matcher '" + k + "'");
            }
        }
    }
    return r;
}

std::vector<MimicRule> load_mimic_profile(const std::filesystem::path& path) {
    Value doc = parse_json(read_text_file(path));
    if (!doc.is_array()) throw Error("InvalidRule", path.string() + ": profile must be a JSON array of rules");
    std::vector<MimicRule> out;
    for (const auto& r : doc.as_array()) out.push_back(rule_from_value(r));
    return out;
}

void save_mimic_profile(const std::filesystem::path& path, const std::vector<MimicRule>& rules) {
    std::string text = "[";
    for (std::size_t i = 0; i < rules.size(); ++i) {
        text += i ? ",\n  " : "\n  ";
        text += to_json(rule_to_value(rules[i]));
    }
    text += rules.empty() ? "]\n" : "\n]\n";
    write_text_file(path, text);
}

std::string record_to_line(const Record& rec) {
    return to_json(Value::Object{{"fingerprint", rec.fingerprint},
                                 {"request", request_to_value(rec.request)},
                                 {"response", response_to_value(rec.response)}});
}

std::optional<Record> RecordStore::lookup(const std::string& fp) const {
    std::lock_guard lock(mu_);
    auto it = records_.find(fp);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void RecordStore::put(const Record& rec) {
    std::lock_guard lock(mu_);
    records_[rec.fingerprint] = rec;
    if (file_) {
        std::ofstream out(*file_, std::ios::binary | std::ios::app);
        if (!out) throw Error("IoError", "cannot append to " + file_->string());
        out << record_to_line(rec) << '\n';
    }
}

std::size_t RecordStore::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::vector<Record> RecordStore::all() const {
    std::lock_guard lock(mu_);
    std::vector<Record> out;
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
}

void RecordStore::load(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::map<std::string, Record> loaded;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            Value v = parse_json(line);
            Record rec;
            const Value* fp = v.find("fingerprint");
            if (!fp || !fp->is_string()) throw Error("SchemaError", "missing fingerprint");
            rec.fingerprint = fp->as_string();
            const Value* req = v.find("request");
            const Value* resp = v.find("response");
            if (!req || !resp) throw Error("SchemaError", "missing request or response");
            rec.request = request_from_value(*req);
            rec.response = response_from_value(*resp);
            loaded[rec.fingerprint] = std::move(rec);
        } catch (const Error& e) {
            throw Error("SchemaError", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    std::lock_guard lock(mu_);
    for (auto& [k, r] : loaded) records_[k] = std::move(r);
}

void RecordStore::save(const std::filesystem::path& path) const {
    std::string text;
    for (const auto& r : all()) text += record_to_line(r) + "\n";
    write_text_file(path, text);
}

void RecordStore::bind_file(const std::filesystem::path& path) {
    std::lock_guard lock(mu_);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_ = path;
}

Gateway::Gateway(std::shared_ptr<Provider> provider) : provider_(std::move(provider)) {}

bool Gateway::provider_is_mock() const { return dynamic_cast<const MockProvider*>(provider_.get()) != nullptr; }

void Gateway::add_rule(MimicRule rule) {
    std::lock_guard lock(mu_);
    for (auto& r : rules_) {
        if (r.id == rule.id) {
            r = std::move(rule);
            return;
        }
    }
    rules_.push_back(std::move(rule));
}

void Gateway::clear_rules() {
    std::lock_guard lock(mu_);
    rules_.clear();
}

std::vector<MimicRule> Gateway::rules() const {
    std::lock_guard lock(mu_);
    return rules_;
}

Response Gateway::complete(const Request& req, Mode mode, const std::vector<MimicRule>& session_rules) {
    if (req.messages.empty()) throw Error("InvalidRequest", "request has no messages");
    auto local = [&](std::string content, Source src) {
        Response r;
        r.usage.prompt_tokens = count_request_tokens(req);
        r.usage.completion_tokens = count_tokens(content);
        r.content = std::move(content);
        r.source = std::move(src);
        return r;
    };
    const std::string fp = fingerprint(req);
    if (mode == Mode::MimicFirst) {
        for (const auto& r : session_rules) {
            if (r.matches(req)) return local(r.response, {SourceKind::Mimic, r.id});
        }
        for (const auto& r : rules()) {
            if (r.matches(req)) return local(r.response, {SourceKind::Mimic, r.id});
        }
        if (auto hit = records_.lookup(fp)) return local(hit->response.content, {SourceKind::Replay, fp});
        return provider_->complete(req);
    }
    if (mode == Mode::Replay) {
        if (auto hit = records_.lookup(fp)) return local(hit->response.content, {SourceKind::Replay, fp});
        throw Error("ReplayMiss", "no recorded response for fingerprint " + fp);
    }
    Response resp = provider_->complete(req);
    if (mode == Mode::Record) {
        Request stored = req;
        stored.origin = {};
        records_.put(Record{fp, stored, resp});
    }
    return resp;
}

void UsageTotals::add(const Response& resp, const Request&) {
    if (resp.source.kind == SourceKind::Live || resp.source.kind == SourceKind::Mock) {
        ++live_calls;
        prompt_tokens += resp.usage.prompt_tokens;
        completion_tokens += resp.usage.completion_tokens;
    } else {
        ++mimic_calls;
        saved_tokens += resp.usage.prompt_tokens + resp.usage.completion_tokens;
    }
}

Value UsageTotals::to_value() const {
    return Value::Object{{"live_calls", live_calls},
                         {"mimic_calls", mimic_calls},
                         {"prompt_tokens", prompt_tokens},
                         {"completion_tokens", completion_tokens},
                         {"saved_tokens", saved_tokens}};
}

UsageTotals UsageTotals::from_value(const Value& v) {
    UsageTotals u;
    u.live_calls = int_field(v, "live_calls", 0);
    u.mimic_calls = int_field(v, "mimic_calls", 0);
    u.prompt_tokens = int_field(v, "prompt_tokens", 0);
    u.completion_tokens = int_field(v, "completion_tokens", 0);
    u.saved_tokens = int_field(v, "saved_tokens", 0);
    return u;
}

}  // namespace aad::llm
