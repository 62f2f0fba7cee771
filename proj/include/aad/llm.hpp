#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aad/value.hpp"

namespace aad::llm {

struct Message {
    std::string role;  // system | user | assistant
    std::string content;
    bool operator==(const Message&) const = default;
};

struct Params {
    double temperature = 0.0;
    long long max_tokens = 512;
    std::optional<long long> seed;
    bool operator==(const Params&) const = default;
};

struct Origin {
    std::string session_id;
    std::string node_id;
    long long call_index = 0;
};

struct Request {
    std::string model;
    std::vector<Message> messages;
    Params params;
    Origin origin;

    /// Content of the last user message, or "" when there is none.
    std::string last_user_message() const;
};

struct Usage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

enum class SourceKind { Live, Mimic, Replay, Mock };
std::string_view to_string(SourceKind k);

struct Source {
    SourceKind kind = SourceKind::Live;
    std::string id;  // rule id for Mimic, fingerprint for Replay
};

struct Response {
    std::string content;
    Usage usage;
    Source source;
};

enum class Mode { Live, Record, Replay, MimicFirst };
std::string_view to_string(Mode m);
/// Accepts live, record, replay, mimic-first (and mimic_first).
Mode parse_mode(std::string_view s);

/// Normative token counter: fragments between runs of Unicode White_Space.
std::vector<std::string> whitespace_tokens(std::string_view text);
long long count_tokens(std::string_view text);
long long count_request_tokens(const Request& req);

/// {model, messages, params} with params.seed kept.
Value request_to_value(const Request& req);
Request request_from_value(const Value& v);
/// SHA-256 hex of the canonical JSON of {messages, model, params without seed}.
std::string fingerprint(const Request& req);

class Provider {
public:
    virtual ~Provider() = default;
    virtual Response complete(const Request& req) = 0;
};

class MockProvider : public Provider {
public:
    explicit MockProvider(long long seed = 0) : seed_(seed) {}
    Response complete(const Request& req) override;

private:
    long long seed_;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws Error("Timeout") or Error("ProviderError") on connection failure.
    virtual HttpReply post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                           const std::string& body, int timeout_ms) = 0;
};

class HttplibTransport : public Transport {
public:
    HttpReply post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, int timeout_ms) override;
};

/// Decorator that counts the bytes that would cross the wire.
class CountingTransport : public Transport {
public:
    explicit CountingTransport(Transport& inner) : inner_(inner) {}
    HttpReply post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, int timeout_ms) override;

    std::uint64_t bytes_sent() const { return sent_; }
    std::uint64_t bytes_received() const { return received_; }
    std::uint64_t requests() const { return requests_; }

private:
    Transport& inner_;
    std::atomic<std::uint64_t> sent_{0}, received_{0}, requests_{0};
};

/// Chat-completions client: POST <base_url>/chat/completions.
class HttpProvider : public Provider {
public:
    HttpProvider(std::string base_url, std::string api_key, Transport& transport, int timeout_ms = 60000);
    Response complete(const Request& req) override;

private:
    std::string base_url_;
    std::string api_key_;
    Transport& transport_;
    int timeout_ms_;
};

struct MimicRule {
    std::string id;
    std::optional<std::string> node_pattern;
    std::optional<std::string> contains;
    std::optional<std::pair<long long, long long>> call_index;  // inclusive
    std::string response;
    bool enabled = true;

    bool matches(const Request& req) const;
};

Value rule_to_value(const MimicRule& rule);
/// Throws Error("InvalidRule").
MimicRule rule_from_value(const Value& v);
std::vector<MimicRule> load_mimic_profile(const std::filesystem::path& path);
void save_mimic_profile(const std::filesystem::path& path, const std::vector<MimicRule>& rules);

struct Record {
    std::string fingerprint;
    Request request;
    Response response;
};

class RecordStore {
public:
    std::optional<Record> lookup(const std::string& fingerprint) const;
    void put(const Record& rec);
    std::size_t size() const;
    std::vector<Record> all() const;

    /// Reads records.ndjson; later lines win.
    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    /// New records are appended to this file as they arrive.
    void bind_file(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::map<std::string, Record> records_;
    std::optional<std::filesystem::path> file_;
};

std::string record_to_line(const Record& rec);

class Gateway {
public:
    explicit Gateway(std::shared_ptr<Provider> provider);

    /// Throws Error("ReplayMiss"), Error("ProviderError"), Error("Timeout").
    Response complete(const Request& req, Mode mode, const std::vector<MimicRule>& session_rules = {});

    void add_rule(MimicRule rule);
    void clear_rules();
    std::vector<MimicRule> rules() const;

    RecordStore& records() { return records_; }
    Provider& provider() { return *provider_; }
    bool provider_is_mock() const;

private:
    std::shared_ptr<Provider> provider_;
    RecordStore records_;
    mutable std::mutex mu_;
    std::vector<MimicRule> rules_;
};

struct UsageTotals {
    long long live_calls = 0;
    long long mimic_calls = 0;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long saved_tokens = 0;

    /// Live and Mock answers bill tokens; Mimic and Replay answers add to saved_tokens.
    void add(const Response& resp, const Request& req);
    Value to_value() const;
    static UsageTotals from_value(const Value& v);
};

}  // namespace aad::llm
