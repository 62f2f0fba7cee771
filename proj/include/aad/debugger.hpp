#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "aad/llm.hpp"
#include "aad/runtime.hpp"
#include "aad/value.hpp"

namespace aad::debug {

inline constexpr std::string_view kTraceExtension = ".trace.json";
inline constexpr std::string_view kProtocol = "ndjson-v1";

/// Commands accepted when the service runs without --dev.
bool run_mode_allows(std::string_view cmd);
bool known_command(std::string_view cmd);

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    /// Full debug protocol. When false only run-mode commands are accepted
    /// and sessions run without pausing.
    bool dev = true;
    /// Graph started when `start` names none.
    std::string default_graph;
    llm::Mode mode = llm::Mode::MimicFirst;
    std::vector<llm::MimicRule> mimic_profile;
    /// Files served to plain HTTP GETs in dev mode; empty disables.
    std::filesystem::path static_root;
};

/// Debug service over TCP. One port speaks newline-delimited JSON and, for
/// connections opening with an HTTP upgrade to `/debug`, the same JSON in
/// WebSocket text frames.
class Server {
public:
    Server(runtime::SessionManager& sessions, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting. Throws Error("BindError").
    void start();
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();
    int port() const noexcept { return port_; }

    struct Connection;

private:
    struct SessionState {
        bool hooked = false;
        bool resume_after_input = false;
        std::set<Connection*> watchers;
    };

    void accept_loop();
    void serve_client(std::shared_ptr<Connection> c);
    void serve_http(const std::shared_ptr<Connection>& c, std::string head, std::string rest);
    void serve_ndjson(const std::shared_ptr<Connection>& c, std::string buffered);
    void serve_websocket(const std::shared_ptr<Connection>& c, std::string buffered);

    void handle_line(const std::shared_ptr<Connection>& c, std::string_view line);
    Value dispatch(Connection& c, const std::string& cmd, const Value& msg);

    std::shared_ptr<runtime::SessionManager::Entry> entry_for(const std::string& id);
    void broadcast(const std::string& session, const std::string& event, Value data);
    Value report(runtime::Session& s, const runtime::StepOutcome& o);
    Value drive(runtime::Session& s, const std::string& how);

    runtime::SessionManager& sessions_;
    ServerOptions options_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;

    std::mutex mu_;
    std::vector<std::shared_ptr<Connection>> clients_;
    std::vector<std::thread> threads_;
    std::map<std::string, SessionState> state_;
    std::set<Connection*> global_watchers_;
    std::mutex stop_mu_;
    std::condition_variable stopped_cv_;
    bool stopped_ = false;
};

/// Blocking NDJSON client, used by tests and scripted drivers.
class Client {
public:
    Client(const std::string& host, int port);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    /// Sends {cmd, session, args, req} and returns the matching reply.
    /// Events arriving meanwhile are queued.
    Value request(const std::string& cmd, const std::string& session = "", Value args = Value::Object{},
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));
    void send_raw(std::string_view line);
    /// Next line of any kind.
    Value read_message(std::chrono::milliseconds timeout = std::chrono::seconds(30));
    /// First queued or incoming event named `name`; earlier events are kept.
    Value wait_event(const std::string& name, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    std::deque<Value>& events() { return events_; }

private:
    int fd_ = -1;
    long long next_req_ = 1;
    std::string buffer_;
    std::deque<Value> events_;
};

/// WebSocket handshake accept token for a Sec-WebSocket-Key.
std::string websocket_accept(std::string_view key);

}  // namespace aad::debug
