#include "aad/debugger.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "aad/hashing.hpp"
#include "aad/topo_format.hpp"

namespace aad::debug {

namespace {

constexpr std::string_view kWsGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxLine = 16 * 1024 * 1024;

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

/// Appends whatever is readable to `buf`. False on EOF or error.
bool read_some(int fd, std::string& buf) {
    char chunk[8192];
    for (;;) {
        ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        buf.append(chunk, static_cast<std::size_t>(n));
        return true;
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string header_value(const std::string& head, const std::string& name) {
    std::string lh = lower(head);
    auto pos = lh.find("\r\n" + lower(name) + ":");
    if (pos == std::string::npos) return {};
    pos += name.size() + 3;
    auto end = head.find("\r\n", pos);
    std::string v = head.substr(pos, end - pos);
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t") + 1);
    return v;
}

std::string ws_frame(std::string_view payload, unsigned char opcode = 0x1) {
    std::string f;
    f.push_back(static_cast<char>(0x80 | opcode));
    if (payload.size() < 126) {
        f.push_back(static_cast<char>(payload.size()));
    } else if (payload.size() <= 0xFFFF) {
        f.push_back(126);
        f.push_back(static_cast<char>((payload.size() >> 8) & 0xFF));
        f.push_back(static_cast<char>(payload.size() & 0xFF));
    } else {
        f.push_back(127);
        for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((payload.size() >> (8 * i)) & 0xFF));
    }
    f.append(payload);
    return f;
}

std::string_view content_type(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    return "application/octet-stream";
}

Value error_reply(const Value& re, std::string code, std::string message = {}) {
    Value::Object o{{"re", re}, {"ok", false}, {"error", std::move(code)}};
    if (!message.empty()) o.emplace("message", std::move(message));
    return o;
}

const Value& arg(const Value& msg, std::string_view key) {
    static const Value null;
    const Value* args = msg.find("args");
    const Value* v = args ? args->find(key) : nullptr;
    return v ? *v : null;
}

std::string arg_string(const Value& msg, std::string_view key) {
    const Value& v = arg(msg, key);
    if (v.is_null()) return {};
    if (!v.is_string()) throw Error("BadRequest", "args." + std::string(key) + " must be a string");
    return v.as_string();
}

Value event_data(const runtime::TraceEvent& e) {
    Value::Object d{{"frame_depth", e.frame_depth}};
    if (e.node) d.emplace("node", *e.node);
    if (e.data.is_object()) {
        for (const auto& [k, v] : e.data.as_object()) d.emplace(k, v);
    }
    return d;
}

}  // namespace

bool run_mode_allows(std::string_view cmd) {
    return cmd == "attach" || cmd == "start" || cmd == "provide_input" || cmd == "get_trace" || cmd == "detach";
}

bool known_command(std::string_view cmd) {
    static const std::set<std::string_view> all{"attach",         "detach",         "start",         "continue",
                                                "step_over",      "step_into",      "step_out",      "set_breakpoint",
                                                "clear_breakpoint", "inspect",      "provide_input", "set_mimic_rule",
                                                "clear_mimic_rules", "get_trace"};
    return all.count(cmd) > 0;
}

std::string websocket_accept(std::string_view key) {
    auto d = sha1_digest(std::string(key) + std::string(kWsGuid));
    return base64_encode(std::string_view(reinterpret_cast<const char*>(d.data()), d.size()));
}

struct Server::Connection {
    int fd = -1;
    bool websocket = false;
    std::mutex write_mu;

    bool send(const Value& v) {
        std::string text = to_json(v);
        std::lock_guard lock(write_mu);
        if (websocket) return send_all(fd, ws_frame(text));
        text.push_back('\n');
        return send_all(fd, text);
    }
};

Server::Server(runtime::SessionManager& sessions, ServerOptions options)
    : sessions_(sessions), options_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::start() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(options_.port);
    if (int rc = ::getaddrinfo(options_.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw Error("BindError", options_.host + ": " + gai_strerror(rc));
    }
    std::string why = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
            listen_fd_ = fd;
            break;
        }
        why = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (listen_fd_ < 0) throw Error("BindError", options_.host + ":" + port + ": " + why);

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                       : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        for (auto& c : clients_) ::shutdown(c->fd, SHUT_RDWR);
        threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    {
        std::lock_guard lock(stop_mu_);
        stopped_ = true;
    }
    stopped_cv_.notify_all();
}

void Server::wait() {
    std::unique_lock lock(stop_mu_);
    stopped_cv_.wait(lock, [this] { return stopped_; });
}

void Server::accept_loop() {
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        auto c = std::make_shared<Connection>();
        c->fd = fd;
        std::lock_guard lock(mu_);
        clients_.push_back(c);
        threads_.emplace_back([this, c] { serve_client(c); });
    }
}

void Server::serve_client(std::shared_ptr<Connection> c) {
    std::string buf;
    while (buf.size() < 4 && buf.find('\n') == std::string::npos) {
        if (!read_some(c->fd, buf)) break;
    }
    if (buf.starts_with("GET ")) {
        while (buf.find("\r\n\r\n") == std::string::npos && buf.size() < 65536) {
            if (!read_some(c->fd, buf)) break;
        }
        auto end = buf.find("\r\n\r\n");
        if (end != std::string::npos) serve_http(c, buf.substr(0, end + 2), buf.substr(end + 4));
    } else if (!buf.empty()) {
        serve_ndjson(c, std::move(buf));
    }

    std::lock_guard lock(mu_);
    global_watchers_.erase(c.get());
    for (auto& [_, st] : state_) st.watchers.erase(c.get());
    std::erase(clients_, c);
    ::close(c->fd);
}

void Server::serve_http(const std::shared_ptr<Connection>& c, std::string head, std::string rest) {
    auto sp = head.find(' ', 4);
    std::string target = head.substr(4, sp == std::string::npos ? std::string::npos : sp - 4);
    target = target.substr(0, target.find('?'));
    auto respond = [&](std::string_view status, std::string_view type, std::string_view body) {
        std::string out = "HTTP/1.1 " + std::string(status) + "\r\nContent-Type: " + std::string(type) +
                          "\r\nContent-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
        out += body;
        send_all(c->fd, out);
    };
    if (target == "/debug") {
        std::string key = header_value(head, "Sec-WebSocket-Key");
        if (key.empty() || lower(header_value(head, "Upgrade")) != "websocket") {
            respond("400 Bad Request", "text/plain", "expected a WebSocket upgrade\n");
            return;
        }
        std::string out = "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                          "Sec-WebSocket-Accept: " + websocket_accept(key) + "\r\n\r\n";
        if (!send_all(c->fd, out)) return;
        c->websocket = true;
        serve_websocket(c, std::move(rest));
        return;
    }
    if (!options_.dev || options_.static_root.empty() || target.find("..") != std::string::npos) {
        respond("404 Not Found", "text/plain", "not found\n");
        return;
    }
    std::filesystem::path file = options_.static_root / (target == "/" ? "index.html" : target.substr(1));
    std::error_code ec;
    if (!std::filesystem::is_regular_file(file, ec)) {
        respond("404 Not Found", "text/plain", "not found\n");
        return;
    }
    respond("200 OK", content_type(file), read_text_file(file));
}

void Server::serve_ndjson(const std::shared_ptr<Connection>& c, std::string buf) {
    for (;;) {
        std::size_t nl;
        while ((nl = buf.find('\n')) != std::string::npos) {
            std::string line = buf.substr(0, nl);
            buf.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            handle_line(c, line);
        }
        if (buf.size() > kMaxLine) {
            c->send(error_reply(nullptr, "parse", "line too long"));
            return;
        }
        if (!read_some(c->fd, buf)) return;
    }
}

void Server::serve_websocket(const std::shared_ptr<Connection>& c, std::string buf) {
    std::string message;
    for (;;) {
        while (buf.size() >= 2) {
            auto b0 = static_cast<unsigned char>(buf[0]);
            auto b1 = static_cast<unsigned char>(buf[1]);
            std::size_t len = b1 & 0x7F;
            std::size_t pos = 2;
            if (len == 126) {
                if (buf.size() < 4) break;
                len = (static_cast<unsigned char>(buf[2]) << 8) | static_cast<unsigned char>(buf[3]);
                pos = 4;
            } else if (len == 127) {
                if (buf.size() < 10) break;
                len = 0;
                for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(buf[2 + i]);
                pos = 10;
            }
            bool masked = b1 & 0x80;
            if (len > kMaxLine) return;
            if (buf.size() < pos + (masked ? 4 : 0) + len) break;
            std::string payload = buf.substr(pos + (masked ? 4 : 0), len);
            if (masked) {
                for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<char>(payload[i] ^ buf[pos + i % 4]);
            }
            buf.erase(0, pos + (masked ? 4 : 0) + len);
            unsigned char opcode = b0 & 0x0F;
            if (opcode == 0x8) {
                std::lock_guard lock(c->write_mu);
                send_all(c->fd, ws_frame("", 0x8));
                return;
            }
            if (opcode == 0x9) {
                std::lock_guard lock(c->write_mu);
                send_all(c->fd, ws_frame(payload, 0xA));
                continue;
            }
            if (opcode == 0x1 || opcode == 0x0) {
                message += payload;
                if (b0 & 0x80) {
                    handle_line(c, message);
                    message.clear();
                }
            }
        }
        if (!read_some(c->fd, buf)) return;
    }
}

void Server::handle_line(const std::shared_ptr<Connection>& c, std::string_view line) {
    Value msg;
    try {
        msg = parse_json(line);
    } catch (const Error&) {
        c->send(error_reply(nullptr, "parse"));
        return;
    }
    const Value* req = msg.find("req");
    Value re = req ? *req : Value();
    const Value* cmd = msg.find("cmd");
    if (!msg.is_object() || !cmd || !cmd->is_string()) {
        c->send(error_reply(re, "bad_request", "expected {cmd, session, args, req}"));
        return;
    }
    if (!known_command(cmd->as_string())) {
        c->send(error_reply(re, "unknown_command", "unknown command '" + cmd->as_string() + "'"));
        return;
    }
    if (!options_.dev && !run_mode_allows(cmd->as_string())) {
        c->send(error_reply(re, "forbidden", cmd->as_string() + " needs a --dev service"));
        return;
    }
    Value reply;
    try {
        Value result = dispatch(*c, cmd->as_string(), msg);
        reply = Value::Object{{"re", re}, {"ok", true}, {"result", std::move(result)}};
    } catch (const Error& e) {
        reply = error_reply(re, e.code(), e.what());
    } catch (const std::exception& e) {
        reply = error_reply(re, "InternalError", e.what());
    }
    c->send(reply);
}

std::shared_ptr<runtime::SessionManager::Entry> Server::entry_for(const std::string& id) {
    if (id.empty()) throw Error("UnknownSession", "command needs a session");
    auto entry = sessions_.get(id);
    std::lock_guard elock(entry->mu);
    std::lock_guard lock(mu_);
    auto& st = state_[id];
    if (!st.hooked) {
        st.hooked = true;
        entry->session->set_listener([this, id](const runtime::TraceEvent& e) {
            switch (e.kind) {
                case runtime::TraceKind::NodeEnter: broadcast(id, "node_entered", event_data(e)); break;
                case runtime::TraceKind::NodeExit: broadcast(id, "node_exited", event_data(e)); break;
                case runtime::TraceKind::Display: broadcast(id, "display", event_data(e)); break;
                default: break;
            }
        });
    }
    return entry;
}

void Server::broadcast(const std::string& session, const std::string& event, Value data) {
    std::vector<std::shared_ptr<Connection>> targets;
    {
        std::lock_guard lock(mu_);
        auto it = state_.find(session);
        for (const auto& c : clients_) {
            if (global_watchers_.count(c.get()) || (it != state_.end() && it->second.watchers.count(c.get()))) {
                targets.push_back(c);
            }
        }
    }
    Value ev = Value::Object{{"event", event}, {"session", session}, {"data", std::move(data)}};
    for (const auto& c : targets) c->send(ev);
}

Value Server::report(runtime::Session& s, const runtime::StepOutcome& o) {
    using runtime::OutcomeKind;
    const std::string& id = s.id();
    switch (o.kind) {
        case OutcomeKind::Advanced:
            s.pause_here();
            if (s.status().kind == runtime::StatusKind::PausedBreakpoint) {
                broadcast(id, "paused", Value::Object{{"node", s.current_node()}, {"frame_depth", s.depth()},
                                                      {"reason", "step"}});
            }
            break;
        case OutcomeKind::Paused:
            broadcast(id, "paused", Value::Object{{"node", o.node}, {"frame_depth", s.depth()}, {"reason", "breakpoint"}});
            break;
        case OutcomeKind::NeedsInput:
            broadcast(id, "awaiting_input",
                      Value::Object{{"node", o.node}, {"frame_depth", s.depth()}, {"prompt", o.value}});
            break;
        case OutcomeKind::Done: broadcast(id, "finished", Value::Object{{"result", o.value}}); break;
        case OutcomeKind::Error: broadcast(id, "failed", Value::Object{{"error", o.error.to_value()}}); break;
    }
    return Value::Object{{"status", s.status().to_value()}, {"frame_depth", s.depth()}};
}

Value Server::drive(runtime::Session& s, const std::string& how) {
    using runtime::OutcomeKind;
    runtime::StepOutcome o;
    int d = s.depth();
    bool not_applicable = false;
    if (how == "step_into" && !s.next_opens_frame()) not_applicable = true;
    std::string mode = not_applicable ? "step_over" : how;
    if (mode == "step_out" && d <= 1) mode = "continue";
    {
        std::lock_guard lock(mu_);
        state_[s.id()].resume_after_input = mode == "continue";
    }
    o = s.step();
    if (mode == "continue") {
        while (o.kind == OutcomeKind::Advanced) o = s.step();
    } else if (mode == "step_over") {
        while (o.kind == OutcomeKind::Advanced && s.depth() > d) o = s.step();
    } else if (mode == "step_out") {
        while (o.kind == OutcomeKind::Advanced && s.depth() >= d) o = s.step();
    }
    Value r = report(s, o);
    if (not_applicable) r.as_object()["flag"] = "StepIntoNotApplicable";
    return r;
}

Value Server::dispatch(Connection& c, const std::string& cmd, const Value& msg) {
    const Value* sv = msg.find("session");
    std::string session = sv && sv->is_string() ? sv->as_string() : "";

    if (cmd == "attach") {
        Value::Object result;
        if (!session.empty()) {
            auto entry = entry_for(session);
            std::lock_guard lock(entry->mu);
            result.emplace("graph", graph_to_value(entry->session->graph()));
            result.emplace("status", entry->session->status().to_value());
            std::lock_guard slock(mu_);
            state_[session].watchers.insert(&c);
        } else {
            const auto* lib = sessions_.services().library;
            if (auto g = lib ? lib->find(options_.default_graph) : nullptr) result.emplace("graph", graph_to_value(*g));
            std::lock_guard lock(mu_);
            global_watchers_.insert(&c);
        }
        Value::Array list;
        for (const auto& id : sessions_.ids()) {
            auto e = sessions_.get(id);
            std::lock_guard lock(e->mu);
            list.push_back(Value::Object{{"id", id},
                                         {"graph", e->session->graph().name},
                                         {"status", std::string(runtime::to_string(e->session->status().kind))}});
        }
        result.emplace("sessions", std::move(list));
        result.emplace("mode", options_.dev ? "dev" : "run");
        result.emplace("protocol", std::string(kProtocol));
        return result;
    }
    if (cmd == "detach") {
        std::lock_guard lock(mu_);
        if (session.empty()) {
            global_watchers_.erase(&c);
            for (auto& [_, st] : state_) st.watchers.erase(&c);
        } else if (auto it = state_.find(session); it != state_.end()) {
            it->second.watchers.erase(&c);
        }
        return Value::Object{};
    }
    if (cmd == "start") {
        std::string name = arg_string(msg, "graph");
        if (name.empty()) name = options_.default_graph;
        const auto* lib = sessions_.services().library;
        auto graph = lib ? lib->find(name) : nullptr;
        if (!graph) throw Error("UnknownGraph", "no graph named '" + name + "'");
        runtime::SessionOptions so;
        so.mode = options_.mode;
        so.mimic_profile = options_.mimic_profile;
        so.honor_breakpoints = options_.dev;
        if (options_.dev) {
            const Value& bps = arg(msg, "breakpoints");
            if (bps.is_array()) {
                for (const auto& b : bps.as_array()) {
                    if (b.is_string()) so.breakpoints.insert(b.as_string());
                }
            }
            std::string mode = arg_string(msg, "mode");
            if (!mode.empty()) so.mode = llm::parse_mode(mode);
        }
        auto created = sessions_.create(graph, arg(msg, "input"), std::move(so));
        std::string id = created->session->id();
        auto entry = entry_for(id);
        {
            std::lock_guard lock(mu_);
            state_[id].watchers.insert(&c);
        }
        std::lock_guard lock(entry->mu);
        if (!options_.dev) {
            Value r = drive(*entry->session, "continue");
            r.as_object()["session"] = id;
            return r;
        }
        return Value::Object{{"session", id}, {"status", entry->session->status().to_value()}, {"frame_depth", 1}};
    }

    auto entry = entry_for(session);
    std::lock_guard lock(entry->mu);
    runtime::Session& s = *entry->session;

    if (cmd == "continue" || cmd == "step_over" || cmd == "step_into" || cmd == "step_out") return drive(s, cmd);
    if (cmd == "set_breakpoint" || cmd == "clear_breakpoint") {
        std::string node = arg_string(msg, "node");
        if (cmd == "set_breakpoint") {
            s.set_breakpoint(node);
        } else {
            s.clear_breakpoint(node);
        }
        Value::Array bps;
        for (const auto& b : s.breakpoints()) bps.emplace_back(b);
        return Value::Object{{"breakpoints", std::move(bps)}};
    }
    if (cmd == "inspect") return s.inspect();
    if (cmd == "provide_input") {
        runtime::StepOutcome o = s.provide_input(arg(msg, "value"));
        bool resume;
        {
            std::lock_guard slock(mu_);
            resume = !options_.dev || state_[session].resume_after_input;
        }
        if (resume && o.kind == runtime::OutcomeKind::Advanced) return drive(s, "continue");
        return report(s, o);
    }
    if (cmd == "set_mimic_rule") {
        const Value* args = msg.find("args");
        s.add_mimic_rule(llm::rule_from_value(args ? *args : Value()));
        return Value::Object{};
    }
    if (cmd == "clear_mimic_rules") {
        s.clear_mimic_rules();
        return Value::Object{};
    }
    if (cmd == "get_trace") {
        Value doc = s.export_trace();
        std::string path = arg_string(msg, "path");
        if (!path.empty()) {
            if (!options_.dev) throw Error("forbidden", "writing trace files needs a --dev service");
            write_text_file(path, runtime::trace_to_text(doc));
        }
        return doc;
    }
    throw Error("unknown_command", "unknown command '" + cmd + "'");  // unreachable after known_command
}

Client::Client(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
        throw Error("ConnectError", "cannot resolve " + host);
    }
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw Error("ConnectError", "cannot connect to " + host + ":" + std::to_string(port));
}

Client::~Client() {
    if (fd_ >= 0) ::close(fd_);
}

void Client::send_raw(std::string_view line) {
    std::string out(line);
    if (out.empty() || out.back() != '\n') out.push_back('\n');
    if (!send_all(fd_, out)) throw Error("ConnectError", "connection closed");
}

Value Client::read_message(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return parse_json(line);
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw Error("Timeout", "no message within the timeout");
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
        if (!read_some(fd_, buffer_)) throw Error("ConnectError", "connection closed");
    }
}

Value Client::request(const std::string& cmd, const std::string& session, Value args,
                      std::chrono::milliseconds timeout) {
    long long req = next_req_++;
    Value::Object msg{{"cmd", cmd}, {"req", req}, {"args", std::move(args)}};
    if (!session.empty()) msg.emplace("session", session);
    send_raw(to_json(msg));
    for (;;) {
        Value m = read_message(timeout);
        const Value* re = m.find("re");
        if (re && re->is_number() && re->as_number() == static_cast<double>(req)) return m;
        if (m.find("event")) events_.push_back(std::move(m));
    }
}

Value Client::wait_event(const std::string& name, std::chrono::milliseconds timeout) {
    for (auto it = events_.begin(); it != events_.end(); ++it) {
        if (*it->find("event") == Value(name)) {
            Value v = std::move(*it);
            events_.erase(it);
            return v;
        }
    }
    for (;;) {
        Value m = read_message(timeout);
        if (!m.find("event")) continue;
        if (*m.find("event") == Value(name)) return m;
        events_.push_back(std::move(m));
    }
}

}  // namespace aad::debug
