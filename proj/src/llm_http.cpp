#include <httplib.h>

#include "aad/llm.hpp"

namespace aad::llm {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("ProviderError", "base URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpReply HttplibTransport::post(const std::string& url,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 const std::string& body, int timeout_ms) {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    auto secs = timeout_ms / 1000;
    auto usecs = (timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers hs;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
        if (k == "Content-Type") {
            content_type = v;
        } else {
            hs.emplace(k, v);
        }
    }
    auto res = client.Post(path, hs, body, content_type);
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
            throw Error("Timeout", "request to " + url + " timed out");
        }
        throw Error("ProviderError", "status 0: " + httplib::to_string(res.error()));
    }
    return HttpReply{res->status, res->body};
}

}  // namespace aad::llm
