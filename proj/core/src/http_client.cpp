#include "http_client.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "ragvv/error.hpp"

namespace ragvv::detail {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw DataError(fmt::format("invalid endpoint URL '{}'", url));
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse post_json(const std::string& url, const std::string& body, const HeaderList& headers,
                       std::chrono::milliseconds timeout) {
    const auto parts = split_url(url);
    httplib::Client client(parts.origin);
    if (!client.is_valid()) throw DataError(fmt::format("unsupported endpoint '{}'", url));
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
    client.set_connection_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_read_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_write_timeout(seconds.count(), static_cast<time_t>(micros.count()));

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(parts.path, h, body, "application/json");
    if (!result) {
        throw TransientError(fmt::format("POST {} failed: {}", url, httplib::to_string(result.error())));
    }
    return {result->status, result->body};
}

std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* value = std::getenv(name.c_str());
    return value ? std::string(value) : std::string{};
}

}  // namespace ragvv::detail
