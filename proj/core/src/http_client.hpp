#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace ragvv::detail {

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// POSTs a JSON body. Transport failures (connect, read timeout) throw TransientError;
/// any HTTP status is returned to the caller.
HttpResponse post_json(const std::string& url, const std::string& body, const HeaderList& headers,
                       std::chrono::milliseconds timeout);

std::string env_or_empty(const std::string& name);

}  // namespace ragvv::detail
