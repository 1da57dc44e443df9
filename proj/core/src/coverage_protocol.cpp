#include "ragvv/coverage_protocol.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "ragvv/error.hpp"

namespace ragvv::runner {

using nlohmann::json;

std::string encode_frame(std::string_view payload) {
    if (payload.size() > kMaxFrameBytes) throw RunnerError("frame payload exceeds the size limit");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out.append(payload);
    return out;
}

std::string encode_frame(const json& payload) { return encode_frame(payload.dump()); }

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
    const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (n > kMaxFrameBytes) throw RunnerError(fmt::format("frame length {} exceeds the size limit", n));
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string payload = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    return payload;
}

json to_json(const CoverageRequest& request) {
    json tests = json::array();
    for (const auto& t : request.tests) tests.push_back({{"index", t.index}, {"code", t.code}});
    return json{{"task_id", request.task_id},
                {"program_source", request.program_source},
                {"tests", std::move(tests)},
                {"timeout_s", request.timeout_s}};
}

CoverageRequest request_from_json(const json& j) {
    CoverageRequest r;
    r.task_id = j.at("task_id").get<std::string>();
    r.program_source = j.at("program_source").get<std::string>();
    for (const auto& t : j.at("tests")) r.tests.push_back({t.at("index").get<int>(), t.at("code").get<std::string>()});
    r.timeout_s = j.value("timeout_s", 10.0);
    return r;
}

json to_json(const CoverageResponse& response) {
    json per_test = json::array();
    for (const auto& t : response.per_test) {
        per_test.push_back({{"index", t.index},
                            {"syntax_ok", t.syntax_ok},
                            {"exec_ok", t.exec_ok},
                            {"covered_lines", t.covered_lines},
                            {"covered_branches", t.covered_branches}});
    }
    json j{{"task_id", response.task_id},
           {"total_lines", response.total_lines},
           {"total_branches", response.total_branches},
           {"per_test", std::move(per_test)},
           {"runner_version", response.runner_version}};
    if (!response.diagnostic.empty()) j["diagnostic"] = response.diagnostic;
    return j;
}

namespace {

void check_ids(const std::vector<int>& ids, int total, std::string_view what, int index) {
    if (!std::is_sorted(ids.begin(), ids.end()) || std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw RunnerError(fmt::format("test {}: {} ids are not sorted and unique", index, what));
    }
    if (!ids.empty() && (ids.front() < 1 || ids.back() > total)) {
        throw RunnerError(fmt::format("test {}: {} id outside 1..{}", index, what, total));
    }
}

}  // namespace

CoverageResponse response_from_json(const json& j, const CoverageRequest& request) {
    if (!j.is_object()) throw RunnerError("runner reply is not an object");
    if (const auto err = j.find("error"); err != j.end()) {
        throw RunnerError(fmt::format("runner error: {}", err->is_string() ? err->get<std::string>() : err->dump()));
    }
    CoverageResponse r;
    try {
        r.task_id = j.at("task_id").get<std::string>();
        r.total_lines = j.at("total_lines").get<int>();
        r.total_branches = j.at("total_branches").get<int>();
        r.runner_version = j.value("runner_version", std::string{});
        r.diagnostic = j.value("diagnostic", std::string{});
        for (const auto& t : j.at("per_test")) {
            TestOutcome o;
            o.index = t.at("index").get<int>();
            o.syntax_ok = t.at("syntax_ok").get<bool>();
            o.exec_ok = t.at("exec_ok").get<bool>();
            o.covered_lines = t.value("covered_lines", std::vector<int>{});
            o.covered_branches = t.value("covered_branches", std::vector<int>{});
            r.per_test.push_back(std::move(o));
        }
    } catch (const json::exception& e) {
        throw RunnerError(fmt::format("malformed runner reply: {}", e.what()));
    }
    if (r.task_id != request.task_id) {
        throw RunnerError(fmt::format("runner answered task '{}' for request '{}'", r.task_id, request.task_id));
    }
    if (r.total_lines < 0 || r.total_branches < 0) throw RunnerError("runner reported negative totals");
    if (r.per_test.size() != request.tests.size()) {
        throw RunnerError(fmt::format("runner returned {} results for {} tests", r.per_test.size(), request.tests.size()));
    }
    for (std::size_t i = 0; i < r.per_test.size(); ++i) {
        auto& o = r.per_test[i];
        if (o.index != request.tests[i].index) {
            throw RunnerError(fmt::format("runner result {} has index {}, expected {}", i, o.index, request.tests[i].index));
        }
        check_ids(o.covered_lines, r.total_lines, "line", o.index);
        check_ids(o.covered_branches, r.total_branches, "branch", o.index);
        if (!o.syntax_ok) {
            o.exec_ok = false;
            o.covered_lines.clear();
            o.covered_branches.clear();
        }
    }
    return r;
}

json handshake_frame() { return json{{"proto", kProtocolVersion}}; }

}  // namespace ragvv::runner
