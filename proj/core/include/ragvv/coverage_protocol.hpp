#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragvv::runner {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64U << 20;

/// 4-byte big-endian payload length followed by the payload bytes.
std::string encode_frame(std::string_view payload);
inline std::string encode_frame(const std::string& payload) { return encode_frame(std::string_view(payload)); }
inline std::string encode_frame(const char* payload) { return encode_frame(std::string_view(payload)); }
std::string encode_frame(const nlohmann::json& payload);

/// Incremental frame splitter for a byte stream.
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    /// Next complete payload, if buffered. Throws RunnerError on an oversized length prefix.
    std::optional<std::string> next();
    [[nodiscard]] std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    std::string buffer_;
};

struct TestSource {
    int index = 0;
    std::string code;
};

struct CoverageRequest {
    std::string task_id;
    std::string program_source;
    std::vector<TestSource> tests;
    double timeout_s = 10.0;
};

struct TestOutcome {
    int index = 0;
    bool syntax_ok = false;
    bool exec_ok = false;
    std::vector<int> covered_lines;     // sorted, 1-based
    std::vector<int> covered_branches;  // sorted, 1-based
};

struct CoverageResponse {
    std::string task_id;
    int total_lines = 0;
    int total_branches = 0;
    std::vector<TestOutcome> per_test;
    std::string runner_version;
    std::string diagnostic;
};

nlohmann::json to_json(const CoverageRequest& request);
CoverageRequest request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoverageResponse& response);

/// Parses a response frame and checks it against the request it answers:
/// matching task id, per-test order, sorted in-range coverage ids, and empty
/// coverage for tests that failed the syntax check. Error frames and
/// violations throw RunnerError.
CoverageResponse response_from_json(const nlohmann::json& j, const CoverageRequest& request);

nlohmann::json handshake_frame();

}  // namespace ragvv::runner
