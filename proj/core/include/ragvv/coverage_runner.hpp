#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "ragvv/coverage_protocol.hpp"

namespace ragvv::runner {

/// Anything that turns a CoverageRequest into a CoverageResponse.
class CoverageEvaluator {
public:
    virtual ~CoverageEvaluator() = default;
    virtual CoverageResponse evaluate(const CoverageRequest& request) = 0;
};

/// Child process speaking the framed protocol on its stdin/stdout. The child
/// is started and handshaken lazily; after a crash, timeout or protocol fault
/// it is killed and restarted on the next request.
class SubprocessRunner final : public CoverageEvaluator {
public:
    /// `slack` is added to the sum of per-test timeouts when waiting for a response.
    explicit SubprocessRunner(std::vector<std::string> argv,
                              std::chrono::milliseconds slack = std::chrono::milliseconds(5000),
                              std::chrono::milliseconds handshake_timeout = std::chrono::milliseconds(10000));
    ~SubprocessRunner() override;

    SubprocessRunner(const SubprocessRunner&) = delete;
    SubprocessRunner& operator=(const SubprocessRunner&) = delete;

    CoverageResponse evaluate(const CoverageRequest& request) override;

    /// Starts the child if needed and returns the handshake reply.
    const nlohmann::json& handshake();

    /// Sends one raw payload and returns the next raw reply payload.
    std::string round_trip(std::string_view payload, std::chrono::milliseconds timeout);

    [[nodiscard]] bool running() const noexcept { return pid_ > 0; }
    [[nodiscard]] const std::string& runner_version() const noexcept { return version_; }

    void stop() noexcept;

private:
    void start();
    void write_all(std::string_view bytes);
    std::string read_frame(std::chrono::milliseconds timeout);

    std::vector<std::string> argv_;
    std::chrono::milliseconds slack_;
    std::chrono::milliseconds handshake_timeout_;
    int pid_ = -1;
    int fd_ = -1;
    FrameDecoder decoder_;
    nlohmann::json hello_;
    std::string version_;
};

struct SelfTestResult {
    int exit_code = 0;
    std::string output;
};

/// Runs `argv --self-test` and captures its stdout and stderr.
SelfTestResult run_self_test(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);

/// Splits a shell-like command string on whitespace, honoring simple quotes.
std::vector<std::string> split_command(std::string_view command);

}  // namespace ragvv::runner
