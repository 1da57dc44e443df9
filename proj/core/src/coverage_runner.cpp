#include "ragvv/coverage_runner.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ragvv/error.hpp"

extern char** environ;

namespace ragvv::runner {

using nlohmann::json;

namespace {

struct Child {
    int pid = -1;
    int fd = -1;  // parent end of the socket pair
};

// Spawns argv with stdin/stdout bound to one end of a socket pair. With
// `merge_stderr` the child's stderr goes to the same socket.
Child spawn(const std::vector<std::string>& argv, bool merge_stderr) {
    if (argv.empty()) throw RunnerError("empty runner command");
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
        throw RunnerError(fmt::format("socketpair failed: {}", std::strerror(errno)));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
    if (merge_stderr) posix_spawn_file_actions_adddup2(&actions, sv[1], STDERR_FILENO);

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(sv[1]);
    if (rc != 0) {
        ::close(sv[0]);
        throw RunnerError(fmt::format("cannot start coverage runner '{}': {}", argv[0], std::strerror(rc)));
    }
    return {pid, sv[0]};
}

void reap(int pid) noexcept {
    if (pid <= 0) return;
    ::kill(pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
}

}  // namespace

SubprocessRunner::SubprocessRunner(std::vector<std::string> argv, std::chrono::milliseconds slack,
                                   std::chrono::milliseconds handshake_timeout)
    : argv_(std::move(argv)), slack_(slack), handshake_timeout_(handshake_timeout) {
    if (argv_.empty()) throw RunnerError("empty runner command");
}

SubprocessRunner::~SubprocessRunner() { stop(); }

void SubprocessRunner::stop() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    reap(pid_);
    pid_ = -1;
    decoder_ = FrameDecoder{};
}

void SubprocessRunner::start() {
    const auto child = spawn(argv_, false);
    pid_ = child.pid;
    fd_ = child.fd;
    try {
        write_all(encode_frame(handshake_frame()));
        const auto reply = read_frame(handshake_timeout_);
        hello_ = json::parse(reply);
    } catch (const json::exception& e) {
        stop();
        throw RunnerError(fmt::format("malformed handshake reply: {}", e.what()));
    } catch (...) {
        stop();
        throw;
    }
    if (!hello_.is_object() || hello_.value("proto", -1) != kProtocolVersion) {
        const auto got = hello_.dump();
        stop();
        throw RunnerError(fmt::format("runner speaks an incompatible protocol: {}", got));
    }
    version_ = hello_.value("runner_version", std::string{});
}

const json& SubprocessRunner::handshake() {
    if (!running()) start();
    return hello_;
}

void SubprocessRunner::write_all(std::string_view bytes) {
    while (!bytes.empty()) {
        const auto n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw RunnerError(fmt::format("write to coverage runner failed: {}", std::strerror(errno)));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string SubprocessRunner::read_frame(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    char buf[65536];
    for (;;) {
        if (auto frame = decoder_.next()) return std::move(*frame);
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw RunnerError("coverage runner did not answer in time");
        pollfd pfd{fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw RunnerError(fmt::format("poll failed: {}", std::strerror(errno)));
        }
        if (rc == 0) continue;
        const auto n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw RunnerError(fmt::format("read from coverage runner failed: {}", std::strerror(errno)));
        }
        if (n == 0) throw RunnerError("coverage runner exited unexpectedly");
        decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
}

std::string SubprocessRunner::round_trip(std::string_view payload, std::chrono::milliseconds timeout) {
    if (!running()) start();
    try {
        write_all(encode_frame(payload));
        return read_frame(timeout);
    } catch (const RunnerError&) {
        stop();
        throw;
    }
}

CoverageResponse SubprocessRunner::evaluate(const CoverageRequest& request) {
    const auto budget = std::chrono::milliseconds(
        static_cast<long long>(std::ceil(request.timeout_s * 1000.0 * static_cast<double>(std::max<std::size_t>(1, request.tests.size())))));
    const auto reply = round_trip(to_json(request).dump(), budget + slack_);
    json parsed;
    try {
        parsed = json::parse(reply);
    } catch (const json::exception& e) {
        stop();
        throw RunnerError(fmt::format("malformed runner frame: {}", e.what()));
    }
    return response_from_json(parsed, request);
}

SelfTestResult run_self_test(const std::vector<std::string>& argv, std::chrono::milliseconds timeout) {
    auto args = argv;
    args.emplace_back("--self-test");
    auto child = spawn(args, true);
    ::shutdown(child.fd, SHUT_WR);
    SelfTestResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    char buf[4096];
    bool timed_out = false;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{child.fd, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) continue;
        const auto n = ::recv(child.fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        result.output.append(buf, static_cast<std::size_t>(n));
    }
    ::close(child.fd);
    if (timed_out) {
        reap(child.pid);
        throw RunnerError("coverage runner self-test timed out");
    }
    int status = 0;
    while (::waitpid(child.pid, &status, 0) < 0 && errno == EINTR) {
    }
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    return result;
}

std::vector<std::string> split_command(std::string_view command) {
    std::vector<std::string> out;
    std::string current;
    bool have = false;
    char quote = 0;
    for (const char c : command) {
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else {
                current.push_back(c);
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
            have = true;
        } else if (c == ' ' || c == '\t') {
            if (have) out.push_back(std::move(current));
            current.clear();
            have = false;
        } else {
            current.push_back(c);
            have = true;
        }
    }
    if (have) out.push_back(std::move(current));
    return out;
}

}  // namespace ragvv::runner
