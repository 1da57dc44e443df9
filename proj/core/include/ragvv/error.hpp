#pragma once

#include <stdexcept>
#include <string>

namespace ragvv {

/// Broad failure categories. The CLI maps each one onto a distinct exit code.
enum class ErrorCategory {
    Internal,
    Usage,
    Data,
    Auth,
    ProviderExhausted,
    Provider,
    Runner,
    Compare,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Malformed or inconsistent input files, missing paths, bad configuration values.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

/// Provider transport failures that are worth retrying (timeouts, 429, 5xx).
class TransientError : public Error {
public:
    explicit TransientError(const std::string& what) : Error(ErrorCategory::Provider, what) {}
};

class AuthError : public Error {
public:
    explicit AuthError(const std::string& what) : Error(ErrorCategory::Auth, what) {}
};

/// Non-retryable provider failures: bad request, malformed reply, strict-mode lookup miss.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what) : Error(ErrorCategory::Provider, what) {}
};

class RetryExhaustedError : public Error {
public:
    RetryExhaustedError(const std::string& what, int attempts)
        : Error(ErrorCategory::ProviderExhausted, what), attempts_(attempts) {}

    [[nodiscard]] int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class RunnerError : public Error {
public:
    explicit RunnerError(const std::string& what) : Error(ErrorCategory::Runner, what) {}
};

class CompareError : public Error {
public:
    explicit CompareError(const std::string& what) : Error(ErrorCategory::Compare, what) {}
};

}  // namespace ragvv
