#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragvv/error.hpp"

namespace ragvv {

using Vector = std::vector<double>;

inline constexpr std::size_t kDefaultDimension = 384;

class NotNormalizable : public Error {
public:
    NotNormalizable() : Error(ErrorCategory::Data, "cannot normalize a zero vector") {}
};

double norm(std::span<const double> v) noexcept;

/// Scales `v` to unit length in place. Leaves a zero vector untouched and returns false.
bool normalize_in_place(Vector& v) noexcept;

/// v / ||v||. Throws NotNormalizable for the zero vector.
Vector normalize(Vector v);

/// Signed feature hashing of lowercase word unigrams and bigrams into `dim`
/// buckets, normalized. Text without word characters falls back to hashing its
/// non-space characters. Requires dim >= 8.
Vector hashed_embed(std::string_view text, std::size_t dim);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    [[nodiscard]] virtual std::size_t dimension() const = 0;
    /// Stable identity recorded in index snapshots, e.g. "hashed:384".
    [[nodiscard]] virtual std::string id() const = 0;
    /// One raw (not necessarily normalized) vector per input text.
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) = 0;
};

class HashedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashedEmbeddingProvider(std::size_t dim = kDefaultDimension);

    [[nodiscard]] std::size_t dimension() const override { return dim_; }
    [[nodiscard]] std::string id() const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

struct RemoteEmbeddingConfig {
    std::string url;                 // full endpoint, e.g. http://localhost:8080/embed
    std::string token_env;           // env var holding a bearer token; empty for none
    std::string model_name = "all-MiniLM-L6-v2";
    std::size_t dimension = kDefaultDimension;
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds timeout{30000};
};

/// Client for the minimal JSON contract {"texts": [...]} -> {"vectors": [[...]]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    [[nodiscard]] std::size_t dimension() const override { return config_.dimension; }
    [[nodiscard]] std::string id() const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;

private:
    std::vector<Vector> request(std::span<const std::string> texts) const;

    RemoteEmbeddingConfig config_;
    std::string token_;
};

/// Read-through content-hash cache in front of another provider; persistable.
class CachedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner);

    [[nodiscard]] std::size_t dimension() const override { return inner_->dimension(); }
    [[nodiscard]] std::string id() const override { return inner_->id(); }
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;

    /// Entries written by a provider with a different id are ignored.
    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t hits() const;
    [[nodiscard]] std::size_t misses() const;

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Vector> cache_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

/// Embeds one text and normalizes it. Empty or whitespace-only text is a
/// precondition error; a vector of the wrong width is a hard error.
Vector embed(std::string_view text, EmbeddingProvider& provider);
std::vector<Vector> embed_all(std::span<const std::string> texts, EmbeddingProvider& provider);

}  // namespace ragvv
