#include "ragvv/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <semaphore>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "ragvv/corpus.hpp"
#include "ragvv/hashing.hpp"

namespace ragvv {

using nlohmann::json;

double norm(std::span<const double> v) noexcept {
    double sum = 0.0;
    for (const double x : v) sum += x * x;
    return std::sqrt(sum);
}

bool normalize_in_place(Vector& v) noexcept {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n)) return false;
    for (double& x : v) x /= n;
    return true;
}

Vector normalize(Vector v) {
    if (!normalize_in_place(v)) throw NotNormalizable();
    return v;
}

namespace {

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '_' || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    if (words.empty()) {
        for (const char ch : text) {
            if (!std::isspace(static_cast<unsigned char>(ch))) words.emplace_back(1, ch);
        }
    }
    return words;
}

void add_feature(Vector& v, std::string_view feature) {
    const std::uint64_t h = mix64(fnv1a64(feature));
    const auto bucket = static_cast<std::size_t>(h % v.size());
    v[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
}

}  // namespace

Vector hashed_embed(std::string_view text, std::size_t dim) {
    if (dim < 8) throw DataError(fmt::format("embedding dimension {} is below the minimum of 8", dim));
    Vector v(dim, 0.0);
    const auto words = word_tokens(text);
    std::string feature;
    for (std::size_t i = 0; i < words.size(); ++i) {
        feature = "u:" + words[i];
        add_feature(v, feature);
        if (i + 1 < words.size()) {
            feature = "b:" + words[i] + ' ' + words[i + 1];
            add_feature(v, feature);
        }
    }
    normalize_in_place(v);
    return v;
}

HashedEmbeddingProvider::HashedEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim_ < 8) throw DataError(fmt::format("embedding dimension {} is below the minimum of 8", dim_));
}

std::string HashedEmbeddingProvider::id() const { return fmt::format("hashed:{}", dim_); }

std::vector<Vector> HashedEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hashed_embed(t, dim_));
    return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {
    if (config_.url.empty()) throw DataError("remote embedder requires an endpoint URL");
    if (config_.dimension < 8) throw DataError("embedding dimension must be at least 8");
    if (config_.batch_size == 0) config_.batch_size = 1;
    if (config_.max_in_flight == 0) config_.max_in_flight = 1;
    token_ = detail::env_or_empty(config_.token_env);
}

std::string RemoteEmbeddingProvider::id() const {
    return fmt::format("remote:{}:{}", config_.model_name, config_.dimension);
}

std::vector<Vector> RemoteEmbeddingProvider::request(std::span<const std::string> texts) const {
    json body{{"texts", json::array()}};
    for (const auto& t : texts) body["texts"].push_back(t);
    if (!config_.model_name.empty()) body["model"] = config_.model_name;
    detail::HeaderList headers;
    if (!token_.empty()) headers.emplace_back("Authorization", "Bearer " + token_);

    const auto response = detail::post_json(config_.url, body.dump(), headers, config_.timeout);
    if (response.status == 401 || response.status == 403) {
        throw AuthError(fmt::format("embedding service rejected credentials (HTTP {})", response.status));
    }
    if (response.status == 429 || response.status >= 500) {
        throw TransientError(fmt::format("embedding service returned HTTP {}", response.status));
    }
    if (response.status != 200) {
        throw ProviderError(fmt::format("embedding service returned HTTP {}: {}", response.status, response.body));
    }
    std::vector<Vector> vectors;
    try {
        const auto reply = json::parse(response.body);
        vectors = reply.at("vectors").get<std::vector<Vector>>();
    } catch (const json::exception& e) {
        throw ProviderError(fmt::format("malformed embedding reply: {}", e.what()));
    }
    if (vectors.size() != texts.size()) {
        throw ProviderError(
            fmt::format("embedding reply has {} vectors for {} texts", vectors.size(), texts.size()));
    }
    for (const auto& v : vectors) {
        if (v.size() != config_.dimension) {
            throw DataError(fmt::format("embedding dimension mismatch: got {}, index expects {}", v.size(),
                                        config_.dimension));
        }
    }
    return vectors;
}

std::vector<Vector> RemoteEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    std::counting_semaphore<> in_flight(static_cast<std::ptrdiff_t>(config_.max_in_flight));
    std::vector<std::future<std::vector<Vector>>> pending;
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
        const auto chunk = texts.subspan(start, std::min(config_.batch_size, texts.size() - start));
        in_flight.acquire();
        pending.push_back(std::async(std::launch::async, [this, chunk, &in_flight] {
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight};
            return request(chunk);
        }));
    }
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (auto& f : pending) {
        for (auto& v : f.get()) out.push_back(std::move(v));
    }
    return out;
}

CachedEmbeddingProvider::CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner)
    : inner_(std::move(inner)) {}

std::vector<Vector> CachedEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> missing_texts;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (const auto it = cache_.find(content_hash(texts[i])); it != cache_.end()) {
                out[i] = it->second;
                ++hits_;
            } else {
                missing.push_back(i);
                missing_texts.push_back(texts[i]);
            }
        }
    }
    if (missing.empty()) return out;
    auto fresh = inner_->embed_batch(missing_texts);
    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < missing.size(); ++j) {
        cache_.insert_or_assign(content_hash(missing_texts[j]), fresh[j]);
        out[missing[j]] = std::move(fresh[j]);
        ++misses_;
    }
    return out;
}

void CachedEmbeddingProvider::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return;
    const auto text = read_file(path);
    std::lock_guard lock(mutex_);
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const auto line = std::string_view(text).substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        try {
            const auto record = json::parse(line);
            if (first) {
                first = false;
                if (record.value("provider", std::string{}) != inner_->id()) return;
                continue;
            }
            auto v = record.at("vector").get<Vector>();
            if (v.size() == inner_->dimension()) cache_.insert_or_assign(record.at("hash").get<std::string>(), std::move(v));
        } catch (const json::exception&) {
            // unreadable line: re-embedded on demand
        }
    }
}

void CachedEmbeddingProvider::save(const std::filesystem::path& path) const {
    std::vector<std::pair<std::string, const Vector*>> entries;
    std::lock_guard lock(mutex_);
    entries.reserve(cache_.size());
    for (const auto& [hash, v] : cache_) entries.emplace_back(hash, &v);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string out = json{{"provider", inner_->id()}, {"dimension", inner_->dimension()}}.dump() + "\n";
    for (const auto& [hash, v] : entries) out += json{{"hash", hash}, {"vector", *v}}.dump() + "\n";
    write_file_atomic(path, out);
}

std::size_t CachedEmbeddingProvider::size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::size_t CachedEmbeddingProvider::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t CachedEmbeddingProvider::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

namespace {

void check_text(std::string_view text) {
    if (std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
        throw DataError("cannot embed empty text");
    }
}

Vector finish(Vector v, const EmbeddingProvider& provider) {
    if (v.size() != provider.dimension()) {
        throw DataError(fmt::format("embedding dimension mismatch: got {}, expected {}", v.size(),
                                    provider.dimension()));
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
        throw DataError("embedding contains non-finite values");
    }
    return normalize(std::move(v));
}

}  // namespace

Vector embed(std::string_view text, EmbeddingProvider& provider) {
    check_text(text);
    const std::string owned(text);
    auto batch = provider.embed_batch(std::span<const std::string>(&owned, 1));
    if (batch.size() != 1) throw ProviderError("embedding provider returned the wrong number of vectors");
    return finish(std::move(batch.front()), provider);
}

std::vector<Vector> embed_all(std::span<const std::string> texts, EmbeddingProvider& provider) {
    for (const auto& t : texts) check_text(t);
    auto batch = provider.embed_batch(texts);
    if (batch.size() != texts.size()) throw ProviderError("embedding provider returned the wrong number of vectors");
    for (auto& v : batch) v = finish(std::move(v), provider);
    return batch;
}

}  // namespace ragvv
