#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragvv/corpus.hpp"
#include "ragvv/embedder.hpp"

namespace ragvv {

inline constexpr std::size_t kDefaultTopK = 3;

struct IndexEntry {
    std::string doc_id;
    Vector vector;  // unit norm
    std::shared_ptr<const KnowledgeDocument> payload;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// dot(a, b) / (|a| |b|) in double precision. Throws on dimension mismatch or a zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);

/// Ranking order used everywhere: score descending, then doc_id ascending.
bool ranks_before(const ScoredDoc& lhs, const ScoredDoc& rhs) noexcept;

/// Exact in-memory cosine index. Single writer while building; after freeze()
/// it is immutable and safe to query from any number of threads.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension, std::string provider_id = {});

    void add(IndexEntry entry);
    void freeze() noexcept { frozen_ = true; }

    [[nodiscard]] bool frozen() const noexcept { return frozen_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    [[nodiscard]] const std::string& provider_id() const noexcept { return provider_id_; }
    [[nodiscard]] const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const IndexEntry* find(const std::string& doc_id) const;

    /// min(k, size()) hits by brute-force scan, ordered by ranks_before.
    [[nodiscard]] std::vector<ScoredDoc> top_k(std::span<const double> query, std::size_t k) const;

    /// Binary snapshot of ids and vectors with a version header; reload is bit-exact.
    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

    /// Re-attaches document payloads by id after load(). Ids unknown to `docs` are an error.
    void attach(const std::vector<KnowledgeDocument>& docs);

private:
    std::size_t dimension_;
    std::string provider_id_;
    bool frozen_ = false;
    std::vector<IndexEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Embeds every document's content (optionally with metadata appended) and builds a frozen index.
VectorIndex build_index(const std::vector<KnowledgeDocument>& docs, EmbeddingProvider& provider,
                        bool include_metadata = false);

/// Text embedded for a document.
std::string embedding_text(const KnowledgeDocument& doc, bool include_metadata);

}  // namespace ragvv
