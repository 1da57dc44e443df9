#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ragvv/corpus.hpp"
#include "ragvv/embedder.hpp"
#include "ragvv/vectorstore.hpp"

namespace ragvv {

struct Retrieved {
    std::vector<ScoredDoc> hits;
    std::vector<KnowledgeDocument> documents;  // same order as hits
};

/// Query-side glue: embed the query with the index's provider, then exact top-k.
class Retriever {
public:
    Retriever(const VectorIndex& index, EmbeddingProvider& embedder, std::size_t k);

    [[nodiscard]] Retrieved retrieve(std::string_view query) const;
    [[nodiscard]] std::size_t k() const noexcept { return k_; }

private:
    const VectorIndex& index_;
    EmbeddingProvider& embedder_;
    std::size_t k_;
};

}  // namespace ragvv
