#include "ragvv/retrieval.hpp"

#include <fmt/format.h>

#include "ragvv/error.hpp"

namespace ragvv {

Retriever::Retriever(const VectorIndex& index, EmbeddingProvider& embedder, std::size_t k)
    : index_(index), embedder_(embedder), k_(k) {
    if (k_ == 0) throw DataError("retrieval k must be at least 1");
    if (embedder_.dimension() != index_.dimension()) {
        throw DataError(fmt::format("embedder dimension {} does not match index dimension {}", embedder_.dimension(),
                                    index_.dimension()));
    }
    if (!index_.provider_id().empty() && index_.provider_id() != embedder_.id()) {
        throw DataError(fmt::format("index was built with embedder '{}' but '{}' is configured", index_.provider_id(),
                                    embedder_.id()));
    }
}

Retrieved Retriever::retrieve(std::string_view query) const {
    Retrieved out;
    out.hits = index_.top_k(embed(query, embedder_), k_);
    out.documents.reserve(out.hits.size());
    for (const auto& hit : out.hits) {
        const auto* entry = index_.find(hit.doc_id);
        if (!entry || !entry->payload) {
            throw DataError(fmt::format("index entry '{}' has no attached document", hit.doc_id));
        }
        out.documents.push_back(*entry->payload);
    }
    return out;
}

}  // namespace ragvv
