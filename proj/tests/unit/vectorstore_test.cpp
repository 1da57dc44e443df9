#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ragvv/embedder.hpp"
#include "ragvv/error.hpp"
#include "ragvv/retrieval.hpp"
#include "ragvv/vectorstore.hpp"
#include "test_support.hpp"

namespace {

using namespace ragvv;

Vector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> g;
    Vector v(dim);
    for (auto& x : v) x = g(rng);
    return normalize(std::move(v));
}

TEST(Cosine, Analytic) {
    const Vector v{0.3, -1.2, 2.0};
    EXPECT_NEAR(cosine(v, v), 1.0, 1e-12);
    EXPECT_EQ(cosine(Vector{1, 0}, Vector{0, 1}), 0.0);
    EXPECT_NEAR(cosine(Vector{1, 0}, Vector{1, 1}), 0.70710678, 1e-8);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine(Vector{1, 0}, Vector{1, 0, 0}), DataError);
    EXPECT_THROW(cosine(Vector{0, 0}, Vector{1, 0}), DataError);
}

TEST(VectorIndex, SelfRetrieval) {
    std::mt19937_64 rng(1);
    VectorIndex index(16);
    const auto v = random_unit(rng, 16);
    index.add({"only", v, nullptr});
    index.add({"other", random_unit(rng, 16), nullptr});
    const auto hits = index.top_k(v, 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].doc_id, "only");
    EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
}

TEST(VectorIndex, AddErrors) {
    VectorIndex index(4);
    index.add({"a", {1, 0, 0, 0}, nullptr});
    EXPECT_THROW(index.add({"a", {0, 1, 0, 0}, nullptr}), DataError);
    EXPECT_THROW(index.add({"b", {0, 1, 0}, nullptr}), DataError);
    index.freeze();
    EXPECT_THROW(index.add({"c", {0, 0, 1, 0}, nullptr}), DataError);
}

TEST(VectorIndex, EmptyIndexQueryFails) {
    VectorIndex index(4);
    EXPECT_THROW(index.top_k(Vector{1, 0, 0, 0}, 1), DataError);
}

TEST(VectorIndex, KLargerThanCountReturnsAllSorted) {
    VectorIndex index(2);
    index.add({"x", normalize({1, 0}), nullptr});
    index.add({"y", normalize({1, 1}), nullptr});
    index.add({"z", normalize({-1, 0}), nullptr});
    const auto hits = index.top_k(Vector{1, 0}, 10);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].doc_id, "x");
    EXPECT_EQ(hits[1].doc_id, "y");
    EXPECT_EQ(hits[2].doc_id, "z");
}

TEST(VectorIndex, TiesBrokenByDocId) {
    VectorIndex index(2);
    index.add({"b", {0, 1}, nullptr});
    index.add({"c", {1, 0}, nullptr});
    index.add({"a", {1, 0}, nullptr});
    const auto hits = index.top_k(Vector{1, 0}, 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].doc_id, "a");
    EXPECT_EQ(hits[1].doc_id, "c");
}

TEST(VectorIndex, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    constexpr std::size_t kDim = 64;
    VectorIndex index(kDim);
    std::vector<std::pair<std::string, Vector>> docs;
    for (int i = 0; i < 300; ++i) {
        auto v = random_unit(rng, kDim);
        docs.emplace_back("d" + std::to_string(i), v);
        index.add({docs.back().first, v, nullptr});
    }
    for (int q = 0; q < 30; ++q) {
        const auto query = random_unit(rng, kDim);
        std::vector<ScoredDoc> all;
        for (const auto& [id, v] : docs) {
            double dot = 0;
            for (std::size_t i = 0; i < kDim; ++i) dot += query[i] * v[i];
            all.push_back({id, dot});
        }
        std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
        });
        for (const std::size_t k : {1u, 3u, 10u}) {
            const auto hits = index.top_k(query, k);
            ASSERT_EQ(hits.size(), k);
            for (std::size_t i = 0; i < k; ++i) {
                EXPECT_EQ(hits[i].doc_id, all[i].doc_id);
                EXPECT_NEAR(hits[i].score, all[i].score, 1e-12);
            }
        }
    }
}

TEST(VectorIndex, InsertionOrderDoesNotMatter) {
    std::mt19937_64 rng(5);
    std::vector<IndexEntry> entries;
    for (int i = 0; i < 50; ++i) entries.push_back({"e" + std::to_string(i), random_unit(rng, 8), nullptr});
    VectorIndex forward(8);
    VectorIndex backward(8);
    for (const auto& e : entries) forward.add(e);
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) backward.add(*it);
    const auto q = random_unit(rng, 8);
    EXPECT_EQ(forward.top_k(q, 10), backward.top_k(q, 10));
}

TEST(VectorIndex, ScoresWithinBounds) {
    std::mt19937_64 rng(6);
    VectorIndex index(8);
    for (int i = 0; i < 100; ++i) index.add({std::to_string(i), random_unit(rng, 8), nullptr});
    for (const auto& h : index.top_k(random_unit(rng, 8), 100)) {
        EXPECT_GE(h.score, -1.0 - 1e-9);
        EXPECT_LE(h.score, 1.0 + 1e-9);
    }
}

TEST(Snapshot, BitExactReload) {
    std::mt19937_64 rng(7);
    VectorIndex index(24, "hashed:24");
    for (int i = 0; i < 40; ++i) index.add({"doc-" + std::to_string(i), random_unit(rng, 24), nullptr});
    testkit::TempDir dir;
    index.save(dir / "idx.bin");
    const auto loaded = VectorIndex::load(dir / "idx.bin");
    EXPECT_TRUE(loaded.frozen());
    EXPECT_EQ(loaded.provider_id(), "hashed:24");
    ASSERT_EQ(loaded.size(), index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        EXPECT_EQ(loaded.entries()[i].doc_id, index.entries()[i].doc_id);
        EXPECT_EQ(loaded.entries()[i].vector, index.entries()[i].vector);
    }
}

TEST(Snapshot, RejectsCorruptFiles) {
    testkit::TempDir dir;
    write_file_atomic(dir / "bad.bin", "not an index");
    EXPECT_THROW(VectorIndex::load(dir / "bad.bin"), DataError);
    VectorIndex index(4, "x");
    index.add({"a", {1, 0, 0, 0}, nullptr});
    index.save(dir / "ok.bin");
    auto bytes = read_file(dir / "ok.bin");
    write_file_atomic(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(VectorIndex::load(dir / "short.bin"), DataError);
}

TEST(BuildIndex, CorpusCountAndAttach) {
    const auto docs = testkit::snippet_corpus();
    HashedEmbeddingProvider provider(128);
    const auto index = build_index(docs, provider);
    EXPECT_EQ(index.size(), docs.size());
    testkit::TempDir dir;
    index.save(dir / "kb.idx");
    auto loaded = VectorIndex::load(dir / "kb.idx");
    loaded.attach(docs);
    ASSERT_NE(loaded.find(docs[3].doc_id), nullptr);
    ASSERT_TRUE(loaded.find(docs[3].doc_id)->payload);
    EXPECT_EQ(loaded.find(docs[3].doc_id)->payload->content, docs[3].content);
    const std::vector<KnowledgeDocument> partial(docs.begin() + 1, docs.end());
    EXPECT_THROW(loaded.attach(partial), DataError);
}

TEST(BuildIndex, MetadataExcludedByDefault) {
    KnowledgeDocument d{"t", "code", {{"text", "description"}}};
    EXPECT_EQ(embedding_text(d, false), "code");
    EXPECT_NE(embedding_text(d, true).find("description"), std::string::npos);
}

TEST(Retriever, ReturnsDocumentsInHitOrder) {
    const auto docs = testkit::snippet_corpus();
    HashedEmbeddingProvider provider(256);
    const auto index = build_index(docs, provider);
    Retriever retriever(index, provider, 3);
    const auto r = retriever.retrieve(docs[5].content);
    ASSERT_EQ(r.hits.size(), 3u);
    ASSERT_EQ(r.documents.size(), 3u);
    EXPECT_EQ(r.hits[0].doc_id, docs[5].doc_id);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.documents[i].doc_id, r.hits[i].doc_id);
}

TEST(Retriever, RejectsMismatchedEmbedder) {
    const auto docs = testkit::snippet_corpus();
    HashedEmbeddingProvider built(256);
    const auto index = build_index(docs, built);
    HashedEmbeddingProvider narrower(128);
    EXPECT_THROW(Retriever(index, narrower, 3), DataError);
    EXPECT_THROW(Retriever(index, built, 0), DataError);
}

}  // namespace
