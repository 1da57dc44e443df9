#include <gtest/gtest.h>

#include <cmath>

#include "ragvv/embedder.hpp"
#include "ragvv/error.hpp"
#include "ragvv/vectorstore.hpp"
#include "test_support.hpp"

namespace {

using namespace ragvv;

TEST(Normalize, Pythagorean) {
    const auto v = normalize({3.0, 4.0});
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(Normalize, UnitVectorIsFixedPoint) {
    const Vector u{0.0, 1.0, 0.0};
    EXPECT_EQ(normalize(u), u);
    const auto w = normalize({1.0, 2.0, 2.0});
    const auto ww = normalize(w);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], ww[i], 1e-15);
}

TEST(Normalize, ScaleInvariant) {
    const auto a = normalize({1.0, -2.0, 5.0});
    const auto b = normalize({7.5, -15.0, 37.5});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Normalize, ZeroVector) {
    EXPECT_THROW(normalize({0.0, 0.0}), NotNormalizable);
    Vector z{0.0, 0.0};
    EXPECT_FALSE(normalize_in_place(z));
    EXPECT_EQ(z, (Vector{0.0, 0.0}));
}

TEST(HashedEmbed, Deterministic) {
    EXPECT_EQ(hashed_embed("def f(x): return x", 384), hashed_embed("def f(x): return x", 384));
}

TEST(HashedEmbed, IdenticalStringsCosineOne) {
    const auto a = hashed_embed("sum a list of numbers", 384);
    EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
}

TEST(HashedEmbed, WordOrderChangesOnlyBigrams) {
    // "a b" and "b a" share both unigrams and differ in their single bigram:
    // with no bucket collisions the cosine is 2/3.
    const auto ab = hashed_embed("a b", 4096);
    const auto ba = hashed_embed("b a", 4096);
    const double c = cosine(ab, ba);
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 1.0);
    EXPECT_NEAR(c, 2.0 / 3.0, 1e-12);
}

TEST(HashedEmbed, DisjointTokensNearlyOrthogonal) {
    const auto a = hashed_embed("alpha beta gamma", 4096);
    const auto b = hashed_embed("delta epsilon zeta", 4096);
    // Five features each; one bucket collision would move the cosine by 1/5.
    EXPECT_LT(std::abs(cosine(a, b)), 0.2 + 1e-12);
}

TEST(HashedEmbed, CaseInsensitiveWords) { EXPECT_EQ(hashed_embed("Hello World", 64), hashed_embed("hello world", 64)); }

TEST(HashedEmbed, PunctuationOnlyTextStillEmbeds) {
    const auto v = hashed_embed("+-*/", 64);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
}

TEST(HashedEmbed, SmallDimensionRejected) { EXPECT_THROW(hashed_embed("x", 4), Error); }

TEST(Embed, UnitNormOverCorpus) {
    HashedEmbeddingProvider provider;
    int n = 0;
    for (const auto& doc : testkit::snippet_corpus()) {
        EXPECT_NEAR(norm(embed(doc.content, provider)), 1.0, 1e-9) << doc.doc_id;
        if (++n == 100) break;
    }
}

TEST(Embed, EmptyTextIsPreconditionError) {
    HashedEmbeddingProvider provider;
    EXPECT_THROW(embed("", provider), DataError);
    EXPECT_THROW(embed("   \n", provider), DataError);
}

class WrongWidthProvider final : public EmbeddingProvider {
public:
    std::size_t dimension() const override { return 16; }
    std::string id() const override { return "wrong"; }
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override {
        return std::vector<Vector>(texts.size(), Vector(8, 1.0));
    }
};

TEST(Embed, DimensionMismatchIsHardError) {
    WrongWidthProvider provider;
    EXPECT_THROW(embed("text", provider), Error);
}

TEST(Provider, HashedId) { EXPECT_EQ(HashedEmbeddingProvider(128).id(), "hashed:128"); }

class CountingProvider final : public EmbeddingProvider {
public:
    std::size_t dimension() const override { return 32; }
    std::string id() const override { return "counting:32"; }
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override {
        calls += texts.size();
        std::vector<Vector> out;
        for (const auto& t : texts) out.push_back(hashed_embed(t, 32));
        return out;
    }
    std::size_t calls = 0;
};

TEST(Cache, ReadThroughAndPersist) {
    auto inner = std::make_shared<CountingProvider>();
    CachedEmbeddingProvider cache(inner);
    const std::vector<std::string> texts{"one", "two", "one"};
    const auto first = embed_all(texts, cache);
    EXPECT_EQ(cache.size(), 2u);
    const auto again = embed_all(texts, cache);
    EXPECT_EQ(first, again);
    EXPECT_EQ(inner->calls, 3u);  // first batch misses all three entries
    EXPECT_EQ(cache.hits(), 3u);

    testkit::TempDir dir;
    cache.save(dir / "cache.jsonl");
    auto inner2 = std::make_shared<CountingProvider>();
    CachedEmbeddingProvider reloaded(inner2);
    reloaded.load(dir / "cache.jsonl");
    EXPECT_EQ(reloaded.size(), 2u);
    EXPECT_EQ(embed_all(texts, reloaded), first);
    EXPECT_EQ(inner2->calls, 0u);
}

TEST(Cache, IgnoresEntriesFromOtherProvider) {
    testkit::TempDir dir;
    {
        CachedEmbeddingProvider cache(std::make_shared<HashedEmbeddingProvider>(32));
        embed("one", cache);
        cache.save(dir / "cache.jsonl");
    }
    CachedEmbeddingProvider other(std::make_shared<CountingProvider>());
    other.load(dir / "cache.jsonl");
    EXPECT_EQ(other.size(), 0u);
}

}  // namespace
