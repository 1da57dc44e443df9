#include "ragvv/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "ragvv/error.hpp"

namespace ragvv {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'G', 'V', 'V', 'I', 'D', 'X'};
constexpr std::uint32_t kSnapshotVersion = 1;

static_assert(std::endian::native == std::endian::little, "snapshot format assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

void put_string(std::string& out, std::string_view s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    Reader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] bool done() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DataError(fmt::format("{}: truncated index snapshot", origin_));
    }

    std::string_view data_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError(fmt::format("cosine: dimension mismatch ({} vs {})", a.size(), b.size()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DataError("cosine: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool ranks_before(const ScoredDoc& lhs, const ScoredDoc& rhs) noexcept {
    if (lhs.score != rhs.score) return lhs.score > rhs.score;
    return lhs.doc_id < rhs.doc_id;
}

VectorIndex::VectorIndex(std::size_t dimension, std::string provider_id)
    : dimension_(dimension), provider_id_(std::move(provider_id)) {
    if (dimension_ == 0) throw DataError("index dimension must be positive");
}

void VectorIndex::add(IndexEntry entry) {
    if (frozen_) throw DataError("index is frozen");
    if (entry.doc_id.empty()) throw DataError("index entry with empty doc_id");
    if (entry.vector.size() != dimension_) {
        throw DataError(fmt::format("doc '{}': dimension {} does not match index dimension {}", entry.doc_id,
                                    entry.vector.size(), dimension_));
    }
    if (by_id_.contains(entry.doc_id)) throw DataError(fmt::format("duplicate doc_id '{}' in index", entry.doc_id));
    by_id_.emplace(entry.doc_id, entries_.size());
    entries_.push_back(std::move(entry));
}

const IndexEntry* VectorIndex::find(const std::string& doc_id) const {
    const auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::vector<ScoredDoc> VectorIndex::top_k(std::span<const double> query, std::size_t k) const {
    if (entries_.empty()) throw DataError("top_k on an empty index");
    if (k == 0) throw DataError("top_k requires k >= 1");
    if (query.size() != dimension_) {
        throw DataError(fmt::format("query dimension {} does not match index dimension {}", query.size(), dimension_));
    }
    std::vector<ScoredDoc> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) scored.push_back({e.doc_id, cosine(query, e.vector)});
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
    scored.resize(n);
    return scored;
}

void VectorIndex::save(const std::filesystem::path& path) const {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dimension_));
    put_string(out, provider_id_);
    put<std::uint64_t>(out, entries_.size());
    for (const auto& e : entries_) {
        put_string(out, e.doc_id);
        out.append(reinterpret_cast<const char*>(e.vector.data()), e.vector.size() * sizeof(double));
    }
    write_file_atomic(path, out);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    const auto data = read_file(path);
    Reader in(data, path.string());
    if (in.bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
        throw DataError(fmt::format("{}: not an index snapshot", path.string()));
    }
    if (const auto version = in.get<std::uint32_t>(); version != kSnapshotVersion) {
        throw DataError(fmt::format("{}: unsupported snapshot version {}", path.string(), version));
    }
    const auto dim = in.get<std::uint32_t>();
    VectorIndex index(dim, in.get_string());
    const auto count = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        IndexEntry e;
        e.doc_id = in.get_string();
        const auto raw = in.bytes(dim * sizeof(double));
        e.vector.resize(dim);
        std::memcpy(e.vector.data(), raw.data(), raw.size());
        index.add(std::move(e));
    }
    if (!in.done()) throw DataError(fmt::format("{}: trailing bytes in index snapshot", path.string()));
    index.freeze();
    return index;
}

void VectorIndex::attach(const std::vector<KnowledgeDocument>& docs) {
    std::unordered_map<std::string, const KnowledgeDocument*> lookup;
    for (const auto& d : docs) lookup.emplace(d.doc_id, &d);
    for (auto& e : entries_) {
        const auto it = lookup.find(e.doc_id);
        if (it == lookup.end()) {
            throw DataError(fmt::format("index entry '{}' is not in the knowledge base; rebuild the index", e.doc_id));
        }
        e.payload = std::make_shared<const KnowledgeDocument>(*it->second);
    }
}

std::string embedding_text(const KnowledgeDocument& doc, bool include_metadata) {
    if (!include_metadata || doc.metadata.empty()) return doc.content;
    std::string text = doc.content;
    for (const auto& [k, v] : doc.metadata) {
        text += '\n';
        text += k;
        text += ": ";
        text += v;
    }
    return text;
}

VectorIndex build_index(const std::vector<KnowledgeDocument>& docs, EmbeddingProvider& provider,
                        bool include_metadata) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(embedding_text(d, include_metadata));
    auto vectors = embed_all(texts, provider);
    VectorIndex index(provider.dimension(), provider.id());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        index.add({docs[i].doc_id, std::move(vectors[i]), std::make_shared<const KnowledgeDocument>(docs[i])});
    }
    index.freeze();
    return index;
}

}  // namespace ragvv
