#include "belink/alias_index.hpp"

#include "belink/errors.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <queue>

namespace belink {

namespace {

constexpr char kSnapshotMagic[8] = {'B', 'L', 'N', 'K', 'I', 'D', 'X', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) {
        throw ParseError("truncated index snapshot: " + path);
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
    uint32_t len = read_pod<uint32_t>(in, path);
    if (len > (1u << 24)) {
        throw ParseError("implausible string length in index snapshot: " + path);
    }
    std::string s(len, '\0');
    if (!in.read(s.data(), len)) {
        throw ParseError("truncated index snapshot: " + path);
    }
    return s;
}

} // namespace

AliasIndex::AliasIndex(std::vector<float> matrix, std::vector<AliasRecord> records, size_t dim)
    : matrix_(std::move(matrix)), records_(std::move(records)), dim_(dim) {
    if (dim_ == 0 || matrix_.size() != records_.size() * dim_) {
        throw ContractError("AliasIndex: matrix shape does not match records");
    }
}

std::vector<RetrievalHit> AliasIndex::search(const EmbeddingVector& query, int k) const {
    if (k < 1) {
        throw ContractError("search: k must be >= 1");
    }
    if (query.dim() != dim_) {
        throw ContractError("search: query dim " + std::to_string(query.dim()) +
                            " != index dim " + std::to_string(dim_));
    }
    EmbeddingVector q = normalize(query);

    struct Entry {
        double score;
        size_t ordinal;
    };
    auto better = [](const Entry& a, const Entry& b) {
        return a.score > b.score || (a.score == b.score && a.ordinal < b.ordinal);
    };
    // max-heap under `better`: top() is the worst kept entry
    std::priority_queue<Entry, std::vector<Entry>, decltype(better)> kept(better);

    size_t keep = std::min(static_cast<size_t>(k), rows());
    for (size_t i = 0; i < rows(); ++i) {
        const float* row_ptr = row(i);
        double score = 0.0;
        for (size_t j = 0; j < dim_; ++j) {
            score += static_cast<double>(row_ptr[j]) * q.values[j];
        }
        Entry entry{score, i};
        if (kept.size() < keep) {
            kept.push(entry);
        } else if (better(entry, kept.top())) {
            kept.pop();
            kept.push(entry);
        }
    }

    std::vector<RetrievalHit> hits(kept.size());
    for (size_t pos = kept.size(); pos-- > 0;) {
        const Entry& e = kept.top();
        hits[pos] = RetrievalHit{records_[e.ordinal].alias, records_[e.ordinal].concept_id,
                                 e.score, static_cast<int>(pos) + 1, e.ordinal};
        kept.pop();
    }
    return hits;
}

void AliasIndex::save_snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write index snapshot: " + path);
    }
    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    write_pod(out, static_cast<uint32_t>(dim_));
    write_pod(out, static_cast<uint64_t>(rows()));
    out.write(reinterpret_cast<const char*>(matrix_.data()),
              static_cast<std::streamsize>(matrix_.size() * sizeof(float)));
    for (const auto& record : records_) {
        write_string(out, record.alias);
        write_string(out, record.concept_id.value);
    }
    if (!out) {
        throw std::runtime_error("failed writing index snapshot: " + path);
    }
}

AliasIndex AliasIndex::load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open index snapshot: " + path);
    }
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
        throw ParseError("not an index snapshot (bad magic): " + path);
    }
    uint32_t dim = read_pod<uint32_t>(in, path);
    uint64_t rows = read_pod<uint64_t>(in, path);
    if (dim == 0 || rows == 0) {
        throw ParseError("empty index snapshot: " + path);
    }
    std::vector<float> matrix(static_cast<size_t>(rows) * dim);
    if (!in.read(reinterpret_cast<char*>(matrix.data()),
                 static_cast<std::streamsize>(matrix.size() * sizeof(float)))) {
        throw ParseError("truncated index snapshot matrix: " + path);
    }
    std::vector<AliasRecord> records;
    records.reserve(rows);
    for (uint64_t i = 0; i < rows; ++i) {
        std::string alias = read_string(in, path);
        std::string id = read_string(in, path);
        records.push_back(AliasRecord{std::move(alias), ConceptId{std::move(id)}});
    }
    return AliasIndex(std::move(matrix), std::move(records), dim);
}

AliasIndex build_index(const KnowledgeBase& kb, EmbeddingProvider& embedder, size_t batch_size) {
    if (kb.empty()) {
        throw ContractError("build_index: empty knowledge base");
    }
    std::vector<AliasRecord> records = enumerate_alias_records(kb);
    std::vector<float> matrix;
    size_t dim = 0;
    for (size_t start = 0; start < records.size(); start += batch_size) {
        size_t end = std::min(records.size(), start + batch_size);
        std::vector<std::string> texts;
        texts.reserve(end - start);
        for (size_t i = start; i < end; ++i) {
            texts.push_back(records[i].alias);
        }
        std::vector<EmbeddingVector> vectors;
        auto at_offset = [start](const char* what) {
            return "build_index: embedding failed at record offset " + std::to_string(start) +
                   ": " + what;
        };
        try {
            vectors = embedder.embed_batch(texts);
        } catch (const TransportError& e) {
            throw TransportError(at_offset(e.what()));
        } catch (const ProtocolError& e) {
            throw ProtocolError(at_offset(e.what()));
        } catch (const std::exception& e) {
            throw std::runtime_error(at_offset(e.what()));
        }
        if (dim == 0) {
            dim = vectors.front().dim();
            matrix.reserve(records.size() * dim);
        }
        for (const auto& v : vectors) {
            if (v.dim() != dim) {
                throw ProtocolError("build_index: embedding dimension changed mid-build");
            }
            for (double x : v.values) {
                matrix.push_back(static_cast<float>(x));
            }
        }
    }
    return AliasIndex(std::move(matrix), std::move(records), dim);
}

} // namespace belink
