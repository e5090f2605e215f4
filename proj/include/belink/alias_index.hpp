#pragma once

#include "belink/embedding.hpp"
#include "belink/kb.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace belink {

struct RetrievalHit {
    std::string alias;
    ConceptId concept_id;
    double score;   // cosine similarity, rows and queries being unit vectors
    int rank;       // 1-based
    size_t ordinal; // row index in the alias matrix; the tie-break key
};

// Exact flat top-k cosine search over the embedded alias records of a KB.
// One row per enumerate_alias_records entry, in that order. Rows are f32,
// scores accumulate in f64 left to right, so a brute-force rescan reproduces
// them bit for bit. Immutable after build; search is const and thread-safe.
class AliasIndex {
public:
    AliasIndex(std::vector<float> matrix, std::vector<AliasRecord> records, size_t dim);

    size_t rows() const { return records_.size(); }
    size_t dim() const { return dim_; }
    const std::vector<AliasRecord>& records() const { return records_; }
    const float* row(size_t i) const { return matrix_.data() + i * dim_; }
    const std::vector<float>& matrix() const { return matrix_; }

    // Exactly min(k, rows) hits, scores non-increasing, ties broken by lower
    // row ordinal. The query is normalized before scoring.
    std::vector<RetrievalHit> search(const EmbeddingVector& query, int k) const;

    void save_snapshot(const std::string& path) const;
    static AliasIndex load_snapshot(const std::string& path);

private:
    std::vector<float> matrix_; // row-major, rows() x dim()
    std::vector<AliasRecord> records_;
    size_t dim_;
};

// Embeds every alias record of the KB (in enumeration order) and assembles the
// index. Embedder failures are rethrown with the failing batch's record offset.
AliasIndex build_index(const KnowledgeBase& kb, EmbeddingProvider& embedder,
                       size_t batch_size = 512);

} // namespace belink
