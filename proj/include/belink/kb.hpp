#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace belink {

// Namespace-qualified concept identifier, e.g. "MESH:C535396". Opaque to the
// engine; compared byte-wise.
struct ConceptId {
    std::string value;

    bool operator==(const ConceptId& other) const { return value == other.value; }
    bool operator!=(const ConceptId& other) const { return value != other.value; }
    bool operator<(const ConceptId& other) const { return value < other.value; }
};

struct ConceptIdHash {
    size_t operator()(const ConceptId& id) const { return std::hash<std::string>{}(id.value); }
};

// A KB entry: identifier plus its alias strings. The first alias is the
// preferred name, used only for report readability.
struct Concept {
    ConceptId id;
    std::vector<std::string> aliases;
};

struct AliasRecord {
    std::string alias;
    ConceptId concept_id;
};

enum class KbFormat { jsonl, two_column_tsv };

// Immutable after load; safe for concurrent readers.
class KnowledgeBase {
public:
    void add_alias(const ConceptId& id, const std::string& alias);

    const std::vector<Concept>& concepts() const { return concepts_; }
    size_t size() const { return concepts_.size(); }
    bool empty() const { return concepts_.empty(); }

    const Concept* find(const ConceptId& id) const;
    bool contains(const ConceptId& id) const { return find(id) != nullptr; }

    // All concept ids a given alias string maps to, in concept load order.
    // Ambiguity is preserved: one alias may resolve to several concepts.
    std::vector<ConceptId> concepts_for_alias(const std::string& alias) const;

private:
    std::vector<Concept> concepts_;
    std::unordered_map<std::string, size_t> id_to_index_;
    std::unordered_map<std::string, std::vector<size_t>> alias_table_;
};

// Loads a KB file. Duplicate ids merge their alias lists preserving first-seen
// order; duplicate alias strings within one concept are dropped (exact,
// case-preserving comparison). Throws ParseError with the offending line
// number on malformed input, and on an empty KB.
KnowledgeBase load_kb(const std::string& path, KbFormat format);

// One record per (concept, alias) pair: concepts in load order, aliases in
// stored order. This is the row order of the alias index.
std::vector<AliasRecord> enumerate_alias_records(const KnowledgeBase& kb);

} // namespace belink
