#pragma once

#include "belink/alias_index.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace belink {

struct Candidate {
    ConceptId concept_id;
    std::string display_alias;
    double best_score;
    size_t best_ordinal;
    std::vector<std::string> retrieved_aliases; // this concept's aliases among the hits
};

struct CandidateSet {
    std::vector<Candidate> candidates; // option order: best score desc, ordinal tie-break
    std::vector<RetrievalHit> source_hits;

    size_t size() const { return candidates.size(); }
    bool empty() const { return candidates.empty(); }

    // Highest-ranked retrieved concept; the fallback prediction. Independent
    // of any later reordering of `candidates`.
    std::optional<ConceptId> top1() const {
        if (source_hits.empty()) {
            return std::nullopt;
        }
        return source_hits.front().concept_id;
    }
};

enum class DedupMode { inference, training };

// Groups alias hits into one candidate per concept. Inference keeps the
// highest-scoring alias as the display name; training samples uniformly among
// the concept's retrieved aliases (deterministic given rng_seed). Empty hits
// yield an empty set, which forces the NIL path downstream.
CandidateSet dedup_by_concept(const std::vector<RetrievalHit>& hits, DedupMode mode,
                              uint64_t rng_seed = 0);

// In-place Fisher-Yates on the candidate order (training-time ablation against
// retrieval-order dependence). source_hits are untouched, so top1() survives.
void shuffle_candidates(CandidateSet& cs, uint64_t rng_seed);

struct Option {
    char letter;
    std::string text;
};

struct OptionList {
    std::vector<Option> options; // candidates only; consecutive letters from 'A'
    char none_letter;            // the letter after the last candidate

    static constexpr const char* kNoneText = "None of the above.";

    size_t size() const { return options.size(); }
};

// Letters A.. for candidates plus the trailing None option. At most 25
// candidates fit; larger sets are a contract error instructing a smaller k.
OptionList build_options(const CandidateSet& cs);

} // namespace belink
