#include "belink/candidates.hpp"

#include "belink/errors.hpp"

#include <random>
#include <unordered_map>

namespace belink {

CandidateSet dedup_by_concept(const std::vector<RetrievalHit>& hits, DedupMode mode,
                              uint64_t rng_seed) {
    for (size_t i = 1; i < hits.size(); ++i) {
        if (hits[i].rank <= hits[i - 1].rank) {
            throw ContractError("dedup_by_concept: hits must be sorted by rank");
        }
    }

    CandidateSet cs;
    cs.source_hits = hits;
    std::unordered_map<std::string, size_t> concept_to_candidate;
    for (const auto& hit : hits) {
        auto it = concept_to_candidate.find(hit.concept_id.value);
        if (it == concept_to_candidate.end()) {
            // first (= best) hit for this concept; hits arrive rank-sorted
            concept_to_candidate.emplace(hit.concept_id.value, cs.candidates.size());
            cs.candidates.push_back(
                Candidate{hit.concept_id, hit.alias, hit.score, hit.ordinal, {hit.alias}});
        } else {
            cs.candidates[it->second].retrieved_aliases.push_back(hit.alias);
        }
    }

    if (mode == DedupMode::training) {
        // mt19937_64 with a plain modulo keeps the draw identical on every
        // platform, unlike uniform_int_distribution
        std::mt19937_64 rng(rng_seed);
        for (auto& candidate : cs.candidates) {
            size_t pick = static_cast<size_t>(rng() % candidate.retrieved_aliases.size());
            candidate.display_alias = candidate.retrieved_aliases[pick];
        }
    }
    return cs;
}

void shuffle_candidates(CandidateSet& cs, uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    for (size_t i = cs.candidates.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(cs.candidates[i - 1], cs.candidates[j]);
    }
}

OptionList build_options(const CandidateSet& cs) {
    if (cs.candidates.size() > 25) {
        throw ContractError("build_options: more than 25 candidates; retrieve with a smaller k");
    }
    OptionList opts;
    opts.options.reserve(cs.candidates.size());
    for (size_t i = 0; i < cs.candidates.size(); ++i) {
        opts.options.push_back(Option{static_cast<char>('A' + i), cs.candidates[i].display_alias});
    }
    opts.none_letter = static_cast<char>('A' + cs.candidates.size());
    return opts;
}

} // namespace belink
