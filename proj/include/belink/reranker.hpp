#pragma once

#include "belink/candidates.hpp"
#include "belink/genqr.hpp"
#include "belink/llm_client.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace belink {

struct RerankPrompt {
    std::string rendered;             // full literal chat template
    std::vector<LlmMessage> messages; // the user turn, marker-free
    std::string assistant_prefix;     // fixed "<think></think>\nAnswer:" suffix
};

// Renders the set-wise multiple-choice template for one mention. The rendered
// form is byte-stable: golden-file tests depend on it.
RerankPrompt build_prompt(const MentionQuery& q, const OptionList& opts);

struct RerankDecision {
    std::optional<ConceptId> predicted;
    bool is_nil = false;
    bool fell_back = false; // invalid/None-less answer replaced by the top-1 concept
    bool llm_error = false;
    std::string raw_answer;
    std::chrono::microseconds latency{0};
};

// One LLM invocation for the whole candidate set. The answer letter maps to
// its candidate; the None letter means NIL; anything unparseable falls back to
// the top-1 retrieved concept. LLM transport failures degrade the same way
// with llm_error set.
RerankDecision select_setwise(const RerankPrompt& prompt, const OptionList& opts,
                              const CandidateSet& cs, LlmClient& llm,
                              std::optional<char> gold_letter_hint = std::nullopt);

struct PointwiseScore {
    ConceptId concept_id;
    double yes_probability; // P("yes") normalized over the yes/no mass
};

// Point-wise baseline: one binary-judgment LLM call per candidate. Requires
// token probabilities at the answer position; their absence is a protocol
// error.
std::vector<PointwiseScore> score_pointwise(const MentionQuery& q, const CandidateSet& cs,
                                            LlmClient& llm, const std::string& prompt_template);

// Top score wins (ties to the lower ordinal). In NIL-sensitive mode a top
// score below the threshold marks the mention unlinkable.
RerankDecision decide_pointwise(const std::vector<PointwiseScore>& scores, double threshold,
                                bool nil_sensitive);

// One chat-format training line: the rendered user turn plus the gold answer.
std::string training_example_jsonl(const RerankPrompt& prompt, char gold_letter);

} // namespace belink
