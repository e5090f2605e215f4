#pragma once

#include "belink/embedding.hpp"
#include "belink/llm_client.hpp"

#include <string>

namespace belink {

// A mention span m inside its source text T.
struct MentionQuery {
    std::string mention;
    std::string context;
    std::string doc_id;
};

struct FeedbackResult {
    std::string text;
    bool fell_back = false; // LLM unavailable or returned nothing usable
};

// Substitutes {m} and {T} in a prompt template.
std::string instantiate_prompt(const std::string& prompt_template, const MentionQuery& q);

// Asks the LLM for a standard scientific name for the mention; single-line,
// whitespace and surrounding quotes stripped. On LLM failure the feedback
// degrades to the mention itself and the fallback flag is set, so the pipeline
// reduces to plain retrieval instead of aborting.
FeedbackResult generate_feedback(const MentionQuery& q, LlmClient& llm,
                                 const std::string& prompt_template, int max_tokens = 32);

struct FusedQuery {
    EmbeddingVector vec;
    bool degenerate = false; // inputs cancelled; fell back to the mention vector
};

// Convex combination alpha*m + (1-alpha)*f of two unit vectors, re-normalized.
// alpha=1 returns the mention vector bit-exactly, alpha=0 the feedback vector.
FusedQuery fuse_query(const EmbeddingVector& mention_vec, const EmbeddingVector& feedback_vec,
                      double alpha);

} // namespace belink
