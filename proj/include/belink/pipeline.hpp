#pragma once

#include "belink/alias_index.hpp"
#include "belink/candidates.hpp"
#include "belink/config.hpp"
#include "belink/embedding.hpp"
#include "belink/eval.hpp"
#include "belink/genqr.hpp"
#include "belink/kb.hpp"
#include "belink/llm_client.hpp"
#include "belink/reranker.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace belink {

// LlmClient decorator enforcing the global in-flight cap.
class LimitedLlmClient : public LlmClient {
public:
    LimitedLlmClient(std::shared_ptr<LlmClient> inner, std::shared_ptr<InflightLimiter> limiter)
        : inner_(std::move(inner)), limiter_(std::move(limiter)) {}

    LlmResult complete(const LlmRequest& request) override {
        auto ticket = limiter_->acquire();
        return inner_->complete(request);
    }

private:
    std::shared_ptr<LlmClient> inner_;
    std::shared_ptr<InflightLimiter> limiter_;
};

// Same cap applied to embedding provider calls.
class LimitedEmbeddingProvider : public EmbeddingProvider {
public:
    LimitedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                             std::shared_ptr<InflightLimiter> limiter)
        : inner_(std::move(inner)), limiter_(std::move(limiter)) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        auto ticket = limiter_->acquire();
        return inner_->embed_batch(texts);
    }

    const std::string& model_name() const override { return inner_->model_name(); }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::shared_ptr<InflightLimiter> limiter_;
};

// Everything the pipeline did for one mention, for traces and scoring.
struct LinkTrace {
    MentionQuery query;
    bool has_gold = false;
    std::optional<ConceptId> gold;
    std::optional<char> gold_letter; // within the option list, when gold is known
    bool gold_unretrieved = false;   // gold present but missing from the candidates

    std::string feedback_text;
    bool genqr_fallback = false;
    bool fuse_degenerate = false;
    double alpha = 0.0;

    std::vector<RetrievalHit> hits;
    CandidateSet candidates;
    OptionList options;
    RerankPrompt prompt;
    std::vector<PointwiseScore> pointwise_scores;
    RerankDecision decision;
};

// Stable per-mention seed stream for training-time sampling.
uint64_t derive_seed(uint64_t base, uint64_t index);

class Pipeline {
public:
    Pipeline(PipelineConfig config, std::shared_ptr<const KnowledgeBase> kb,
             std::shared_ptr<const AliasIndex> index,
             std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<LlmClient> llm);

    // Link a bare mention (no gold available).
    LinkTrace link_one(const MentionQuery& q);

    // Link with gold known: computes the gold letter (None letter for gold-NIL
    // or unretrieved gold) and hands it to oracle backends out-of-band.
    LinkTrace link_annotated(const AnnotatedMention& mention,
                             DedupMode mode = DedupMode::inference, uint64_t mention_seed = 0);

    const PipelineConfig& config() const { return config_; }
    const KnowledgeBase& kb() const { return *kb_; }
    const AliasIndex& index() const { return *index_; }

private:
    LinkTrace run(const MentionQuery& q, bool has_gold, const std::optional<ConceptId>& gold,
                  DedupMode mode, uint64_t mention_seed);

    PipelineConfig config_;
    std::shared_ptr<const KnowledgeBase> kb_;
    std::shared_ptr<const AliasIndex> index_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    std::shared_ptr<LlmClient> llm_;
};

struct EvalRunResult {
    EvalReport report;
    std::vector<LinkTrace> traces;
};

// Accuracy pass: mentions may be processed by several workers; outcomes are
// assembled in dataset order, so the report is identical however it ran.
EvalRunResult run_accuracy_pass(Pipeline& pipeline, const std::vector<AnnotatedMention>& mentions,
                                int workers);

// Serial unbatched pass returning Q/s.
double run_throughput_pass(Pipeline& pipeline, const std::vector<AnnotatedMention>& mentions,
                           size_t warmup);

} // namespace belink
