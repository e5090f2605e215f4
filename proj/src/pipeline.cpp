#include "belink/pipeline.hpp"

#include "belink/errors.hpp"

#include <atomic>
#include <exception>
#include <thread>

namespace belink {

uint64_t derive_seed(uint64_t base, uint64_t index) {
    uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<const KnowledgeBase> kb,
                   std::shared_ptr<const AliasIndex> index,
                   std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<LlmClient> llm)
    : config_(std::move(config)), kb_(std::move(kb)), index_(std::move(index)),
      embedder_(std::move(embedder)), llm_(std::move(llm)) {
    if (!index_ || !embedder_) {
        throw ContractError("Pipeline: index and embedder are required");
    }
    bool needs_llm = config_.genqr_enabled || config_.rerank_mode != RerankMode::none;
    if (needs_llm && !llm_) {
        throw ContractError("Pipeline: configuration requires an LLM backend");
    }
}

LinkTrace Pipeline::link_one(const MentionQuery& q) {
    return run(q, false, std::nullopt, DedupMode::inference, 0);
}

LinkTrace Pipeline::link_annotated(const AnnotatedMention& mention, DedupMode mode,
                                   uint64_t mention_seed) {
    return run(mention.query, true, mention.gold, mode, mention_seed);
}

LinkTrace Pipeline::run(const MentionQuery& q, bool has_gold,
                        const std::optional<ConceptId>& gold, DedupMode mode,
                        uint64_t mention_seed) {
    LinkTrace trace;
    trace.query = q;
    trace.has_gold = has_gold;
    trace.gold = gold;
    trace.alpha = config_.alpha;

    EmbeddingVector mention_vec = embedder_->embed_batch({q.mention}).front();
    EmbeddingVector query_vec = mention_vec;
    if (config_.genqr_enabled) {
        FeedbackResult feedback = generate_feedback(q, *llm_, config_.genqr_prompt);
        trace.feedback_text = feedback.text;
        trace.genqr_fallback = feedback.fell_back;
        EmbeddingVector feedback_vec = embedder_->embed_batch({feedback.text}).front();
        FusedQuery fused = fuse_query(mention_vec, feedback_vec, config_.alpha);
        trace.fuse_degenerate = fused.degenerate;
        query_vec = fused.vec;
    }

    trace.hits = index_->search(query_vec, config_.k);
    trace.candidates = dedup_by_concept(trace.hits, mode, mention_seed);
    bool shuffle =
        mode == DedupMode::training ? config_.training_shuffle : config_.shuffle_options;
    if (shuffle) {
        shuffle_candidates(trace.candidates, derive_seed(mention_seed, 0x0b71a7e5));
    }
    trace.options = build_options(trace.candidates);

    if (has_gold) {
        if (gold) {
            for (size_t i = 0; i < trace.candidates.size(); ++i) {
                if (trace.candidates.candidates[i].concept_id == *gold) {
                    trace.gold_letter = static_cast<char>('A' + i);
                    break;
                }
            }
            if (!trace.gold_letter) {
                trace.gold_letter = trace.options.none_letter;
                trace.gold_unretrieved = true;
            }
        } else {
            trace.gold_letter = trace.options.none_letter; // gold-NIL
        }
    }

    trace.prompt = build_prompt(q, trace.options);

    switch (config_.rerank_mode) {
        case RerankMode::setwise:
            trace.decision = select_setwise(trace.prompt, trace.options, trace.candidates, *llm_,
                                            trace.gold_letter);
            break;
        case RerankMode::pointwise:
            try {
                trace.pointwise_scores =
                    score_pointwise(q, trace.candidates, *llm_, config_.pointwise_prompt);
                trace.decision = decide_pointwise(trace.pointwise_scores,
                                                  config_.pointwise_threshold,
                                                  config_.nil_sensitive);
            } catch (const TransportError& e) {
                trace.decision = RerankDecision{};
                trace.decision.raw_answer = e.what();
                trace.decision.llm_error = true;
                if (auto top1 = trace.candidates.top1()) {
                    trace.decision.predicted = *top1;
                    trace.decision.fell_back = true;
                } else {
                    trace.decision.is_nil = true;
                }
            }
            break;
        case RerankMode::none:
            if (auto top1 = trace.candidates.top1()) {
                trace.decision.predicted = *top1;
            } else {
                trace.decision.is_nil = true;
            }
            trace.decision.raw_answer = "top1";
            break;
    }
    return trace;
}

EvalRunResult run_accuracy_pass(Pipeline& pipeline, const std::vector<AnnotatedMention>& mentions,
                                int workers) {
    EvalRunResult result;
    result.traces.resize(mentions.size());
    if (mentions.empty()) {
        result.report = summarize_outcomes({});
        return result;
    }

    int thread_count = workers;
    if (thread_count < 1) {
        thread_count = static_cast<int>(std::thread::hardware_concurrency());
    }
    thread_count = std::max(1, std::min<int>(thread_count, static_cast<int>(mentions.size())));

    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= mentions.size()) {
                return;
            }
            try {
                result.traces[i] = pipeline.link_annotated(mentions[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(thread_count));
        for (int i = 0; i < thread_count; ++i) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }

    std::vector<EvalOutcome> outcomes;
    outcomes.reserve(mentions.size());
    size_t gold_missing = 0;
    for (size_t i = 0; i < mentions.size(); ++i) {
        const LinkTrace& trace = result.traces[i];
        EvalOutcome outcome =
            score_outcome(trace.decision, mentions[i].gold, trace.candidates.top1());
        outcome.mention_idx = i;
        if (mentions[i].gold && !pipeline.kb().contains(*mentions[i].gold)) {
            ++gold_missing;
        }
        outcomes.push_back(std::move(outcome));
    }
    result.report = summarize_outcomes(std::move(outcomes));
    result.report.gold_missing_from_kb = gold_missing;
    return result;
}

double run_throughput_pass(Pipeline& pipeline, const std::vector<AnnotatedMention>& mentions,
                           size_t warmup) {
    return measure_throughput(
        [&pipeline](const AnnotatedMention& mention) { pipeline.link_annotated(mention); },
        mentions, warmup);
}

} // namespace belink
