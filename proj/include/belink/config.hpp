#pragma once

#include "belink/embedding.hpp"
#include "belink/kb.hpp"
#include "belink/llm_client.hpp"

#include <cstdint>
#include <string>

namespace belink {

enum class RerankMode { setwise, pointwise, none };

RerankMode rerank_mode_from_string(const std::string& name);
std::string to_string(RerankMode mode);

// Offline stand-in backends; the whole pipeline runs without any service.
struct MockBackendConfig {
    bool enabled = false;
    size_t embed_dim = 64;
    uint64_t embed_seed = 42;
    // always_gold | always_none | fixed:<reply> | canned
    std::string llm_behavior = "always_gold";
    double llm_delay_ms = 0.0;
    double default_yes_prob = 0.1;
};

struct PipelineConfig {
    std::string kb_path;
    std::string kb_format = "auto"; // auto | jsonl | tsv
    std::string dataset_path;
    std::string index_path;
    std::string cache_path;

    EmbeddingProviderConfig embedding;
    LlmProviderConfig llm;

    int k = 20;
    double alpha = 0.6;
    bool genqr_enabled = true;
    RerankMode rerank_mode = RerankMode::setwise;
    bool nil_sensitive = false;
    double pointwise_threshold = 0.5;
    uint64_t seed = 0;
    int max_inflight = 8;
    size_t throughput_warmup = 5;

    // ablation knob: shuffle option order at inference (off) / training (on)
    bool shuffle_options = false;
    bool training_shuffle = true;

    // overridable prompt texts; {m} = mention, {T} = context, {alias} = candidate
    std::string genqr_prompt =
        "What is the standard scientific name for the biomedical entity '{m}' as used in "
        "'{T}'? Answer with the name only.";
    std::string pointwise_prompt =
        "Does '{alias}' denote the same biomedical concept as '{m}' in context '{T}'? "
        "Answer yes or no.";

    MockBackendConfig mock;

    KbFormat resolved_kb_format() const;
};

PipelineConfig load_config(const std::string& path);

// Effective-config echo embedded in every output artifact.
std::string config_to_json(const PipelineConfig& config);

} // namespace belink
