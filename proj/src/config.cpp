#include "belink/config.hpp"

#include "belink/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace belink {

using nlohmann::ordered_json;

RerankMode rerank_mode_from_string(const std::string& name) {
    if (name == "setwise") {
        return RerankMode::setwise;
    }
    if (name == "pointwise") {
        return RerankMode::pointwise;
    }
    if (name == "none") {
        return RerankMode::none;
    }
    throw ContractError("unknown rerank mode: " + name);
}

std::string to_string(RerankMode mode) {
    switch (mode) {
        case RerankMode::setwise:
            return "setwise";
        case RerankMode::pointwise:
            return "pointwise";
        case RerankMode::none:
            return "none";
    }
    return "setwise";
}

KbFormat PipelineConfig::resolved_kb_format() const {
    if (kb_format == "jsonl") {
        return KbFormat::jsonl;
    }
    if (kb_format == "tsv") {
        return KbFormat::two_column_tsv;
    }
    if (kb_format == "auto") {
        if (kb_path.size() >= 4 && kb_path.substr(kb_path.size() - 4) == ".tsv") {
            return KbFormat::two_column_tsv;
        }
        return KbFormat::jsonl;
    }
    throw ContractError("unknown kb format: " + kb_format);
}

namespace {

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        out = obj[key].get<T>();
    }
}

} // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file: " + path);
    }
    ordered_json obj;
    try {
        obj = ordered_json::parse(in);
    } catch (const ordered_json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }

    PipelineConfig config;
    read_field(obj, "kb_path", config.kb_path);
    read_field(obj, "kb_format", config.kb_format);
    read_field(obj, "dataset_path", config.dataset_path);
    read_field(obj, "index_path", config.index_path);
    read_field(obj, "cache_path", config.cache_path);
    read_field(obj, "k", config.k);
    read_field(obj, "alpha", config.alpha);
    read_field(obj, "genqr_enabled", config.genqr_enabled);
    if (obj.contains("rerank_mode")) {
        config.rerank_mode = rerank_mode_from_string(obj["rerank_mode"].get<std::string>());
    }
    read_field(obj, "nil_sensitive", config.nil_sensitive);
    read_field(obj, "pointwise_threshold", config.pointwise_threshold);
    read_field(obj, "seed", config.seed);
    read_field(obj, "max_inflight", config.max_inflight);
    read_field(obj, "throughput_warmup", config.throughput_warmup);
    read_field(obj, "shuffle_options", config.shuffle_options);
    read_field(obj, "training_shuffle", config.training_shuffle);
    read_field(obj, "genqr_prompt", config.genqr_prompt);
    read_field(obj, "pointwise_prompt", config.pointwise_prompt);

    if (obj.contains("embedding")) {
        const auto& e = obj["embedding"];
        read_field(e, "endpoint_url", config.embedding.endpoint_url);
        read_field(e, "model_name", config.embedding.model_name);
        read_field(e, "batch_size", config.embedding.batch_size);
        read_field(e, "timeout_ms", config.embedding.timeout_ms);
        read_field(e, "retries", config.embedding.retries);
    }
    if (obj.contains("llm")) {
        const auto& l = obj["llm"];
        read_field(l, "endpoint_url", config.llm.endpoint_url);
        read_field(l, "model_name", config.llm.model_name);
        if (l.contains("mode")) {
            std::string mode = l["mode"].get<std::string>();
            if (mode == "chat") {
                config.llm.mode = LlmApiMode::chat;
            } else if (mode == "raw") {
                config.llm.mode = LlmApiMode::raw;
            } else {
                throw ContractError("unknown llm mode: " + mode);
            }
        }
        read_field(l, "timeout_ms", config.llm.timeout_ms);
        read_field(l, "retries", config.llm.retries);
        read_field(l, "top_logprobs", config.llm.top_logprobs);
    }
    if (obj.contains("mock")) {
        const auto& m = obj["mock"];
        read_field(m, "enabled", config.mock.enabled);
        read_field(m, "embed_dim", config.mock.embed_dim);
        read_field(m, "embed_seed", config.mock.embed_seed);
        read_field(m, "llm_behavior", config.mock.llm_behavior);
        read_field(m, "llm_delay_ms", config.mock.llm_delay_ms);
        read_field(m, "default_yes_prob", config.mock.default_yes_prob);
    }

    if (config.k < 1) {
        throw ContractError("config: k must be >= 1");
    }
    if (config.alpha < 0.0 || config.alpha > 1.0) {
        throw ContractError("config: alpha must be within [0,1]");
    }
    return config;
}

std::string config_to_json(const PipelineConfig& config) {
    ordered_json obj;
    obj["kb_path"] = config.kb_path;
    obj["kb_format"] = config.kb_format;
    obj["dataset_path"] = config.dataset_path;
    obj["index_path"] = config.index_path;
    obj["cache_path"] = config.cache_path;
    obj["k"] = config.k;
    obj["alpha"] = config.alpha;
    obj["genqr_enabled"] = config.genqr_enabled;
    obj["rerank_mode"] = to_string(config.rerank_mode);
    obj["nil_sensitive"] = config.nil_sensitive;
    obj["pointwise_threshold"] = config.pointwise_threshold;
    obj["seed"] = config.seed;
    obj["max_inflight"] = config.max_inflight;
    obj["throughput_warmup"] = config.throughput_warmup;
    obj["shuffle_options"] = config.shuffle_options;
    obj["training_shuffle"] = config.training_shuffle;
    obj["genqr_prompt"] = config.genqr_prompt;
    obj["pointwise_prompt"] = config.pointwise_prompt;
    obj["embedding"] = {{"endpoint_url", config.embedding.endpoint_url},
                        {"model_name", config.embedding.model_name},
                        {"batch_size", config.embedding.batch_size},
                        {"timeout_ms", config.embedding.timeout_ms},
                        {"retries", config.embedding.retries}};
    obj["llm"] = {{"endpoint_url", config.llm.endpoint_url},
                  {"model_name", config.llm.model_name},
                  {"mode", config.llm.mode == LlmApiMode::chat ? "chat" : "raw"},
                  {"timeout_ms", config.llm.timeout_ms},
                  {"retries", config.llm.retries},
                  {"top_logprobs", config.llm.top_logprobs}};
    obj["mock"] = {{"enabled", config.mock.enabled},
                   {"embed_dim", config.mock.embed_dim},
                   {"embed_seed", config.mock.embed_seed},
                   {"llm_behavior", config.mock.llm_behavior},
                   {"llm_delay_ms", config.mock.llm_delay_ms},
                   {"default_yes_prob", config.mock.default_yes_prob}};
    return obj.dump(2);
}

} // namespace belink
