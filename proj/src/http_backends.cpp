#include "belink/embedding.hpp"
#include "belink/errors.hpp"
#include "belink/llm_client.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <thread>

namespace belink {

using nlohmann::json;

void split_endpoint(const std::string& url, std::string& host, std::string& path_base) {
    auto scheme_end = url.find("://");
    size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        host = url;
        path_base.clear();
    } else {
        host = url.substr(0, path_start);
        path_base = url.substr(path_start);
    }
    while (!path_base.empty() && path_base.back() == '/') {
        path_base.pop_back();
    }
}

namespace {

// POSTs JSON with bounded retries on connection failures and 5xx responses.
json post_json(const std::string& host, const std::string& path, const json& body, int timeout_ms,
               int retries, const char* what) {
    std::string payload = body.dump();
    for (int attempt = 0; attempt <= retries; ++attempt) {
        httplib::Client client(host);
        client.set_connection_timeout(0, timeout_ms * 1000LL);
        client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
        auto res = client.Post(path, payload, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw ProtocolError(std::string(what) + ": invalid JSON response: " + e.what());
            }
        }
        if (res && res->status >= 400 && res->status < 500) {
            throw ProtocolError(std::string(what) + ": HTTP " + std::to_string(res->status) +
                                ": " + res->body);
        }
        if (attempt < retries) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * (attempt + 1)));
        }
    }
    throw TransportError(std::string(what) + ": backend unreachable after " +
                         std::to_string(retries + 1) + " attempts: " + host + path);
}

} // namespace

// ---------------------------------------------------------------------------
// HttpEmbeddingProvider

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingProviderConfig config)
    : config_(std::move(config)) {
    split_endpoint(config_.endpoint_url, host_, path_base_);
}

HttpEmbeddingProvider::~HttpEmbeddingProvider() = default;

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw ContractError("embed_batch: empty text list");
    }
    for (const auto& text : texts) {
        if (text.empty()) {
            throw ContractError("embed_batch: empty text");
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    size_t batch = static_cast<size_t>(std::max(1, config_.batch_size));
    for (size_t start = 0; start < texts.size(); start += batch) {
        size_t end = std::min(texts.size(), start + batch);
        std::vector<std::string> chunk(texts.begin() + static_cast<ptrdiff_t>(start),
                                       texts.begin() + static_cast<ptrdiff_t>(end));
        auto vectors = request_one_batch(chunk);
        for (auto& v : vectors) {
            out.push_back(std::move(v));
        }
    }
    for (const auto& v : out) {
        if (v.dim() != out.front().dim()) {
            throw ProtocolError("embedding dimension mismatch across batch");
        }
    }
    return out;
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::request_one_batch(
    const std::vector<std::string>& texts) {
    json body = {{"model", config_.model_name}, {"input", texts}};
    ++batches_sent_;
    json response = post_json(host_, path_base_ + "/embeddings", body, config_.timeout_ms,
                              config_.retries, "embeddings");
    try {
        if (!response.contains("data") || !response["data"].is_array() ||
            response["data"].size() != texts.size()) {
            throw ProtocolError("embeddings: response 'data' missing or wrong length");
        }
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        for (const auto& item : response["data"]) {
            if (!item.contains("index") || !item.contains("embedding")) {
                throw ProtocolError("embeddings: response item missing index/embedding");
            }
            size_t index = item["index"].get<size_t>();
            if (index >= texts.size() || seen[index]) {
                throw ProtocolError("embeddings: bad or duplicate index in response");
            }
            EmbeddingVector v;
            v.values = item["embedding"].get<std::vector<double>>();
            if (v.values.empty()) {
                throw ProtocolError("embeddings: empty vector in response");
            }
            for (double x : v.values) {
                if (!std::isfinite(x)) {
                    throw ProtocolError("embeddings: non-finite component in response");
                }
            }
            out[index] = normalize(v);
            seen[index] = true;
        }
        size_t dim = out.front().dim();
        for (const auto& v : out) {
            if (v.dim() != dim) {
                throw ProtocolError("embeddings: dimension mismatch within batch");
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embeddings: malformed response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// HttpLlmClient

namespace {
LlmResult parse_llm_response(const json& response, LlmApiMode mode);
} // namespace

HttpLlmClient::HttpLlmClient(LlmProviderConfig config) : config_(std::move(config)) {
    split_endpoint(config_.endpoint_url, host_, path_base_);
}

LlmResult HttpLlmClient::complete(const LlmRequest& request) {
    json body;
    std::string path;
    if (config_.mode == LlmApiMode::chat) {
        path = path_base_ + "/chat/completions";
        json messages = json::array();
        for (const auto& m : request.messages) {
            messages.push_back({{"role", m.role}, {"content", m.content}});
        }
        if (!request.assistant_prefix.empty()) {
            // partial assistant turn; the model continues from this prefix
            messages.push_back({{"role", "assistant"}, {"content", request.assistant_prefix}});
        }
        body = {{"model", config_.model_name},
                {"messages", messages},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
        if (request.want_logprobs) {
            body["logprobs"] = true;
            body["top_logprobs"] = config_.top_logprobs;
        }
    } else {
        path = path_base_ + "/completions";
        body = {{"model", config_.model_name},
                {"prompt", request.raw_prompt},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
        if (request.want_logprobs) {
            body["logprobs"] = config_.top_logprobs;
        }
    }

    json response =
        post_json(host_, path, body, config_.timeout_ms, config_.retries, "llm");
    try {
        return parse_llm_response(response, config_.mode);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("llm: malformed response: ") + e.what());
    }
}

namespace {

LlmResult parse_llm_response(const json& response, LlmApiMode mode) {
    if (!response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty()) {
        throw ProtocolError("llm: response has no choices");
    }
    const json& choice = response["choices"][0];
    LlmResult result;
    if (mode == LlmApiMode::chat) {
        if (!choice.contains("message") || !choice["message"].contains("content")) {
            throw ProtocolError("llm: chat choice missing message content");
        }
        result.text = choice["message"]["content"].get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array() &&
            !choice["logprobs"]["content"].empty()) {
            const json& first = choice["logprobs"]["content"][0];
            if (first.contains("top_logprobs")) {
                for (const auto& entry : first["top_logprobs"]) {
                    result.top_logprobs[entry["token"].get<std::string>()] =
                        entry["logprob"].get<double>();
                }
            }
        }
    } else {
        if (!choice.contains("text")) {
            throw ProtocolError("llm: completion choice missing text");
        }
        result.text = choice["text"].get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("top_logprobs") &&
            choice["logprobs"]["top_logprobs"].is_array() &&
            !choice["logprobs"]["top_logprobs"].empty()) {
            for (const auto& [token, logprob] :
                 choice["logprobs"]["top_logprobs"][0].items()) {
                result.top_logprobs[token] = logprob.get<double>();
            }
        }
    }
    return result;
}

} // namespace

// ---------------------------------------------------------------------------
// InflightLimiter

InflightLimiter::InflightLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

InflightLimiter::Ticket InflightLimiter::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    slot_freed_.wait(lock, [this] { return in_flight_ < limit_; });
    ++in_flight_;
    if (in_flight_ > max_seen_) {
        max_seen_ = in_flight_;
    }
    return Ticket(this);
}

void InflightLimiter::release() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
    }
    slot_freed_.notify_one();
}

int InflightLimiter::max_seen() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return max_seen_;
}

InflightLimiter::Ticket::~Ticket() {
    if (owner_) {
        owner_->release();
    }
}

} // namespace belink
