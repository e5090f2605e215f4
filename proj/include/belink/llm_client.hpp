#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace belink {

struct LlmMessage {
    std::string role;
    std::string content;
};

// A single-turn completion request. Chat backends get `messages` plus the
// fixed assistant prefix as a partial final message; raw-completion backends
// get `raw_prompt` verbatim.
struct LlmRequest {
    std::vector<LlmMessage> messages;
    std::string assistant_prefix;
    std::string raw_prompt;
    int max_tokens = 1;
    double temperature = 0.0;
    bool want_logprobs = false;

    // Out-of-band gold letter, consumed only by oracle mocks. Real clients
    // ignore it; it never reaches the wire.
    std::optional<char> oracle_gold_letter;
};

struct LlmResult {
    std::string text;
    // token -> logprob at the answer position, when requested and available
    std::map<std::string, double> top_logprobs;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResult complete(const LlmRequest& request) = 0;
};

enum class LlmApiMode { chat, raw };

struct LlmProviderConfig {
    std::string endpoint_url;
    std::string model_name;
    LlmApiMode mode = LlmApiMode::chat;
    int timeout_ms = 60000;
    int retries = 2;
    int top_logprobs = 8;
};

// POST {endpoint}/chat/completions or {endpoint}/completions, OpenAI shape.
class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(LlmProviderConfig config);

    LlmResult complete(const LlmRequest& request) override;

private:
    LlmProviderConfig config_;
    std::string host_;
    std::string path_base_;
};

// Caps the number of backend calls in flight across the whole process.
class InflightLimiter {
public:
    explicit InflightLimiter(int limit);

    class Ticket {
    public:
        explicit Ticket(InflightLimiter* owner) : owner_(owner) {}
        ~Ticket();
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;
        Ticket(Ticket&& other) noexcept : owner_(other.owner_) { other.owner_ = nullptr; }

    private:
        InflightLimiter* owner_;
    };

    Ticket acquire();
    int max_seen() const;

private:
    void release();

    mutable std::mutex mutex_;
    std::condition_variable slot_freed_;
    int limit_;
    int in_flight_ = 0;
    int max_seen_ = 0;
};

// Splits "http://host:port/prefix" into client base and path prefix.
void split_endpoint(const std::string& url, std::string& host, std::string& path_base);

} // namespace belink
