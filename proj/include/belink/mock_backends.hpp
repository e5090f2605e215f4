#pragma once

#include "belink/embedding.hpp"
#include "belink/llm_client.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace belink {

// Pure function of (text, dim, seed): seeded hash of the text expanded into a
// pseudorandom unit vector. Stable across platforms (FNV-1a + splitmix64, no
// std::hash).
EmbeddingVector mock_embed(const std::string& text, size_t dim, uint64_t seed);

class MockEmbeddingProvider : public EmbeddingProvider {
public:
    MockEmbeddingProvider(size_t dim, uint64_t seed, std::string model_name = "mock-embed")
        : dim_(dim), seed_(seed), model_name_(std::move(model_name)) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    const std::string& model_name() const override { return model_name_; }

    size_t batches_served() const { return batches_served_; }
    size_t texts_served() const { return texts_served_; }

private:
    size_t dim_;
    uint64_t seed_;
    std::string model_name_;
    std::atomic<size_t> batches_served_{0};
    std::atomic<size_t> texts_served_{0};
};

// Deterministic LLM stand-in. `behavior` fully determines outputs given
// inputs; gold letters arrive out-of-band via LlmRequest::oracle_gold_letter
// so oracle tests measure pipeline plumbing, not mock intelligence.
struct OracleSpec {
    enum class Behavior {
        always_gold, // answer the gold letter when supplied, else the None letter
        always_none, // answer the None letter parsed from the prompt itself
        fixed_reply, // answer `reply` verbatim
        canned_map,  // first matching prompt substring in `canned` wins
    };

    Behavior behavior = Behavior::always_gold;
    std::string reply;
    std::map<std::string, std::string> canned;
    std::string default_reply;

    // yes/no probabilities for logprobs requests (point-wise re-ranking)
    std::map<std::string, double> yes_prob_by_substring;
    double default_yes_prob = 0.1;

    std::chrono::milliseconds delay{0}; // injected before answering
    int fail_first = 0;                 // first N calls raise TransportError
    bool fail_all = false;
};

// Extracts the letter of the trailing "X: None of the above." option line.
// Parsing the rendered prompt keeps template and parser co-consistent: a
// template change that breaks one breaks the mock tests too.
char parse_none_letter(const std::string& prompt);

class MockLlm : public LlmClient {
public:
    explicit MockLlm(OracleSpec spec) : spec_(std::move(spec)) {}

    LlmResult complete(const LlmRequest& request) override;

    size_t calls() const { return calls_; }
    int max_inflight() const { return max_inflight_; }
    void reset_counters();

private:
    std::string answer_for(const std::string& prompt, const LlmRequest& request) const;

    OracleSpec spec_;
    std::atomic<size_t> calls_{0};
    std::atomic<int> inflight_{0};
    std::atomic<int> max_inflight_{0};
};

// The same mocks behind a local OpenAI-compatible HTTP server, so the real
// HTTP clients are exercised in tests. Listens on an ephemeral 127.0.0.1 port.
class MockHttpServer {
public:
    MockHttpServer(size_t embed_dim, uint64_t embed_seed, OracleSpec llm_spec);
    ~MockHttpServer();

    MockHttpServer(const MockHttpServer&) = delete;
    MockHttpServer& operator=(const MockHttpServer&) = delete;

    std::string endpoint_url() const; // http://127.0.0.1:<port>
    size_t requests_served() const;

    // Respond 500 to the next N requests (retry-path testing).
    void fail_next(int n);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace belink
