#include "belink/mock_backends.hpp"

#include "belink/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <sstream>
#include <thread>

namespace belink {

using nlohmann::json;

namespace {

uint64_t fnv1a64(const std::string& text) {
    uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

EmbeddingVector mock_embed(const std::string& text, size_t dim, uint64_t seed) {
    if (dim == 0) {
        throw ContractError("mock_embed: dim must be positive");
    }
    uint64_t state = fnv1a64(text) ^ (seed * 0x9E3779B97F4A7C15ULL + 0x165667B19E3779F9ULL);
    EmbeddingVector v;
    v.values.resize(dim);
    for (size_t i = 0; i < dim; ++i) {
        // 53 random bits -> [0,1) -> [-1,1)
        double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        v.values[i] = 2.0 * u - 1.0;
    }
    return normalize(v);
}

std::vector<EmbeddingVector> MockEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw ContractError("embed_batch: empty text list");
    }
    ++batches_served_;
    texts_served_ += texts.size();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (text.empty()) {
            throw ContractError("embed_batch: empty text");
        }
        out.push_back(mock_embed(text, dim_, seed_));
    }
    return out;
}

// ---------------------------------------------------------------------------
// MockLlm

char parse_none_letter(const std::string& prompt) {
    static const std::string suffix = ": None of the above.";
    char letter = 0;
    std::istringstream lines(prompt);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.size() == 1 + suffix.size() && line.compare(1, suffix.size(), suffix) == 0 &&
            line[0] >= 'A' && line[0] <= 'Z') {
            letter = line[0]; // keep the last such line
        }
    }
    if (letter == 0) {
        throw ProtocolError("mock llm: prompt has no 'None of the above.' option line");
    }
    return letter;
}

void MockLlm::reset_counters() {
    calls_ = 0;
    max_inflight_ = 0;
}

std::string MockLlm::answer_for(const std::string& prompt, const LlmRequest& request) const {
    switch (spec_.behavior) {
        case OracleSpec::Behavior::always_gold:
            if (request.oracle_gold_letter) {
                return std::string(1, *request.oracle_gold_letter);
            }
            return std::string(1, parse_none_letter(prompt));
        case OracleSpec::Behavior::always_none:
            return std::string(1, parse_none_letter(prompt));
        case OracleSpec::Behavior::fixed_reply:
            return spec_.reply;
        case OracleSpec::Behavior::canned_map:
            for (const auto& [needle, reply] : spec_.canned) {
                if (prompt.find(needle) != std::string::npos) {
                    return reply;
                }
            }
            return spec_.default_reply;
    }
    return spec_.default_reply;
}

LlmResult MockLlm::complete(const LlmRequest& request) {
    size_t call_index = calls_.fetch_add(1);
    int now = inflight_.fetch_add(1) + 1;
    int seen = max_inflight_.load();
    while (now > seen && !max_inflight_.compare_exchange_weak(seen, now)) {
    }

    struct Depart {
        std::atomic<int>& counter;
        ~Depart() { counter.fetch_sub(1); }
    } depart{inflight_};

    if (spec_.delay.count() > 0) {
        std::this_thread::sleep_for(spec_.delay);
    }
    if (spec_.fail_all || static_cast<int>(call_index) < spec_.fail_first) {
        throw TransportError("mock llm: injected failure");
    }

    std::string prompt = request.raw_prompt;
    if (prompt.empty()) {
        for (const auto& m : request.messages) {
            prompt += m.content;
            prompt += '\n';
        }
        prompt += request.assistant_prefix;
    }

    LlmResult result;
    if (request.want_logprobs) {
        double p = spec_.default_yes_prob;
        for (const auto& [needle, prob] : spec_.yes_prob_by_substring) {
            if (prompt.find(needle) != std::string::npos) {
                p = prob;
                break;
            }
        }
        p = std::min(std::max(p, 1e-9), 1.0 - 1e-9);
        result.text = p >= 0.5 ? "yes" : "no";
        result.top_logprobs["yes"] = std::log(p);
        result.top_logprobs["no"] = std::log(1.0 - p);
    } else {
        result.text = answer_for(prompt, request);
    }
    return result;
}

// ---------------------------------------------------------------------------
// MockHttpServer

struct MockHttpServer::Impl {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    size_t embed_dim;
    uint64_t embed_seed;
    MockLlm llm;
    std::atomic<size_t> requests{0};
    std::atomic<int> fail_next{0};

    Impl(size_t dim, uint64_t seed, OracleSpec spec)
        : embed_dim(dim), embed_seed(seed), llm(std::move(spec)) {}

    bool maybe_fail(httplib::Response& res) {
        int pending = fail_next.load();
        while (pending > 0 && !fail_next.compare_exchange_weak(pending, pending - 1)) {
        }
        if (pending > 0) {
            res.status = 500;
            res.set_content("injected failure", "text/plain");
            return true;
        }
        return false;
    }
};

MockHttpServer::MockHttpServer(size_t embed_dim, uint64_t embed_seed, OracleSpec llm_spec)
    : impl_(std::make_unique<Impl>(embed_dim, embed_seed, std::move(llm_spec))) {
    Impl* impl = impl_.get();

    impl->server.Post("/embeddings", [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->requests;
        if (impl->maybe_fail(res)) {
            return;
        }
        json body = json::parse(req.body);
        json data = json::array();
        size_t index = 0;
        for (const auto& text : body["input"]) {
            EmbeddingVector v = mock_embed(text.get<std::string>(), impl->embed_dim,
                                           impl->embed_seed);
            data.push_back({{"index", index++}, {"embedding", v.values}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });

    impl->server.Post("/chat/completions",
                      [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->requests;
        if (impl->maybe_fail(res)) {
            return;
        }
        json body = json::parse(req.body);
        LlmRequest request;
        for (const auto& m : body["messages"]) {
            std::string role = m["role"].get<std::string>();
            std::string content = m["content"].get<std::string>();
            if (role == "assistant") {
                request.assistant_prefix = content;
            } else {
                request.messages.push_back({role, content});
            }
        }
        request.want_logprobs = body.value("logprobs", false);
        LlmResult result = impl->llm.complete(request);
        json choice = {{"message", {{"role", "assistant"}, {"content", result.text}}}};
        if (request.want_logprobs) {
            json tops = json::array();
            for (const auto& [token, logprob] : result.top_logprobs) {
                tops.push_back({{"token", token}, {"logprob", logprob}});
            }
            choice["logprobs"] = {
                {"content", json::array({{{"token", result.text}, {"logprob", 0.0},
                                          {"top_logprobs", tops}}})}};
        }
        res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });

    impl->server.Post("/completions", [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->requests;
        if (impl->maybe_fail(res)) {
            return;
        }
        json body = json::parse(req.body);
        LlmRequest request;
        request.raw_prompt = body["prompt"].get<std::string>();
        request.want_logprobs = body.contains("logprobs") && !body["logprobs"].is_null() &&
                                body["logprobs"].is_number() &&
                                body["logprobs"].get<int>() > 0;
        LlmResult result = impl->llm.complete(request);
        json choice = {{"text", result.text}};
        if (request.want_logprobs) {
            json tops = json::object();
            for (const auto& [token, logprob] : result.top_logprobs) {
                tops[token] = logprob;
            }
            choice["logprobs"] = {{"top_logprobs", json::array({tops})}};
        }
        res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
    });

    impl->port = impl->server.bind_to_any_port("127.0.0.1");
    impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
    impl->server.wait_until_ready();
}

MockHttpServer::~MockHttpServer() {
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

std::string MockHttpServer::endpoint_url() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port);
}

size_t MockHttpServer::requests_served() const {
    return impl_->requests.load();
}

void MockHttpServer::fail_next(int n) {
    impl_->fail_next = n;
}

} // namespace belink
