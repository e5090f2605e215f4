#pragma once

#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace belink {

// Dense vector; 64-bit components, unit-normalized at every provider boundary
// so cosine similarity reduces to a dot product downstream.
struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector& other) const { return values == other.values; }
};

double l2_norm(const EmbeddingVector& v);
double dot(const EmbeddingVector& a, const EmbeddingVector& b);

// Vectors already unit within 1e-9 are returned unchanged, which makes
// normalize exactly idempotent. Throws ContractError on a zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

struct EmbeddingProviderConfig {
    std::string endpoint_url;
    std::string model_name;
    int batch_size = 64;
    int timeout_ms = 30000;
    int retries = 2;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // One unit-normalized vector per text, in request order, all same dim.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

    virtual const std::string& model_name() const = 0;
};

// Remote OpenAI-compatible embeddings endpoint:
// POST {endpoint}/embeddings {"model":..., "input":[...]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(EmbeddingProviderConfig config);
    ~HttpEmbeddingProvider() override;

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    const std::string& model_name() const override { return config_.model_name; }

    size_t batches_sent() const { return batches_sent_; }

private:
    std::vector<EmbeddingVector> request_one_batch(const std::vector<std::string>& texts);

    EmbeddingProviderConfig config_;
    std::string host_;      // scheme://host:port
    std::string path_base_; // optional path prefix from endpoint_url
    size_t batches_sent_ = 0;
};

// Append-only binary record file:
//   key_len: u32 LE | key bytes | dim: u32 LE | dim x f32 LE
// key = model_name + '\0' + text. A corrupt tail is truncated with a warning;
// the affected entries are recomputed on demand.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string path);

    bool lookup(const std::string& key, std::vector<float>& out) const;
    void append(const std::string& key, const std::vector<float>& row);
    size_t size() const { return entries_.size(); }

    const std::string& path() const { return path_; }

private:
    void load();
    std::ofstream& appender();

    std::string path_;
    std::unordered_map<std::string, std::vector<float>> entries_;
    std::ofstream append_stream_;
};

// Provider wrapper with a persistent cache. Stored precision is f32; both the
// cold and the warm path renormalize from the stored bits, so repeat calls are
// bit-identical. Within one process the same key is never computed twice, even
// under concurrent callers.
class CachedEmbedder : public EmbeddingProvider {
public:
    CachedEmbedder(std::shared_ptr<EmbeddingProvider> provider, std::string cache_path);

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    const std::string& model_name() const override { return provider_->model_name(); }

    EmbeddingVector embed_one(const std::string& text);

private:
    std::string make_key(const std::string& text) const;

    std::shared_ptr<EmbeddingProvider> provider_;
    EmbeddingCache cache_;
    std::mutex mutex_;
    std::condition_variable resolved_;
    std::unordered_set<std::string> in_flight_;
};

} // namespace belink
