#include "belink/embedding.hpp"

#include "belink/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace belink {

double l2_norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (double x : v.values) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw ContractError("dot: dimension mismatch");
    }
    double sum = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        sum += a.values[i] * b.values[i];
    }
    return sum;
}

EmbeddingVector normalize(const EmbeddingVector& v) {
    double norm = l2_norm(v);
    if (norm == 0.0) {
        throw ContractError("normalize: zero vector");
    }
    if (std::fabs(norm - 1.0) <= 1e-9) {
        return v; // already unit: keep bits, keep idempotence exact
    }
    EmbeddingVector out = v;
    for (double& x : out.values) {
        x /= norm;
    }
    return out;
}

// ---------------------------------------------------------------------------
// EmbeddingCache

namespace {

constexpr uint32_t kMaxKeyLen = 1u << 20;
constexpr uint32_t kMaxDim = 1u << 20;

template <typename T>
bool read_pod(std::istream& in, T& out) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) {
        return false;
    }
    std::memcpy(&out, buf, sizeof(T));
    return true;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

} // namespace

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
    load();
}

namespace {

enum class RecordRead { ok, eof, corrupt };

RecordRead read_record(std::istream& in, std::string& key, std::vector<float>& row) {
    uint32_t key_len = 0;
    if (!read_pod(in, key_len)) {
        return RecordRead::eof;
    }
    if (key_len == 0 || key_len > kMaxKeyLen) {
        return RecordRead::corrupt;
    }
    key.assign(key_len, '\0');
    if (!in.read(key.data(), key_len)) {
        return RecordRead::corrupt;
    }
    uint32_t dim = 0;
    if (!read_pod(in, dim) || dim == 0 || dim > kMaxDim) {
        return RecordRead::corrupt;
    }
    row.assign(dim, 0.0f);
    return in.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(sizeof(float) * dim))
               ? RecordRead::ok
               : RecordRead::corrupt;
}

} // namespace

void EmbeddingCache::load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        return; // no cache yet
    }
    uint64_t good_offset = 0;
    std::string key;
    std::vector<float> row;
    while (true) {
        RecordRead status = read_record(in, key, row);
        if (status == RecordRead::eof) {
            return;
        }
        if (status == RecordRead::corrupt) {
            std::fprintf(stderr,
                         "warning: corrupt cache record in %s at offset %llu; truncating tail\n",
                         path_.c_str(), static_cast<unsigned long long>(good_offset));
            in.close();
            std::error_code ec;
            std::filesystem::resize_file(path_, good_offset, ec);
            return;
        }
        bool finite = true;
        for (float x : row) {
            if (!std::isfinite(x)) {
                finite = false;
                break;
            }
        }
        if (finite) {
            entries_[key] = row;
        } else {
            std::fprintf(stderr, "warning: discarding non-finite cache entry in %s\n",
                         path_.c_str());
        }
        good_offset = static_cast<uint64_t>(in.tellg());
    }
}

bool EmbeddingCache::lookup(const std::string& key, std::vector<float>& out) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return false;
    }
    out = it->second;
    return true;
}

std::ofstream& EmbeddingCache::appender() {
    if (!append_stream_.is_open()) {
        append_stream_.open(path_, std::ios::binary | std::ios::app);
        if (!append_stream_) {
            throw std::runtime_error("cannot open cache file for append: " + path_);
        }
    }
    return append_stream_;
}

void EmbeddingCache::append(const std::string& key, const std::vector<float>& row) {
    std::ofstream& out = appender();
    write_pod(out, static_cast<uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    write_pod(out, static_cast<uint32_t>(row.size()));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(float) * row.size()));
    out.flush();
    entries_[key] = row;
}

// ---------------------------------------------------------------------------
// CachedEmbedder

namespace {

std::vector<float> to_f32(const EmbeddingVector& v) {
    std::vector<float> row(v.values.size());
    for (size_t i = 0; i < row.size(); ++i) {
        row[i] = static_cast<float>(v.values[i]);
    }
    return row;
}

EmbeddingVector from_f32(const std::vector<float>& row) {
    EmbeddingVector v;
    v.values.assign(row.begin(), row.end());
    return normalize(v);
}

} // namespace

CachedEmbedder::CachedEmbedder(std::shared_ptr<EmbeddingProvider> provider, std::string cache_path)
    : provider_(std::move(provider)), cache_(std::move(cache_path)) {}

std::string CachedEmbedder::make_key(const std::string& text) const {
    return provider_->model_name() + '\0' + text;
}

std::vector<EmbeddingVector> CachedEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> results(texts.size());
    std::vector<bool> resolved(texts.size(), false);
    size_t pending = texts.size();

    while (pending > 0) {
        std::vector<size_t> to_compute;
        std::vector<std::string> claimed_keys;
        bool waiting = false;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            for (size_t i = 0; i < texts.size(); ++i) {
                if (resolved[i]) {
                    continue;
                }
                std::string key = make_key(texts[i]);
                std::vector<float> row;
                if (cache_.lookup(key, row)) {
                    results[i] = from_f32(row);
                    resolved[i] = true;
                    --pending;
                } else if (in_flight_.count(key)) {
                    waiting = true; // someone else is computing this key
                } else {
                    in_flight_.insert(key);
                    claimed_keys.push_back(key);
                    to_compute.push_back(i);
                }
            }
            if (to_compute.empty() && pending > 0) {
                if (waiting) {
                    resolved_.wait(lock);
                }
                continue;
            }
        }
        if (to_compute.empty()) {
            continue;
        }

        std::vector<std::string> batch_texts;
        batch_texts.reserve(to_compute.size());
        for (size_t i : to_compute) {
            batch_texts.push_back(texts[i]);
        }
        std::vector<EmbeddingVector> fresh;
        try {
            fresh = provider_->embed_batch(batch_texts);
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            for (const auto& key : claimed_keys) {
                in_flight_.erase(key);
            }
            resolved_.notify_all();
            throw;
        }
        if (fresh.size() != to_compute.size()) {
            std::lock_guard<std::mutex> lock(mutex_);
            for (const auto& key : claimed_keys) {
                in_flight_.erase(key);
            }
            resolved_.notify_all();
            throw ProtocolError("embedding provider returned wrong vector count");
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            for (size_t j = 0; j < to_compute.size(); ++j) {
                size_t i = to_compute[j];
                std::vector<float> row = to_f32(fresh[j]);
                cache_.append(claimed_keys[j], row);
                in_flight_.erase(claimed_keys[j]);
                results[i] = from_f32(row);
                resolved[i] = true;
                --pending;
            }
            resolved_.notify_all();
        }
    }
    return results;
}

EmbeddingVector CachedEmbedder::embed_one(const std::string& text) {
    return embed_batch({text}).front();
}

} // namespace belink
