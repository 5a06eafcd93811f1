#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trialscreen {

/// Dense vector with unit L2 norm. Normalization happens at construction.
class EmbeddingVector {
public:
    /// Normalizes `raw`. An all-zero vector becomes the basis vector e_0.
    /// Throws std::invalid_argument for empty or non-finite input.
    static EmbeddingVector normalized(std::span<const double> raw);
    static EmbeddingVector normalized(std::span<const float> raw);

    /// Adopts values that are already unit-norm (within 1e-4), e.g. when
    /// reading a saved index. Throws std::invalid_argument otherwise.
    static EmbeddingVector from_unit(std::vector<float> values);

    std::size_t dims() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}
    std::vector<float> values_;
};

/// Dot product of two unit vectors, clamped to [-1, 1].
/// Throws std::invalid_argument on a dims mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double dot(std::span<const float> a, std::span<const float> b) noexcept;

enum class EmbedderBackend { Remote, HashedNGram };

/// Wire shape spoken to a remote embedding service.
enum class EmbedAdapter {
    Native,  // POST {url}/embed {"model","inputs"} -> {"vectors"}
    OpenAI,  // POST {url}/v1/embeddings {"model","input"} -> {"data":[{"index","embedding"}]}
};

struct EmbedderConfig {
    EmbedderBackend backend = EmbedderBackend::HashedNGram;
    std::string model_id;
    std::string endpoint_url;
    EmbedAdapter adapter = EmbedAdapter::Native;
    std::size_t dims = 256;
    std::size_t batch_size = 32;
    int timeout_ms = 30000;
    int max_retries = 3;
    int initial_backoff_ms = 200;
    std::size_t parallelism = 4;

    void validate() const;
    /// Identifies the vector space, e.g. "hashed-ngram:dims=256" or "remote:BAAI/bge-small-en-v1.5".
    std::string fingerprint() const;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    /// One vector per input, in input order.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
    virtual std::string fingerprint() const = 0;
};

/// Lowercased character 3-grams hashed by FNV-1a into `dims` signed buckets.
class HashedNGramEmbedder final : public Embedder {
public:
    explicit HashedNGramEmbedder(std::size_t dims = 256);

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
    EmbeddingVector embed_one(std::string_view text) const;
    std::string fingerprint() const override;
    std::size_t dims() const noexcept { return dims_; }

private:
    std::size_t dims_;
};

/// HTTP client for an embedding service; batches are sent concurrently up to
/// `parallelism` and reassembled by batch index.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderConfig config);

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
    std::string fingerprint() const override;

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
    EmbedderConfig config_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

/// Convenience wrapper matching the config-driven entry point.
std::vector<EmbeddingVector> embed_texts(const EmbedderConfig& config, std::span<const std::string> texts);

}  // namespace trialscreen
