#include "trialscreen/embed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "parallel.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"

namespace trialscreen {

using nlohmann::json;

namespace {

template <typename T>
EmbeddingVector normalize_any(std::span<const T> raw, EmbeddingVector (*make)(std::vector<float>)) {
    if (raw.empty()) throw std::invalid_argument("embedding must have at least one dimension");
    double sq = 0.0;
    for (T v : raw) {
        if (!std::isfinite(static_cast<double>(v))) throw std::invalid_argument("embedding holds a non-finite value");
        sq += static_cast<double>(v) * static_cast<double>(v);
    }
    std::vector<float> values(raw.size(), 0.0f);
    if (sq == 0.0) {
        values[0] = 1.0f;
    } else {
        const double norm = std::sqrt(sq);
        for (std::size_t i = 0; i < raw.size(); ++i) values[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
    }
    return make(std::move(values));
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::span<const double> raw) {
    return normalize_any<double>(raw, [](std::vector<float> v) { return EmbeddingVector(std::move(v)); });
}

EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) {
    return normalize_any<float>(raw, [](std::vector<float> v) { return EmbeddingVector(std::move(v)); });
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
    if (values.empty()) throw std::invalid_argument("embedding must have at least one dimension");
    double sq = 0.0;
    for (float v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("embedding holds a non-finite value");
        sq += static_cast<double>(v) * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-4) throw std::invalid_argument("embedding is not unit-norm");
    return EmbeddingVector(std::move(values));
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double sum = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("cosine: dimension mismatch");
    return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

void EmbedderConfig::validate() const {
    if (batch_size == 0) throw ValidationError("embedder batch_size must be positive");
    if (parallelism == 0) throw ValidationError("embedder parallelism must be positive");
    if (timeout_ms <= 0) throw ValidationError("embedder timeout_ms must be positive");
    if (max_retries < 0) throw ValidationError("embedder max_retries must not be negative");
    if (backend == EmbedderBackend::HashedNGram && dims == 0) throw ValidationError("hashed embedder needs dims > 0");
    if (backend == EmbedderBackend::Remote) {
        if (endpoint_url.empty()) throw ValidationError("remote embedder needs embedder_endpoint_url");
        if (model_id.empty()) throw ValidationError("remote embedder needs embedder_model_id");
    }
}

std::string EmbedderConfig::fingerprint() const {
    if (backend == EmbedderBackend::HashedNGram) return HashedNGramEmbedder(dims).fingerprint();
    return "remote:" + model_id;
}

HashedNGramEmbedder::HashedNGramEmbedder(std::size_t dims) : dims_(dims) {
    if (dims == 0) throw std::invalid_argument("HashedNGramEmbedder needs dims > 0");
}

std::string HashedNGramEmbedder::fingerprint() const { return "hashed-ngram/v1:n=3:dims=" + std::to_string(dims_); }

EmbeddingVector HashedNGramEmbedder::embed_one(std::string_view text) const {
    std::string lower(text);
    for (auto& c : lower) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    std::vector<double> raw(dims_, 0.0);
    auto add = [&](std::string_view gram) {
        const auto h = fnv1a64(gram);
        raw[h % dims_] += (h >> 63) ? -1.0 : 1.0;
    };
    if (lower.size() < 3) {
        if (!lower.empty()) add(lower);
    } else {
        for (std::size_t i = 0; i + 3 <= lower.size(); ++i) add(std::string_view(lower).substr(i, 3));
    }
    return EmbeddingVector::normalized(std::span<const double>(raw));
}

std::vector<EmbeddingVector> HashedNGramEmbedder::embed(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)) {
    config_.backend = EmbedderBackend::Remote;
    config_.validate();
}

std::string RemoteEmbedder::fingerprint() const { return config_.fingerprint(); }

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    const bool openai = config_.adapter == EmbedAdapter::OpenAI;
    json request = {{"model", config_.model_id}, {openai ? "input" : "inputs", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto url = detail::join_url(config_.endpoint_url, openai ? "/v1/embeddings" : "/embed");
    const auto body = detail::post_json(url, request.dump(),
                                        {config_.timeout_ms, config_.max_retries, config_.initial_backoff_ms});

    std::vector<std::vector<double>> raw(texts.size());
    try {
        const auto reply = json::parse(body);
        if (openai) {
            const auto& data = reply.at("data");
            if (data.size() != texts.size()) throw ProtocolError("embedding service returned the wrong number of vectors");
            std::vector<bool> seen(texts.size(), false);
            for (const auto& item : data) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= texts.size() || seen[index]) throw ProtocolError("embedding service returned a bad index");
                seen[index] = true;
                raw[index] = item.at("embedding").get<std::vector<double>>();
            }
        } else {
            const auto& vectors = reply.at("vectors");
            if (vectors.size() != texts.size()) {
                throw ProtocolError("embedding service returned the wrong number of vectors");
            }
            for (std::size_t i = 0; i < texts.size(); ++i) raw[i] = vectors[i].get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed embedding response: ") + e.what());
    }

    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (const auto& v : raw) {
        if (v.empty() || (config_.dims != 0 && v.size() != config_.dims)) {
            throw ProtocolError("embedding service returned " + std::to_string(v.size()) + " dims, expected " +
                                std::to_string(config_.dims));
        }
        if (!out.empty() && v.size() != out.front().dims()) {
            throw ProtocolError("embedding service returned vectors of differing dims");
        }
        try {
            out.push_back(EmbeddingVector::normalized(std::span<const double>(v)));
        } catch (const std::invalid_argument& e) {
            throw ProtocolError(std::string("embedding service returned an unusable vector: ") + e.what());
        }
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) const {
    const std::size_t batch = config_.batch_size;
    const std::size_t n_batches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> results(n_batches);
    detail::parallel_for(n_batches, config_.parallelism, [&](std::size_t b) {
        const std::size_t begin = b * batch;
        results[b] = embed_batch(texts.subspan(begin, std::min(batch, texts.size() - begin)));
    });
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(out));
    for (const auto& v : out) {
        if (v.dims() != out.front().dims()) throw ProtocolError("embedding service returned vectors of differing dims");
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
    config.validate();
    if (config.backend == EmbedderBackend::HashedNGram) return std::make_unique<HashedNGramEmbedder>(config.dims);
    return std::make_unique<RemoteEmbedder>(config);
}

std::vector<EmbeddingVector> embed_texts(const EmbedderConfig& config, std::span<const std::string> texts) {
    return make_embedder(config)->embed(texts);
}

}  // namespace trialscreen
