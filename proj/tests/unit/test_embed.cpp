#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "trialscreen/embed.hpp"
#include "trialscreen/errors.hpp"

using namespace trialscreen;

namespace {

double norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (float x : v.values()) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

}  // namespace

TEST(EmbeddingVector, NormalizesAndHandlesZero) {
    const std::vector<double> raw{3.0, 4.0};
    const auto v = EmbeddingVector::normalized(raw);
    EXPECT_NEAR(v.values()[0], 0.6, 1e-7);
    EXPECT_NEAR(v.values()[1], 0.8, 1e-7);
    const std::vector<double> zero(4, 0.0);
    const auto e0 = EmbeddingVector::normalized(zero);
    EXPECT_EQ(e0.values()[0], 1.0f);
    EXPECT_EQ(e0.values()[3], 0.0f);
    EXPECT_THROW(EmbeddingVector::normalized(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(EmbeddingVector::normalized(std::vector<double>{1.0, NAN}), std::invalid_argument);
}

TEST(EmbeddingVector, FromUnitChecksNorm) {
    EXPECT_NO_THROW(EmbeddingVector::from_unit({0.6f, 0.8f}));
    EXPECT_THROW(EmbeddingVector::from_unit({0.6f, 0.9f}), std::invalid_argument);
}

TEST(EmbeddingVector, NormalizationProperty) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> raw(1 + rng() % 64);
        for (auto& x : raw) x = g(rng);
        const auto v = EmbeddingVector::normalized(raw);
        ASSERT_NEAR(norm(v), 1.0, 1e-5);
        ASSERT_NEAR(cosine(v, v), 1.0, 1e-5);
        ASSERT_LE(std::abs(cosine(v, EmbeddingVector::normalized(raw))), 1.0);
    }
}

TEST(Cosine, DimsMismatchThrows) {
    const auto a = EmbeddingVector::normalized(std::vector<double>{1, 0});
    const auto b = EmbeddingVector::normalized(std::vector<double>{1, 0, 0});
    EXPECT_THROW(cosine(a, b), std::invalid_argument);
}

TEST(HashedNGram, DeterministicUnitAndSimilarityOrdered) {
    const HashedNGramEmbedder e(128);
    EXPECT_EQ(e.fingerprint(), "hashed-ngram/v1:n=3:dims=128");
    const std::vector<std::string> texts{"myocardial infarction last month", "Myocardial Infarction LAST month",
                                         "patient enjoys gardening", "", "ab"};
    const auto v = e.embed(texts);
    ASSERT_EQ(v.size(), texts.size());
    for (const auto& x : v) {
        EXPECT_EQ(x.dims(), 128u);
        EXPECT_NEAR(norm(x), 1.0, 1e-5);
    }
    EXPECT_NEAR(cosine(v[0], v[1]), 1.0, 1e-6);  // lowercased before hashing
    const auto query = e.embed_one("recent myocardial infarction");
    EXPECT_GT(cosine(query, v[0]), cosine(query, v[2]));
    EXPECT_EQ(e.embed_one("myocardial infarction last month"), v[0]);
}

TEST(EmbedderConfig, ValidateAndFingerprint) {
    EmbedderConfig c;
    c.dims = 64;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.fingerprint(), HashedNGramEmbedder(64).fingerprint());
    EXPECT_EQ(make_embedder(c)->fingerprint(), c.fingerprint());
    c.dims = 0;
    EXPECT_THROW(c.validate(), ValidationError);

    EmbedderConfig r;
    r.backend = EmbedderBackend::Remote;
    EXPECT_THROW(r.validate(), ValidationError);  // needs endpoint and model
    r.endpoint_url = "http://127.0.0.1:1";
    r.model_id = "some/model";
    EXPECT_NO_THROW(r.validate());
    EXPECT_NE(r.fingerprint().find("some/model"), std::string::npos);
}
