#include <gtest/gtest.h>

#include <sstream>

#include "adjscope/embeddings.hpp"
#include "adjscope/random.hpp"
#include "support/oracles.hpp"

using namespace adjscope;

namespace {

EmbeddingTable parse(const std::string& text, std::optional<std::size_t> dim = {}, LoadStats* stats = nullptr) {
    std::istringstream in(text);
    return read_embeddings(in, dim, stats);
}

} // namespace

TEST(LoadEmbeddings, ReadsTwoEntries) {
    auto t = parse("a 1.0 0.0\nb 0.0 1.0\n");
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.dimension(), 2u);
    ASSERT_TRUE(t.find("a"));
    EXPECT_EQ((*t.find("a"))[0], 1.0);
    EXPECT_EQ((*t.find("b"))[1], 1.0);
}

TEST(LoadEmbeddings, HeaderLineIsSkipped) {
    LoadStats stats;
    auto with_header = parse("2 2\na 1.0 0.0\nb 0.0 1.0\n", {}, &stats);
    EXPECT_TRUE(stats.had_header);
    EXPECT_EQ(with_header, parse("a 1.0 0.0\nb 0.0 1.0\n"));
}

TEST(LoadEmbeddings, DimensionMismatchNamesLine) {
    try {
        parse("a 1 2 3 4\nb 1 2 3 4\nc 1 2 3 4 5\n");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(LoadEmbeddings, ExpectedDimensionIsEnforced) {
    EXPECT_THROW(parse("a 1 2 3\n", 4), Error);
    EXPECT_EQ(parse("a 1 2 3 4\n", 4).dimension(), 4u);
}

TEST(LoadEmbeddings, UnparseableComponentFails) {
    EXPECT_THROW(parse("a 1.0 x\n"), Error);
    EXPECT_THROW(parse("a 1.0 nan\n"), Error);
}

TEST(LoadEmbeddings, EmptyFileFails) {
    EXPECT_THROW(parse(""), Error);
    EXPECT_THROW(parse("\n\n"), Error);
    EXPECT_THROW(parse("3 2\n"), Error);
}

TEST(LoadEmbeddings, FirstDuplicateWins) {
    LoadStats stats;
    auto t = parse("a 1 0\na 5 5\nb 0 1\n", {}, &stats);
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(stats.duplicates, 1u);
    EXPECT_EQ((*t.find("a"))[0], 1.0);
}

TEST(LoadEmbeddings, MissingTokenIsExplicit) {
    auto t = parse("a 1 0\n");
    EXPECT_FALSE(t.find("A").has_value());
    EXPECT_FALSE(t.contains("b"));
}

TEST(LoadEmbeddings, MissingFileFails) { EXPECT_THROW(load_embeddings("/nonexistent/vectors.txt"), Error); }

TEST(LoadEmbeddings, SaveLoadRoundTripIsIdentical) {
    Rng rng(7);
    EmbeddingTable::Builder b(5, TableKind::pretrained);
    for (int i = 0; i < 50; ++i) {
        Vector v(5);
        for (auto& x : v) x = rng.normal(0.0, 3.0) * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0);
        b.add("tok" + std::to_string(i), v);
    }
    const auto table = std::move(b).build();
    std::stringstream io;
    write_embeddings(io, table);
    EXPECT_EQ(read_embeddings(io), table);
}

TEST(Cosine, SpecExamples) {
    const Vector e1{1, 0}, e2{0, 1}, zero{0, 0}, neg{-1, 0};
    EXPECT_DOUBLE_EQ(cosine_similarity(e1, e1), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(e1, e2), 0.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(e1, zero), 0.0);
    EXPECT_DOUBLE_EQ(cosine_distance(e1, e1), 0.0);
    EXPECT_DOUBLE_EQ(cosine_distance(e1, neg), 2.0);
    EXPECT_DOUBLE_EQ(cosine_distance(e1, zero), 1.0);
}

TEST(Cosine, DimensionMismatchThrows) {
    EXPECT_THROW(cosine_similarity(Vector{1, 0}, Vector{1, 0, 0}), Error);
    EXPECT_THROW(cosine_distance(Vector{1}, Vector{1, 0}), Error);
}

TEST(Cosine, SymmetricScaleInvariantAndBounded) {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t dim = 1 + rng.below(16);
        Vector a(dim), b(dim);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        const double lambda = std::exp(rng.normal(0.0, 3.0));
        const double mu = std::exp(rng.normal(0.0, 3.0));
        Vector sa = a, sb = b;
        for (auto& x : sa) x *= lambda;
        for (auto& x : sb) x *= mu;
        const double c = cosine_similarity(a, b);
        EXPECT_NEAR(c, cosine_similarity(b, a), 1e-12);
        EXPECT_NEAR(c, cosine_similarity(sa, sb), 1e-9);
        const double d = cosine_distance(a, b);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 2.0);
    }
}
