#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/embeddings.hpp"

namespace adjscope {

enum class Scheme { surprise, cbow, frequency, pretrained_weights };

inline constexpr Scheme kAllSchemes[] = {Scheme::cbow, Scheme::frequency, Scheme::pretrained_weights,
                                         Scheme::surprise};

inline std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::surprise: return "surprise";
    case Scheme::cbow: return "cbow";
    case Scheme::frequency: return "frequency";
    case Scheme::pretrained_weights: return "pretrained-weights";
    }
    return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
    for (auto scheme : kAllSchemes)
        if (to_string(scheme) == s) return scheme;
    return std::nullopt;
}

struct SentenceEmbedding {
    Vector vector;
    std::vector<double> weights;     // aligned with `positions`
    std::vector<std::size_t> positions; // token positions that had pre-trained vectors
    Scheme scheme = Scheme::cbow;
    bool uniform_fallback = false;   // weights summed to zero; unweighted mean used
};

inline constexpr double kWeightFloor = 1e-12;

struct TokenWeights {
    std::vector<std::size_t> positions;
    std::vector<double> weights;
};

/**
 * Surprise weight of every token that has a vector in `table`:
 * w_i = 1 - cos(sum of context vectors within +-window, own vector).
 * The window is clipped at sentence ends and measured in original token
 * positions; tokens missing from the table neither get a weight nor
 * contribute context. A token with no known context gets weight 1.
 */
inline TokenWeights surprise_weights(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                                     std::size_t window) {
    if (window == 0) throw Error("surprise window must be >= 1");
    std::vector<std::optional<std::span<const double>>> vecs;
    vecs.reserve(tokens.size());
    for (const auto& t : tokens) vecs.push_back(table.find(t));

    TokenWeights out;
    Vector expected(table.dimension());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!vecs[i]) continue;
        std::fill(expected.begin(), expected.end(), 0.0);
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(tokens.size() - 1, i + window);
        bool any = false;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j == i || !vecs[j]) continue;
            const auto& v = *vecs[j];
            for (std::size_t d = 0; d < expected.size(); ++d) expected[d] += v[d];
            any = true;
        }
        double w = any ? cosine_distance(expected, *vecs[i]) : 1.0;
        if (w < kWeightFloor) w = 0.0; // rounding residue of an exact directional match
        out.positions.push_back(i);
        out.weights.push_back(w);
    }
    return out;
}

namespace detail {

inline SentenceEmbedding weighted_average(const std::vector<std::string>& tokens, const EmbeddingTable& pretrained,
                                          TokenWeights tw, Scheme scheme) {
    if (tw.positions.empty()) {
        std::string text;
        for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
        throw Error("no token has a pre-trained vector in sentence: \"" + text + "\"");
    }
    SentenceEmbedding e;
    e.scheme = scheme;
    e.vector.assign(pretrained.dimension(), 0.0);
    double total = 0.0;
    for (double w : tw.weights) total += w;
    if (!(total > 0.0)) {
        e.uniform_fallback = true;
        std::fill(tw.weights.begin(), tw.weights.end(), 1.0);
        total = static_cast<double>(tw.weights.size());
    }
    for (std::size_t k = 0; k < tw.positions.size(); ++k) {
        const auto v = *pretrained.find(tokens[tw.positions[k]]);
        for (std::size_t d = 0; d < e.vector.size(); ++d) e.vector[d] += tw.weights[k] * v[d];
    }
    for (auto& x : e.vector) x /= total;
    e.positions = std::move(tw.positions);
    e.weights = std::move(tw.weights);
    return e;
}

inline TokenWeights known_positions(const std::vector<std::string>& tokens, const EmbeddingTable& pretrained) {
    TokenWeights tw;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (pretrained.contains(tokens[i])) {
            tw.positions.push_back(i);
            tw.weights.push_back(1.0);
        }
    }
    return tw;
}

} // namespace detail

/// Surprise-weighted average of pre-trained vectors; weights from the domain table.
inline SentenceEmbedding encode_surprise(const std::vector<std::string>& tokens, const EmbeddingTable& pretrained,
                                         const EmbeddingTable& domain_table, std::size_t window) {
    if (domain_table.kind() != TableKind::domain_specific)
        throw Error("encode_surprise: weights need a domain-specific table");
    // Weights only exist for tokens the pre-trained table also knows.
    auto tw = surprise_weights(tokens, domain_table, window);
    TokenWeights kept;
    for (std::size_t k = 0; k < tw.positions.size(); ++k) {
        if (pretrained.contains(tokens[tw.positions[k]])) {
            kept.positions.push_back(tw.positions[k]);
            kept.weights.push_back(tw.weights[k]);
        }
    }
    return detail::weighted_average(tokens, pretrained, std::move(kept), Scheme::surprise);
}

inline SentenceEmbedding encode_cbow(const std::vector<std::string>& tokens, const EmbeddingTable& pretrained) {
    return detail::weighted_average(tokens, pretrained, detail::known_positions(tokens, pretrained), Scheme::cbow);
}

/// Surprise weighting computed in the pre-trained space itself.
inline SentenceEmbedding encode_pretrained_weights(const std::vector<std::string>& tokens,
                                                   const EmbeddingTable& pretrained, std::size_t window) {
    auto e = detail::weighted_average(tokens, pretrained, surprise_weights(tokens, pretrained, window),
                                      Scheme::pretrained_weights);
    return e;
}

/**
 * idf(t) = ln(N / df(t)) + 1 over training instances (one document each).
 * Tokens never seen in training get the largest observed idf.
 */
class IdfTable {
public:
    static IdfTable build(const std::vector<Instance>& documents) {
        IdfTable t;
        std::unordered_map<std::string, std::size_t> df;
        for (const auto& doc : documents) {
            std::set<std::string> uniq(doc.tokens.begin(), doc.tokens.end());
            for (const auto& tok : uniq) ++df[tok];
        }
        t.documents_ = documents.size();
        t.max_idf_ = 1.0;
        for (const auto& [tok, count] : df) {
            const double idf =
                std::log(static_cast<double>(t.documents_) / static_cast<double>(std::max<std::size_t>(count, 1))) + 1.0;
            t.idf_.emplace(tok, idf);
            t.max_idf_ = std::max(t.max_idf_, idf);
        }
        return t;
    }

    double idf(const std::string& token) const {
        auto it = idf_.find(token);
        return it == idf_.end() ? max_idf_ : it->second;
    }

    bool contains(const std::string& token) const { return idf_.contains(token); }
    double max_idf() const { return max_idf_; }
    std::size_t documents() const { return documents_; }

private:
    std::unordered_map<std::string, double> idf_;
    double max_idf_ = 1.0;
    std::size_t documents_ = 0;
};

inline SentenceEmbedding encode_frequency(const std::vector<std::string>& tokens, const EmbeddingTable& pretrained,
                                          const IdfTable& idf) {
    auto tw = detail::known_positions(tokens, pretrained);
    for (std::size_t k = 0; k < tw.positions.size(); ++k) tw.weights[k] = idf.idf(tokens[tw.positions[k]]);
    return detail::weighted_average(tokens, pretrained, std::move(tw), Scheme::frequency);
}

/// Everything a scheme may need; unused members can be null.
struct EncoderContext {
    const EmbeddingTable* pretrained = nullptr;
    const EmbeddingTable* domain_table = nullptr; // surprise
    const IdfTable* idf = nullptr;                // frequency
    std::size_t window = 2;                       // surprise, pretrained-weights
};

inline SentenceEmbedding encode(Scheme scheme, const std::vector<std::string>& tokens, const EncoderContext& ctx) {
    if (!ctx.pretrained) throw Error("encoder needs a pre-trained table");
    switch (scheme) {
    case Scheme::surprise:
        if (!ctx.domain_table) throw Error("surprise encoder needs a domain-specific table (train a mapping first)");
        return encode_surprise(tokens, *ctx.pretrained, *ctx.domain_table, ctx.window);
    case Scheme::cbow: return encode_cbow(tokens, *ctx.pretrained);
    case Scheme::frequency:
        if (!ctx.idf) throw Error("frequency encoder needs an idf table");
        return encode_frequency(tokens, *ctx.pretrained, *ctx.idf);
    case Scheme::pretrained_weights: return encode_pretrained_weights(tokens, *ctx.pretrained, ctx.window);
    }
    throw Error("unknown scheme");
}

} // namespace adjscope
