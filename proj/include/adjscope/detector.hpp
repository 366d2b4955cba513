#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/embeddings.hpp"

namespace adjscope {

/**
 * Exact kNN over training sentence embeddings under cosine distance.
 * Vectors are stored contiguously with cached norms.
 */
class NeighborIndex {
public:
    NeighborIndex(std::vector<Vector> vectors, std::vector<std::string> ids, std::size_t k) : k_(k) {
        if (k == 0) throw Error("k must be >= 1");
        if (vectors.size() < k) {
            throw Error("k = " + std::to_string(k) + " exceeds the " + std::to_string(vectors.size()) +
                        " stored vectors");
        }
        if (!ids.empty() && ids.size() != vectors.size()) throw Error("one id per vector required");
        dim_ = vectors.front().size();
        if (dim_ == 0) throw Error("index vectors must be non-empty");
        data_.reserve(vectors.size() * dim_);
        for (const auto& v : vectors) {
            if (v.size() != dim_) throw Error("index vectors have mixed dimensions");
            data_.insert(data_.end(), v.begin(), v.end());
            norms_.push_back(norm(v));
        }
        ids_ = std::move(ids);
        if (ids_.empty())
            for (std::size_t i = 0; i < vectors.size(); ++i) ids_.push_back(std::to_string(i));
    }

    std::size_t k() const { return k_; }
    std::size_t size() const { return norms_.size(); }
    std::size_t dimension() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    /// Cosine distance from `query` to every stored vector, in insertion order.
    std::vector<double> distances(std::span<const double> query) const {
        check_dim(query);
        const double qn = norm(query);
        std::vector<double> d(size());
        for (std::size_t i = 0; i < size(); ++i)
            d[i] = 1.0 - cosine_from_parts(dot(vector(i), query), norms_[i], qn);
        return d;
    }

    /// Indices of the k nearest stored vectors, nearest first; ties keep insertion order.
    std::vector<std::size_t> nearest(std::span<const double> query, std::size_t k) const {
        if (k == 0 || k > size()) throw Error("neighbor count out of range");
        const auto d = distances(query);
        std::vector<std::size_t> idx(size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                          [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
        idx.resize(k);
        return idx;
    }

    /// Mean cosine distance to the k nearest stored vectors.
    double score(std::span<const double> query) const { return score(query, k_); }

    double score(std::span<const double> query, std::size_t k) const {
        if (k == 0 || k > size()) throw Error("neighbor count out of range");
        auto d = distances(query);
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += d[i];
        return sum / static_cast<double>(k);
    }

private:
    void check_dim(std::span<const double> q) const {
        if (q.size() != dim_) {
            throw Error("query has " + std::to_string(q.size()) + " components, index has " + std::to_string(dim_));
        }
    }

    std::size_t k_;
    std::size_t dim_ = 0;
    std::vector<double> data_;
    std::vector<double> norms_;
    std::vector<std::string> ids_;
};

inline NeighborIndex build_index(std::vector<Vector> train_vectors, std::size_t k,
                                 std::vector<std::string> ids = {}) {
    if (train_vectors.empty()) throw Error("cannot build an index over zero vectors");
    return NeighborIndex(std::move(train_vectors), std::move(ids), k);
}

inline double adjacency_score(const NeighborIndex& index, std::span<const double> embedding) {
    return index.score(embedding);
}

/// Scores a batch; each query is independent so work is split across `jobs` threads.
inline std::vector<double> score_batch(const NeighborIndex& index, const std::vector<Vector>& queries,
                                       unsigned jobs = 1) {
    std::vector<double> out(queries.size());
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(queries.size())));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < queries.size(); ++i) out[i] = index.score(queries[i]);
        return out;
    }
    std::vector<std::exception_ptr> errors(jobs);
    {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < queries.size(); i += jobs) out[i] = index.score(queries[i]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct Threshold {
    double value = 0.0;
    double calibration_fraction = 0.0;
    std::string source;
};

/**
 * Places the threshold at the (1 - flag_fraction) quantile of the dev
 * scores, interpolating linearly between order statistics. A score is
 * flagged only when strictly above the threshold.
 */
inline Threshold calibrate_threshold(std::vector<double> dev_scores, double flag_fraction, std::string source = "dev") {
    if (dev_scores.empty()) throw Error("cannot calibrate on an empty dev set");
    if (!(flag_fraction > 0.0 && flag_fraction < 1.0)) throw Error("flag fraction must be in (0,1)");
    for (double s : dev_scores)
        if (!std::isfinite(s)) throw Error("dev scores must be finite");
    std::sort(dev_scores.begin(), dev_scores.end());
    const double h = static_cast<double>(dev_scores.size() - 1) * (1.0 - flag_fraction);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, dev_scores.size() - 1);
    const double frac = h - static_cast<double>(lo);
    const double value = dev_scores[lo] + frac * (dev_scores[hi] - dev_scores[lo]);
    return Threshold{value, flag_fraction, std::move(source)};
}

struct Classification {
    Label label = Label::in_domain;
    double score = 0.0;
};

inline bool exceeds(double score, const Threshold& t) { return score > t.value; }

inline Classification classify(const NeighborIndex& index, const Threshold& threshold, std::span<const double> embedding) {
    const double s = index.score(embedding);
    return {exceeds(s, threshold) ? Label::domain_adjacent : Label::in_domain, s};
}

} // namespace adjscope
