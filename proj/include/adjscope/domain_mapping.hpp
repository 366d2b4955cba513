#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/embeddings.hpp"
#include "adjscope/random.hpp"

namespace adjscope {

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Vector multiply(const Matrix& m, std::span<const double> x) {
    if (x.size() != m.cols()) {
        throw Error("matrix-vector dimension mismatch (" + std::to_string(m.cols()) + " vs " +
                    std::to_string(x.size()) + ")");
    }
    Vector y(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
    return y;
}

struct MappingHyperparams {
    std::size_t window = 2;
    std::size_t epochs = 10;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
    std::size_t domain_dim = 0; // 0 = same as the pre-trained dimension
    double init_stddev = 0.01;

    friend bool operator==(const MappingHyperparams&, const MappingHyperparams&) = default;
};

/**
 * Linear map from pre-trained to domain-specific space, learned as the input
 * layer of a CBOW model whose inputs are pre-trained vectors.
 */
struct DomainMapping {
    Matrix input_map;    // domain_dim x pretrained_dim
    Matrix output_layer; // vocab_size x domain_dim
    std::vector<std::string> vocab;
    MappingHyperparams hyperparams;
    std::vector<double> epoch_loss; // mean cross-entropy per epoch

    std::size_t pretrained_dim() const { return input_map.cols(); }
    std::size_t domain_dim() const { return input_map.rows(); }

    friend bool operator==(const DomainMapping&, const DomainMapping&) = default;
};

inline Vector apply_mapping(const DomainMapping& mapping, std::span<const double> word_vector) {
    if (word_vector.size() != mapping.pretrained_dim()) {
        throw Error("apply_mapping: expected " + std::to_string(mapping.pretrained_dim()) +
                    " components, got " + std::to_string(word_vector.size()));
    }
    return multiply(mapping.input_map, word_vector);
}

/// Identity (padded or truncated) plus Gaussian noise; output layer Gaussian.
inline DomainMapping initialize_mapping(std::size_t pretrained_dim, std::vector<std::string> vocab,
                                        const MappingHyperparams& hp) {
    const std::size_t ddim = hp.domain_dim == 0 ? pretrained_dim : hp.domain_dim;
    DomainMapping m;
    m.hyperparams = hp;
    m.hyperparams.domain_dim = ddim;
    m.vocab = std::move(vocab);
    m.input_map = Matrix(ddim, pretrained_dim);
    m.output_layer = Matrix(m.vocab.size(), ddim);
    Rng rng(derive_seed(hp.seed, "mapping-init"));
    for (std::size_t r = 0; r < ddim; ++r)
        for (std::size_t c = 0; c < pretrained_dim; ++c)
            m.input_map(r, c) = (r == c ? 1.0 : 0.0) + rng.normal(0.0, hp.init_stddev);
    for (auto& w : m.output_layer.data()) w = rng.normal(0.0, hp.init_stddev);
    return m;
}

namespace detail {

// Sentence as vocabulary ids; -1 marks a token without a pre-trained vector.
using IdSentence = std::vector<std::int64_t>;

/// Mean of pre-trained context vectors in +-window around `pos`; false when empty.
inline bool context_mean(const IdSentence& sent, std::size_t pos, std::size_t window,
                         const std::vector<std::span<const double>>& vecs, Vector& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t lo = pos >= window ? pos - window : 0;
    const std::size_t hi = std::min(sent.size() - 1, pos + window);
    std::size_t count = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
        if (j == pos || sent[j] < 0) continue;
        const auto& v = vecs[static_cast<std::size_t>(sent[j])];
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += v[d];
        ++count;
    }
    if (count == 0) return false;
    for (auto& x : out) x /= static_cast<double>(count);
    return true;
}

inline void softmax_inplace(Vector& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& x : z) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : z) x /= sum;
}

} // namespace detail

/**
 * Fits a DomainMapping with full-softmax CBOW and plain SGD.
 *
 * Because the map is linear, the mean of mapped context vectors equals the
 * map applied to the mean pre-trained context vector; the update uses that.
 */
inline DomainMapping train_mapping(const std::vector<Instance>& train, const EmbeddingTable& pretrained,
                                   const MappingHyperparams& hp) {
    if (train.empty()) throw Error("train_mapping: training set is empty");
    if (hp.window == 0) throw Error("train_mapping: window must be >= 1");
    if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate))
        throw Error("train_mapping: learning rate must be positive");

    std::vector<std::string> vocab;
    std::unordered_map<std::string, std::int64_t> ids;
    std::vector<std::span<const double>> vecs;
    std::vector<detail::IdSentence> sentences;
    sentences.reserve(train.size());
    for (const auto& inst : train) {
        detail::IdSentence s;
        s.reserve(inst.tokens.size());
        for (const auto& tok : inst.tokens) {
            auto it = ids.find(tok);
            if (it != ids.end()) {
                s.push_back(it->second);
                continue;
            }
            auto v = pretrained.find(tok);
            if (!v) {
                s.push_back(-1);
                continue;
            }
            const auto id = static_cast<std::int64_t>(vocab.size());
            ids.emplace(tok, id);
            vocab.push_back(tok);
            vecs.push_back(*v);
            s.push_back(id);
        }
        sentences.push_back(std::move(s));
    }

    const std::size_t pdim = pretrained.dimension();
    Vector ctx(pdim);
    std::size_t trainable = 0;
    for (const auto& s : sentences)
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= 0 && detail::context_mean(s, i, hp.window, vecs, ctx)) ++trainable;
    if (trainable == 0) throw Error("train_mapping: no trainable positions (all tokens or contexts out of vocabulary)");

    DomainMapping m = initialize_mapping(pdim, std::move(vocab), hp);
    const std::size_t ddim = m.domain_dim();
    const std::size_t V = m.vocab.size();

    Rng rng(derive_seed(hp.seed, "mapping-shuffle"));
    std::vector<std::size_t> order(sentences.size());
    Vector hidden(ddim), probs(V), grad_hidden(ddim);
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t positions = 0;
        for (auto si : order) {
            const auto& s = sentences[si];
            for (std::size_t pos = 0; pos < s.size(); ++pos) {
                if (s[pos] < 0 || !detail::context_mean(s, pos, hp.window, vecs, ctx)) continue;
                const auto target = static_cast<std::size_t>(s[pos]);
                for (std::size_t r = 0; r < ddim; ++r) hidden[r] = dot(m.input_map.row(r), ctx);
                for (std::size_t w = 0; w < V; ++w) probs[w] = dot(m.output_layer.row(w), hidden);
                detail::softmax_inplace(probs);
                loss_sum += -std::log(std::max(probs[target], std::numeric_limits<double>::min()));
                ++positions;

                probs[target] -= 1.0; // now dLoss/dlogits
                std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);
                for (std::size_t w = 0; w < V; ++w) {
                    auto out_row = m.output_layer.row(w);
                    const double g = probs[w];
                    for (std::size_t d = 0; d < ddim; ++d) {
                        grad_hidden[d] += g * out_row[d];
                        out_row[d] -= hp.learning_rate * g * hidden[d];
                    }
                }
                for (std::size_t r = 0; r < ddim; ++r) {
                    auto in_row = m.input_map.row(r);
                    const double g = hp.learning_rate * grad_hidden[r];
                    for (std::size_t c = 0; c < pdim; ++c) in_row[c] -= g * ctx[c];
                }
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(positions);
        if (!std::isfinite(mean_loss))
            throw Error("train_mapping: non-finite loss in epoch " + std::to_string(epoch + 1));
        m.epoch_loss.push_back(mean_loss);
    }
    return m;
}

/**
 * Softmax over the mapping's vocabulary for the token at `pos`, given its
 * +-window context. Empty when the context has no known tokens.
 */
inline std::vector<double> predict_center(const DomainMapping& m, const EmbeddingTable& pretrained,
                                          const std::vector<std::string>& tokens, std::size_t pos,
                                          std::size_t window) {
    if (pos >= tokens.size()) throw Error("predict_center: position out of range");
    if (pretrained.dimension() != m.pretrained_dim()) throw Error("predict_center: pre-trained dimension mismatch");
    Vector ctx(m.pretrained_dim(), 0.0);
    const std::size_t lo = pos >= window ? pos - window : 0;
    const std::size_t hi = std::min(tokens.size() - 1, pos + window);
    std::size_t count = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
        if (j == pos) continue;
        auto v = pretrained.find(tokens[j]);
        if (!v) continue;
        for (std::size_t d = 0; d < ctx.size(); ++d) ctx[d] += (*v)[d];
        ++count;
    }
    if (count == 0) return {};
    for (auto& x : ctx) x /= static_cast<double>(count);
    const Vector hidden = multiply(m.input_map, ctx);
    Vector z = multiply(m.output_layer, hidden);
    detail::softmax_inplace(z);
    return z;
}

/// Domain-specific vector for every pre-trained token.
inline EmbeddingTable materialize_domain_table(const DomainMapping& m, const EmbeddingTable& pretrained) {
    if (pretrained.dimension() != m.pretrained_dim())
        throw Error("materialize_domain_table: pre-trained dimension mismatch");
    EmbeddingTable::Builder b(m.domain_dim(), TableKind::domain_specific);
    for (std::size_t i = 0; i < pretrained.size(); ++i) b.add(pretrained.tokens()[i], apply_mapping(m, pretrained.row(i)));
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Model file. Layout documented in docs/model_format.md. All integers are
// little-endian; reals are IEEE-754 binary64, little-endian.

inline constexpr char kModelMagic[8] = {'A', 'D', 'J', 'S', 'M', 'A', 'P', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_uint(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw Error("model file truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}
inline std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_uint(in, 4)); }
inline std::uint64_t get_u64(std::istream& in) { return get_uint(in, 8); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(std::string("model field too large: ") + what);
    return static_cast<std::uint32_t>(v);
}

} // namespace detail

inline void write_model(std::ostream& out, const DomainMapping& m) {
    using namespace detail;
    out.write(kModelMagic, sizeof kModelMagic);
    put_u32(out, kModelVersion);
    put_u32(out, checked_u32(m.pretrained_dim(), "pretrained_dim"));
    put_u32(out, checked_u32(m.domain_dim(), "domain_dim"));
    put_u32(out, checked_u32(m.vocab.size(), "vocab_size"));
    put_u32(out, checked_u32(m.hyperparams.window, "window"));
    put_u32(out, checked_u32(m.hyperparams.epochs, "epochs"));
    put_f64(out, m.hyperparams.learning_rate);
    put_u64(out, m.hyperparams.seed);
    put_f64(out, m.hyperparams.init_stddev);
    put_u32(out, checked_u32(m.epoch_loss.size(), "epoch_loss"));
    for (double l : m.epoch_loss) put_f64(out, l);
    for (const auto& tok : m.vocab) {
        put_u32(out, checked_u32(tok.size(), "token"));
        out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    }
    for (double v : m.input_map.data()) put_f64(out, v);
    for (double v : m.output_layer.data()) put_f64(out, v);
}

inline DomainMapping read_model(std::istream& in) {
    using namespace detail;
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
        throw Error("not a domain mapping model file");
    const auto version = get_u32(in);
    if (version != kModelVersion) throw Error("unsupported model version " + std::to_string(version));
    DomainMapping m;
    const std::size_t pdim = get_u32(in);
    const std::size_t ddim = get_u32(in);
    const std::size_t vsize = get_u32(in);
    if (pdim == 0 || ddim == 0) throw Error("model file has zero dimension");
    m.hyperparams.window = get_u32(in);
    m.hyperparams.epochs = get_u32(in);
    m.hyperparams.learning_rate = get_f64(in);
    m.hyperparams.seed = get_u64(in);
    m.hyperparams.init_stddev = get_f64(in);
    m.hyperparams.domain_dim = ddim;
    const std::size_t n_loss = get_u32(in);
    for (std::size_t i = 0; i < n_loss; ++i) m.epoch_loss.push_back(get_f64(in));
    m.vocab.reserve(vsize);
    for (std::size_t i = 0; i < vsize; ++i) {
        const std::size_t len = get_u32(in);
        std::string tok(len, '\0');
        if (len && !in.read(tok.data(), static_cast<std::streamsize>(len))) throw Error("model file truncated");
        m.vocab.push_back(std::move(tok));
    }
    m.input_map = Matrix(ddim, pdim);
    for (auto& v : m.input_map.data()) v = get_f64(in);
    m.output_layer = Matrix(vsize, ddim);
    for (auto& v : m.output_layer.data()) v = get_f64(in);
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after model data");
    return m;
}

inline void save_model(const std::string& path, const DomainMapping& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file: " + path);
    write_model(out, m);
    if (!out) throw Error("write failed: " + path);
}

inline DomainMapping load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file: " + path);
    try {
        return read_model(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

} // namespace adjscope
