#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adjscope/common.hpp"

namespace adjscope {

enum class TableKind { pretrained, domain_specific };

/**
 * Immutable token -> vector map.
 *
 * Vectors live in one contiguous row-major buffer; tokens keep their
 * insertion order so saving a table reproduces the file it came from.
 * Lookups are exact: the table never normalizes tokens.
 */
class EmbeddingTable {
public:
    class Builder {
    public:
        Builder(std::size_t dimension, TableKind kind) : dimension_(dimension), kind_(kind) {
            if (dimension == 0) throw Error("embedding dimension must be positive");
        }

        /// Returns false (and stores nothing) when the token is already present.
        bool add(std::string token, std::span<const double> vec) {
            if (vec.size() != dimension_) {
                throw Error("vector for '" + token + "' has " + std::to_string(vec.size()) +
                            " components, expected " + std::to_string(dimension_));
            }
            if (index_.contains(token)) return false;
            index_.emplace(token, tokens_.size());
            tokens_.push_back(std::move(token));
            data_.insert(data_.end(), vec.begin(), vec.end());
            return true;
        }

        std::size_t dimension() const { return dimension_; }

        EmbeddingTable build() && {
            EmbeddingTable t;
            t.dimension_ = dimension_;
            t.kind_ = kind_;
            t.tokens_ = std::move(tokens_);
            t.index_ = std::move(index_);
            t.data_ = std::move(data_);
            return t;
        }

    private:
        std::size_t dimension_;
        TableKind kind_;
        std::vector<std::string> tokens_;
        std::unordered_map<std::string, std::size_t> index_;
        std::vector<double> data_;
    };

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return tokens_.size(); }
    TableKind kind() const { return kind_; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool contains(const std::string& token) const { return index_.contains(token); }

    /// Empty optional when the token is absent; there is no default vector.
    std::optional<std::span<const double>> find(const std::string& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) return std::nullopt;
        return row(it->second);
    }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dimension_, dimension_};
    }

    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
        return a.dimension_ == b.dimension_ && a.kind_ == b.kind_ && a.tokens_ == b.tokens_ &&
               a.data_ == b.data_;
    }

private:
    EmbeddingTable() = default;

    std::size_t dimension_ = 0;
    TableKind kind_ = TableKind::pretrained;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> data_;
};

struct LoadStats {
    std::size_t duplicates = 0;
    bool had_header = false;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string field;
    while (in >> field) out.push_back(std::move(field));
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    out = std::strtod(begin, &end);
    return end == begin + s.size() && !s.empty() && errno != ERANGE && std::isfinite(out);
}

inline bool parse_size(const std::string& s, std::size_t& out) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return false;
    out = std::stoull(s);
    return true;
}

} // namespace detail

/**
 * Reads the whitespace-separated text format: `token c1 ... cd` per line,
 * optionally preceded by a `count dimension` header. First occurrence of a
 * duplicated token wins; duplicates are counted in `stats`.
 */
inline EmbeddingTable read_embeddings(std::istream& in, std::optional<std::size_t> expected_dimension = {},
                                      LoadStats* stats = nullptr, TableKind kind = TableKind::pretrained) {
    if (expected_dimension && *expected_dimension == 0) throw Error("expected dimension must be positive");
    std::optional<EmbeddingTable::Builder> builder;
    if (expected_dimension) builder.emplace(*expected_dimension, kind);
    LoadStats local;
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    Vector values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        if (!seen_content) {
            seen_content = true;
            std::size_t count = 0, dim = 0;
            if (fields.size() == 2 && detail::parse_size(fields[0], count) && detail::parse_size(fields[1], dim)) {
                local.had_header = true;
                continue;
            }
        }
        const std::size_t dim = fields.size() - 1;
        if (dim == 0) throw Error("line " + std::to_string(line_no) + ": token without vector components");
        if (!builder) builder.emplace(dim, kind);
        if (dim != builder->dimension()) {
            throw Error("line " + std::to_string(line_no) + ": dimension mismatch, found " + std::to_string(dim) +
                        " components but expected " + std::to_string(builder->dimension()));
        }
        values.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            if (!detail::parse_double(fields[i + 1], values[i])) {
                throw Error("line " + std::to_string(line_no) + ": unparseable component '" + fields[i + 1] + "'");
            }
        }
        if (!builder->add(fields[0], values)) ++local.duplicates;
    }
    if (!builder || (!seen_content)) throw Error("embedding file is empty");
    auto table = std::move(*builder).build();
    if (table.size() == 0) throw Error("embedding file has no vectors");
    if (stats) *stats = local;
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, std::optional<std::size_t> expected_dimension = {},
                                      LoadStats* stats = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding file: " + path);
    try {
        return read_embeddings(in, expected_dimension, stats);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

/// Writes the header line then one line per token, 17 significant digits.
inline void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << table.size() << ' ' << table.dimension() << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.tokens()[i];
        for (double c : table.row(i)) out << ' ' << c;
        out << '\n';
    }
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write embedding file: " + path);
    write_embeddings(out, table);
    if (!out) throw Error("write failed: " + path);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Shared by every cosine path so cached norms give bit-identical results.
inline double cosine_from_parts(double dot_ab, double norm_a, double norm_b) {
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return std::clamp(dot_ab / (norm_a * norm_b), -1.0, 1.0);
}

/// a.b / (|a||b|), or 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    return cosine_from_parts(dot(a, b), norm(a), norm(b));
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    return 1.0 - cosine_similarity(a, b);
}

} // namespace adjscope
