#pragma once

// Reference computations used only by tests. They are deliberately naive and
// share no code path with the library beyond the plain data types.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "adjscope/dataset.hpp"

namespace oracle {

/// P(adjacent score > in-domain score) + 0.5 P(tie), by counting all pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<adjscope::Label>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != adjscope::Label::domain_adjacent) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != adjscope::Label::in_domain) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    long double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<long double>(a[i]) * b[i];
        aa += static_cast<long double>(a[i]) * a[i];
        bb += static_cast<long double>(b[i]) * b[i];
    }
    if (aa == 0 || bb == 0) return 1.0;
    return static_cast<double>(1.0L - ab / std::sqrt(aa * bb));
}

/// Mean of the k smallest cosine distances after sorting all of them.
inline double brute_force_knn_score(const std::vector<std::vector<double>>& stored, const std::vector<double>& query,
                                    std::size_t k) {
    std::vector<double> d;
    for (const auto& s : stored) d.push_back(cosine_distance(s, query));
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += d[i];
    return sum / static_cast<double>(k);
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() /
             ("adjscope-test-" + name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

} // namespace oracle
