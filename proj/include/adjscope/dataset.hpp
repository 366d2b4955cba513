#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adjscope/common.hpp"
#include "adjscope/random.hpp"

namespace adjscope {

enum class Split { train, dev, test };
enum class Label { in_domain, domain_adjacent };

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "?";
}

inline std::string_view to_string(Label l) {
    return l == Label::in_domain ? "in-domain" : "domain-adjacent";
}

inline std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    return std::nullopt;
}

struct Instance {
    std::string id;
    std::string raw_text;
    std::vector<std::string> tokens;
    std::set<std::string> predicates;
    Split split = Split::train;
    std::optional<Label> label; // unset until exclude_predicates runs
};

/// Predicates removed from the training schema for one domain.
class SplitSpec {
public:
    SplitSpec(std::string domain_name, std::set<std::string> excluded)
        : domain_name_(std::move(domain_name)), excluded_(std::move(excluded)) {
        if (excluded_.empty()) throw Error("domain '" + domain_name_ + "': excluded predicate set is empty");
    }

    const std::string& domain_name() const { return domain_name_; }
    const std::set<std::string>& excluded_predicates() const { return excluded_; }

    bool is_adjacent(const std::set<std::string>& predicates) const {
        return std::any_of(predicates.begin(), predicates.end(),
                           [&](const std::string& p) { return excluded_.contains(p); });
    }

private:
    std::string domain_name_;
    std::set<std::string> excluded_;
};

/// Excluded predicates per domain of the eight-domain benchmark.
inline std::optional<std::set<std::string>> default_excluded_predicates(std::string_view domain) {
    std::string key(domain);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (key == "basketball") return std::set<std::string>{"numGamesPlayed"};
    if (key == "blocks") return std::set<std::string>{"length"};
    if (key == "calendar") return std::set<std::string>{"startTime"};
    if (key == "housing") return std::set<std::string>{"size"};
    if (key == "publications") return std::set<std::string>{"venue"};
    if (key == "recipes") return std::set<std::string>{"preparationTime"};
    if (key == "restaurants") return std::set<std::string>{"starRating"};
    if (key == "social") return std::set<std::string>{"educationStartDate", "employmentEndDate"};
    return std::nullopt;
}

/// Lowercase, split on whitespace, strip leading/trailing punctuation.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        std::size_t b = i, e = j;
        while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
        if (e > b) {
            std::string tok(text.substr(b, e - b));
            for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            out.push_back(std::move(tok));
        }
        i = j;
    }
    return out;
}

/**
 * Parses line-delimited JSON records `{"text", "predicates", "split"}` with
 * an optional string `id`. Records without an id are named by their 1-based
 * line number. Blank lines are ignored.
 */
inline std::vector<Instance> read_corpus(std::istream& in, Warnings* warnings = nullptr,
                                         const std::string& source = "corpus") {
    std::vector<Instance> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) -> Error {
        return Error(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("malformed record: ") + e.what());
        }
        if (!rec.is_object()) throw fail("record is not an object");
        for (const char* field : {"text", "predicates", "split"}) {
            if (!rec.contains(field)) throw fail(std::string("missing field '") + field + "'");
        }
        if (!rec["text"].is_string()) throw fail("field 'text' must be a string");
        if (!rec["split"].is_string()) throw fail("field 'split' must be a string");
        if (!rec["predicates"].is_array()) throw fail("field 'predicates' must be a list");

        Instance inst;
        inst.raw_text = rec["text"].get<std::string>();
        inst.tokens = tokenize(inst.raw_text);
        for (const auto& p : rec["predicates"]) {
            if (!p.is_string()) throw fail("predicate names must be strings");
            inst.predicates.insert(p.get<std::string>());
        }
        const auto split_name = rec["split"].get<std::string>();
        auto split = parse_split(split_name);
        if (!split) throw fail("unknown split '" + split_name + "'");
        inst.split = *split;
        if (rec.contains("id")) {
            if (rec["id"].is_string()) inst.id = rec["id"].get<std::string>();
            else if (rec["id"].is_number_integer()) inst.id = std::to_string(rec["id"].get<long long>());
            else throw fail("field 'id' must be a string or integer");
        } else {
            inst.id = std::to_string(line_no);
        }
        if (!ids.insert(inst.id).second) throw fail("duplicate id '" + inst.id + "'");
        out.push_back(std::move(inst));
    }
    if (out.empty()) warn(warnings, source + ": corpus is empty");
    return out;
}

inline std::vector<Instance> load_corpus(const std::string& path, Warnings* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus: " + path);
    return read_corpus(in, warnings, path);
}

struct ExperimentSplits {
    std::vector<Instance> train;
    std::vector<Instance> dev;
    std::vector<Instance> test;
};

/**
 * Labels every instance and drops domain-adjacent ones from train and dev.
 * Test keeps both labels. Instances that tokenize to nothing are dropped
 * with a warning.
 */
inline ExperimentSplits exclude_predicates(const std::vector<Instance>& corpus, const SplitSpec& spec,
                                           Warnings* warnings = nullptr) {
    ExperimentSplits out;
    std::set<std::string> seen;
    for (const auto& src : corpus) {
        for (const auto& p : src.predicates)
            if (spec.excluded_predicates().contains(p)) seen.insert(p);
        if (src.tokens.empty()) {
            warn(warnings, "instance '" + src.id + "' has no tokens; dropped");
            continue;
        }
        Instance inst = src;
        inst.label = spec.is_adjacent(inst.predicates) ? Label::domain_adjacent : Label::in_domain;
        switch (inst.split) {
        case Split::train:
            if (inst.label == Label::in_domain) out.train.push_back(std::move(inst));
            break;
        case Split::dev:
            if (inst.label == Label::in_domain) out.dev.push_back(std::move(inst));
            break;
        case Split::test: out.test.push_back(std::move(inst)); break;
        }
    }
    for (const auto& p : spec.excluded_predicates()) {
        if (!seen.contains(p))
            warn(warnings, "domain '" + spec.domain_name() + "': excluded predicate '" + p + "' never occurs");
    }
    return out;
}

/**
 * Moves a seeded `dev_fraction` of train into dev. Used when the corpus
 * ships no dev split. Relative order inside each part is preserved.
 */
inline void carve_dev(ExperimentSplits& splits, double dev_fraction, std::uint64_t seed) {
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw Error("dev fraction must be in (0,1)");
    const std::size_t n = splits.train.size();
    auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
    if (n >= 2) n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1);
    else n_dev = 0;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<bool> to_dev(n, false);
    for (std::size_t i = 0; i < n_dev; ++i) to_dev[order[i]] = true;
    std::vector<Instance> train;
    for (std::size_t i = 0; i < n; ++i) {
        auto& inst = splits.train[i];
        if (to_dev[i]) {
            inst.split = Split::dev;
            splits.dev.push_back(std::move(inst));
        } else {
            train.push_back(std::move(inst));
        }
    }
    splits.train = std::move(train);
}

struct MixedTestSet {
    std::vector<Instance> instances;
    std::size_t in_domain = 0;
    std::size_t adjacent = 0;
    bool with_replacement = false;
};

/**
 * Resamples the test set so domain-adjacent instances make up
 * `adjacent_fraction` of it. In-domain instances are all kept; adjacent ones
 * are drawn without replacement when enough exist. Output keeps the input
 * order (duplicates from replacement sit next to their original).
 */
inline MixedTestSet mix_test_set(const std::vector<Instance>& test, double adjacent_fraction, std::uint64_t seed) {
    if (!(adjacent_fraction > 0.0 && adjacent_fraction < 1.0)) throw Error("adjacent fraction must be in (0,1)");
    std::vector<std::size_t> adjacent_idx;
    std::size_t n_id = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test[i].label) throw Error("test instance '" + test[i].id + "' is unlabeled");
        if (*test[i].label == Label::domain_adjacent) adjacent_idx.push_back(i);
        else ++n_id;
    }
    if (n_id == 0) throw Error("test set has no in-domain instances");
    if (adjacent_idx.empty()) throw Error("test set has no domain-adjacent instances");

    const double exact = adjacent_fraction * static_cast<double>(n_id) / (1.0 - adjacent_fraction);
    auto target = static_cast<std::size_t>(std::llround(exact));
    target = std::max<std::size_t>(target, 1);

    std::vector<std::size_t> copies(test.size(), 0);
    Rng rng(seed);
    MixedTestSet out;
    if (target <= adjacent_idx.size()) {
        auto order = adjacent_idx;
        rng.shuffle(order);
        for (std::size_t i = 0; i < target; ++i) copies[order[i]] = 1;
    } else {
        out.with_replacement = true;
        for (auto i : adjacent_idx) copies[i] = 1;
        for (std::size_t extra = adjacent_idx.size(); extra < target; ++extra)
            ++copies[adjacent_idx[rng.below(adjacent_idx.size())]];
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        const bool adj = *test[i].label == Label::domain_adjacent;
        const std::size_t times = adj ? copies[i] : 1;
        for (std::size_t t = 0; t < times; ++t) out.instances.push_back(test[i]);
    }
    out.in_domain = n_id;
    out.adjacent = target;
    return out;
}

} // namespace adjscope
