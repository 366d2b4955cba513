#pragma once

// Planted-surprise synthetic domains, used by the test suites and the
// `synth` CLI command.
//
// Every topic owns a cluster of words (cluster center plus Gaussian noise in
// the pre-trained space). In-domain sentences draw all their words from one
// topic. Domain-adjacent sentences are in-domain sentences with one word
// swapped for a word of another topic, so they share most of their tokens
// with in-domain data while breaking the co-occurrence seen in training.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/embeddings.hpp"
#include "adjscope/harness.hpp"
#include "adjscope/random.hpp"

namespace adjscope {

struct SyntheticSpec {
    std::string domain = "synthetic";
    std::size_t topics = 6;
    std::size_t words_per_topic = 8;
    std::size_t dimension = 24;
    double word_noise = 1.5;       // stddev around the topic center, per component / sqrt(dim)
    std::size_t sentence_length = 8;
    std::size_t planted_per_sentence = 1;
    std::size_t train_sentences = 400;
    std::size_t train_adjacent = 40; // adjacent sentences in train, removed by exclusion
    std::size_t test_in_domain = 100;
    std::size_t test_adjacent = 100;
    std::size_t oov_words = 2;     // tokens without pre-trained vectors mixed into some sentences
    double parser_accuracy = 0.5;
    std::uint64_t seed = 1;
};

inline const char* kSyntheticExcluded = "offSchema";

struct SyntheticDomain {
    EmbeddingTable pretrained;
    std::vector<Instance> corpus; // unlabeled, as loaded from a corpus file
    std::vector<ParseOutcome> outcomes;
};

inline std::string synthetic_word(std::size_t topic, std::size_t w) {
    return "t" + std::to_string(topic) + "w" + std::to_string(w);
}

inline SyntheticDomain make_synthetic_domain(const SyntheticSpec& spec) {
    if (spec.topics < 2 || spec.words_per_topic == 0 || spec.sentence_length <= spec.planted_per_sentence)
        throw Error("synthetic spec: need >= 2 topics and sentences longer than the planted span");
    Rng rng(spec.seed);
    const double noise = spec.word_noise / std::sqrt(static_cast<double>(spec.dimension));

    EmbeddingTable::Builder b(spec.dimension, TableKind::pretrained);
    Vector center(spec.dimension), v(spec.dimension);
    for (std::size_t t = 0; t < spec.topics; ++t) {
        double n2 = 0.0;
        for (auto& x : center) {
            x = rng.normal();
            n2 += x * x;
        }
        for (auto& x : center) x /= std::sqrt(n2);
        for (std::size_t w = 0; w < spec.words_per_topic; ++w) {
            for (std::size_t d = 0; d < spec.dimension; ++d) v[d] = center[d] + rng.normal(0.0, noise);
            b.add(synthetic_word(t, w), v);
        }
    }
    SyntheticDomain out{std::move(b).build(), {}, {}};

    auto sentence = [&](std::size_t topic, bool adjacent) {
        std::vector<std::string> words;
        for (std::size_t i = 0; i < spec.sentence_length; ++i)
            words.push_back(synthetic_word(topic, rng.below(spec.words_per_topic)));
        if (adjacent) {
            std::vector<std::size_t> slots(spec.sentence_length);
            for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
            rng.shuffle(slots);
            for (std::size_t p = 0; p < spec.planted_per_sentence; ++p) {
                std::size_t other = rng.below(spec.topics - 1);
                if (other >= topic) ++other;
                words[slots[p]] = synthetic_word(other, rng.below(spec.words_per_topic));
            }
        }
        if (spec.oov_words && rng.uniform() < 0.2)
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)),
                         "oov" + std::to_string(rng.below(spec.oov_words)));
        std::string text;
        for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
        if (rng.uniform() < 0.3) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
        if (rng.uniform() < 0.3) text += "?";
        return text;
    };

    std::size_t next_id = 0;
    auto emit = [&](Split split, bool adjacent) {
        const std::size_t topic = rng.below(spec.topics);
        Instance inst;
        inst.id = spec.domain + "-" + std::to_string(next_id++);
        inst.raw_text = sentence(topic, adjacent);
        inst.tokens = tokenize(inst.raw_text);
        inst.predicates = {"topic" + std::to_string(topic)};
        if (adjacent) inst.predicates.insert(kSyntheticExcluded);
        inst.split = split;
        out.corpus.push_back(std::move(inst));
    };
    for (std::size_t i = 0; i < spec.train_sentences; ++i) emit(Split::train, false);
    for (std::size_t i = 0; i < spec.train_adjacent; ++i) emit(Split::train, true);
    for (std::size_t i = 0; i < spec.test_in_domain; ++i) emit(Split::test, false);
    for (std::size_t i = 0; i < spec.test_adjacent; ++i) emit(Split::test, true);

    for (const auto& inst : out.corpus)
        if (inst.split == Split::test) out.outcomes.push_back({inst.id, rng.uniform() < spec.parser_accuracy});
    return out;
}

inline void write_corpus(std::ostream& out, const std::vector<Instance>& corpus) {
    for (const auto& inst : corpus) {
        nlohmann::json j{{"id", inst.id},
                         {"text", inst.raw_text},
                         {"predicates", inst.predicates},
                         {"split", std::string(to_string(inst.split))}};
        out << j.dump() << '\n';
    }
}

inline void write_parse_outcomes(std::ostream& out, const std::vector<ParseOutcome>& outcomes) {
    for (const auto& o : outcomes) out << nlohmann::json{{"id", o.id}, {"correct", o.parser_correct}}.dump() << '\n';
}

/**
 * Writes `vectors.txt`, one `<domain>.jsonl` corpus and `<domain>.outcomes.jsonl`
 * per domain, and a ready-to-run `config.json` into `dir`. All domains share
 * one vector file, so they share the topic geometry of the first spec.
 */
inline void write_synthetic_workspace(const std::filesystem::path& dir, const std::vector<SyntheticSpec>& specs) {
    if (specs.empty()) throw Error("no synthetic domains requested");
    std::filesystem::create_directories(dir);
    nlohmann::json config;
    config["paths"] = {{"pretrained", "vectors.txt"}, {"output_dir", "out"}};
    config["domains"] = nlohmann::json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto spec = specs[i];
        auto dom = make_synthetic_domain(spec);
        if (i == 0) save_embeddings((dir / "vectors.txt").string(), dom.pretrained);
        {
            std::ofstream out(dir / (spec.domain + ".jsonl"));
            write_corpus(out, dom.corpus);
        }
        {
            std::ofstream out(dir / (spec.domain + ".outcomes.jsonl"));
            write_parse_outcomes(out, dom.outcomes);
        }
        config["domains"].push_back({{"name", spec.domain},
                                     {"corpus", spec.domain + ".jsonl"},
                                     {"outcomes", spec.domain + ".outcomes.jsonl"},
                                     {"excluded_predicates", {kSyntheticExcluded}}});
    }
    std::ofstream out(dir / "config.json");
    out << config.dump(2) << '\n';
}

} // namespace adjscope
