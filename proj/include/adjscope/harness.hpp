#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/detector.hpp"
#include "adjscope/domain_mapping.hpp"
#include "adjscope/embeddings.hpp"
#include "adjscope/encoders.hpp"
#include "adjscope/random.hpp"

namespace adjscope {

// ---------------------------------------------------------------------------
// ROC / AUC

struct ScoredLabel {
    double score = 0.0;
    Label label = Label::in_domain;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/**
 * ROC with domain-adjacent as the positive class, one point per distinct
 * score. Tied scores move FPR and TPR together, so the trapezoid over a tie
 * block counts each tied pair as one half. The area is accumulated in
 * integer pair counts and divided once at the end.
 */
inline RocCurve compute_roc_auc(std::vector<ScoredLabel> scores) {
    std::size_t pos = 0, neg = 0;
    for (const auto& s : scores) {
        if (!std::isfinite(s.score)) throw Error("compute_roc_auc: non-finite score");
        (s.label == Label::domain_adjacent ? pos : neg)++;
    }
    if (pos == 0 || neg == 0) throw Error("compute_roc_auc: both labels must be present");
    std::sort(scores.begin(), scores.end(), [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    std::uint64_t tp = 0, fp = 0;
    unsigned __int128 twice_area = 0; // sum of dFP * (TP_prev + TP_cur)
    std::size_t i = 0;
    while (i < scores.size()) {
        std::uint64_t dtp = 0, dfp = 0;
        const double v = scores[i].score;
        for (; i < scores.size() && scores[i].score == v; ++i)
            (scores[i].label == Label::domain_adjacent ? dtp : dfp)++;
        twice_area += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos)});
    }
    const long double denom = 2.0L * static_cast<long double>(pos) * static_cast<long double>(neg);
    roc.auc = static_cast<double>(static_cast<long double>(twice_area) / denom);
    return roc;
}

// ---------------------------------------------------------------------------
// Downstream accuracy

struct ParseOutcome {
    std::string id;
    bool parser_correct = false;
};

/// Line-delimited `{"id": ..., "correct": true|false}`.
inline std::vector<ParseOutcome> read_parse_outcomes(std::istream& in, const std::string& source = "outcomes") {
    std::vector<ParseOutcome> out;
    std::unordered_map<std::string, bool> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto where = source + ":" + std::to_string(line_no) + ": ";
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(where + "malformed record: " + e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("correct") || !rec["correct"].is_boolean())
            throw Error(where + "expected {\"id\", \"correct\": bool}");
        ParseOutcome o;
        if (rec["id"].is_string()) o.id = rec["id"].get<std::string>();
        else if (rec["id"].is_number_integer()) o.id = std::to_string(rec["id"].get<long long>());
        else throw Error(where + "field 'id' must be a string or integer");
        o.parser_correct = rec["correct"].get<bool>();
        if (seen.contains(o.id)) throw Error(where + "duplicate outcome for id '" + o.id + "'");
        seen.emplace(o.id, o.parser_correct);
        out.push_back(std::move(o));
    }
    return out;
}

inline std::vector<ParseOutcome> load_parse_outcomes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open parse outcome file: " + path);
    return read_parse_outcomes(in, path);
}

/**
 * Flagged instances receive the empty parse. An instance is correct when it
 * is flagged and truly adjacent, or unflagged, in-domain and parsed
 * correctly by the external parser. Outcomes for adjacent instances are
 * never consulted.
 */
inline double downstream_accuracy(const std::vector<Instance>& test, const std::vector<bool>& flagged,
                                  const std::vector<ParseOutcome>& outcomes) {
    if (test.empty()) throw Error("downstream_accuracy: empty test set");
    if (flagged.size() != test.size()) throw Error("downstream_accuracy: one flag per test instance required");
    std::unordered_map<std::string, bool> correct;
    for (const auto& o : outcomes) correct.emplace(o.id, o.parser_correct);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& inst = test[i];
        if (!inst.label) throw Error("downstream_accuracy: unlabeled instance '" + inst.id + "'");
        const bool adjacent = *inst.label == Label::domain_adjacent;
        if (flagged[i]) {
            if (adjacent) ++hits;
            continue;
        }
        if (adjacent) continue;
        auto it = correct.find(inst.id);
        if (it == correct.end()) throw Error("downstream_accuracy: no parse outcome for instance '" + inst.id + "'");
        if (it->second) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

inline std::vector<bool> oracle_flags(const std::vector<Instance>& test) {
    std::vector<bool> f;
    f.reserve(test.size());
    for (const auto& inst : test) f.push_back(inst.label == Label::domain_adjacent);
    return f;
}

// ---------------------------------------------------------------------------
// Per-domain scoring

struct EvalParams {
    std::size_t surprise_window = 2;
    std::size_t k = 5;
    MappingHyperparams mapping;
    double flag_fraction = 0.03;
    double adjacent_fraction = 0.20;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// Mapping hyperparameters with the seed fanned out for one domain.
inline MappingHyperparams mapping_params_for(const EvalParams& params, const std::string& domain) {
    auto hp = params.mapping;
    hp.seed = derive_seed(params.seed, "mapping/" + domain);
    return hp;
}

inline std::uint64_t dev_seed_for(const EvalParams& params, const std::string& domain) {
    return derive_seed(params.seed, "dev/" + domain);
}

inline std::uint64_t mix_seed_for(const EvalParams& params, const std::string& domain) {
    return derive_seed(params.seed, "mix/" + domain);
}

/// Inputs for one domain after predicate exclusion and dev carving.
struct DomainInput {
    std::string name;
    ExperimentSplits splits;
    std::vector<ParseOutcome> outcomes; // only needed downstream
};

struct EncodedInstance {
    const Instance* instance = nullptr;
    std::optional<SentenceEmbedding> embedding; // empty when every token is out of vocabulary
};

struct EncodedSplits {
    std::vector<EncodedInstance> train, dev, test;
};

/// Encodes every split; all-OOV sentences are kept as entries without an embedding.
inline EncodedSplits encode_splits(const ExperimentSplits& splits, Scheme scheme, const EncoderContext& ctx) {
    EncodedSplits out;
    auto run = [&](const std::vector<Instance>& src, std::vector<EncodedInstance>& dst) {
        dst.reserve(src.size());
        for (const auto& inst : src) {
            EncodedInstance e{&inst, std::nullopt};
            bool any_known = std::any_of(inst.tokens.begin(), inst.tokens.end(),
                                         [&](const std::string& t) { return ctx.pretrained->contains(t); });
            if (any_known) e.embedding = encode(scheme, inst.tokens, ctx);
            dst.push_back(std::move(e));
        }
    };
    run(splits.train, out.train);
    run(splits.dev, out.dev);
    run(splits.test, out.test);
    return out;
}

struct InstanceScore {
    std::string id;
    Split split = Split::test;
    Label label = Label::in_domain;
    std::optional<double> score; // empty when the sentence could not be encoded
};

struct DomainScores {
    std::vector<InstanceScore> dev;
    std::vector<InstanceScore> test;
    Threshold threshold;
};

inline NeighborIndex index_from_train(const std::vector<EncodedInstance>& train, std::size_t k) {
    std::vector<Vector> vecs;
    std::vector<std::string> ids;
    for (const auto& e : train) {
        if (!e.embedding) continue;
        vecs.push_back(e.embedding->vector);
        ids.push_back(e.instance->id);
    }
    return build_index(std::move(vecs), k, std::move(ids));
}

/// Builds the index over train, scores dev and test, calibrates on dev.
inline DomainScores score_encoded(const EncodedSplits& enc, const EvalParams& params, const std::string& source) {
    const auto index = index_from_train(enc.train, params.k);
    auto run = [&](const std::vector<EncodedInstance>& src, Split split) {
        std::vector<Vector> queries;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src[i].embedding) {
                queries.push_back(src[i].embedding->vector);
                where.push_back(i);
            }
        }
        const auto scores = score_batch(index, queries, params.jobs);
        std::vector<InstanceScore> out(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i].id = src[i].instance->id;
            out[i].split = split;
            out[i].label = src[i].instance->label.value_or(Label::in_domain);
        }
        for (std::size_t q = 0; q < where.size(); ++q) out[where[q]].score = scores[q];
        return out;
    };
    DomainScores ds;
    ds.dev = run(enc.dev, Split::dev);
    ds.test = run(enc.test, Split::test);
    std::vector<double> dev_values;
    for (const auto& s : ds.dev)
        if (s.score) dev_values.push_back(*s.score);
    ds.threshold = calibrate_threshold(std::move(dev_values), params.flag_fraction, source);
    return ds;
}

inline double auc_of(const std::vector<InstanceScore>& test) {
    std::vector<ScoredLabel> sl;
    for (const auto& s : test)
        if (s.score) sl.push_back({*s.score, s.label});
    return compute_roc_auc(std::move(sl)).auc;
}

/// Trains (for surprise) and materializes whatever the scheme needs, then scores.
inline DomainScores score_domain(const ExperimentSplits& splits, Scheme scheme, const EmbeddingTable& pretrained,
                                 const EvalParams& params, const DomainMapping* mapping = nullptr,
                                 EncodedSplits* encoded_out = nullptr) {
    EncoderContext ctx;
    ctx.pretrained = &pretrained;
    ctx.window = params.surprise_window;
    std::optional<DomainMapping> trained;
    std::optional<EmbeddingTable> domain_table;
    std::optional<IdfTable> idf;
    if (scheme == Scheme::surprise) {
        if (!mapping) {
            trained = train_mapping(splits.train, pretrained, params.mapping);
            mapping = &*trained;
        }
        domain_table = materialize_domain_table(*mapping, pretrained);
        ctx.domain_table = &*domain_table;
    }
    if (scheme == Scheme::frequency) {
        idf = IdfTable::build(splits.train);
        ctx.idf = &*idf;
    }
    auto enc = encode_splits(splits, scheme, ctx);
    auto ds = score_encoded(enc, params, "dev");
    if (encoded_out) *encoded_out = std::move(enc);
    return ds;
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRecord {
    std::string method;
    std::string domain;
    std::string metric;
    double value = 0.0;
};

struct DownstreamRow {
    std::string method;
    double accuracy = 0.0;
};

inline constexpr const char* kNoFilter = "NoFilter";
inline constexpr const char* kOracle = "Oracle";

/**
 * Fixed-width table: one row per method, one column per domain, in first-
 * seen order. Missing cells print as "-".
 */
inline std::string render_table(const std::vector<ResultRecord>& records, const std::string& metric) {
    std::vector<std::string> methods, domains;
    std::map<std::pair<std::string, std::string>, double> cell;
    for (const auto& r : records) {
        if (r.metric != metric) continue;
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        if (std::find(domains.begin(), domains.end(), r.domain) == domains.end()) domains.push_back(r.domain);
        cell[{r.method, r.domain}] = r.value;
    }
    std::size_t first = std::string("method").size();
    for (const auto& m : methods) first = std::max(first, m.size());
    std::vector<std::size_t> widths;
    for (const auto& d : domains) widths.push_back(std::max<std::size_t>(d.size(), 5));

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(first)) << "method";
    for (std::size_t c = 0; c < domains.size(); ++c) out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << domains[c];
    out << '\n';
    for (const auto& m : methods) {
        out << std::left << std::setw(static_cast<int>(first)) << m;
        for (std::size_t c = 0; c < domains.size(); ++c) {
            out << "  " << std::right << std::setw(static_cast<int>(widths[c]));
            auto it = cell.find({m, domains[c]});
            if (it == cell.end()) {
                out << "-";
            } else {
                std::ostringstream v;
                v << std::fixed << std::setprecision(3) << it->second;
                out << v.str();
            }
        }
        out << '\n';
    }
    return out.str();
}

inline nlohmann::json to_json(const ResultRecord& r) {
    return {{"method", r.method}, {"domain", r.domain}, {"metric", r.metric}, {"value", r.value}};
}

inline void write_records(std::ostream& out, const std::vector<ResultRecord>& records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Evaluations over in-memory domains

/// AUC of every (method, domain) cell. Mappings are trained per domain once.
inline std::vector<ResultRecord> run_direct_eval(const std::vector<DomainInput>& domains,
                                                 const std::vector<Scheme>& methods, const EmbeddingTable& pretrained,
                                                 const EvalParams& params) {
    std::vector<ResultRecord> out;
    for (const auto& d : domains) {
        std::optional<DomainMapping> mapping;
        for (auto scheme : methods) {
            try {
                if (scheme == Scheme::surprise && !mapping)
                    mapping = train_mapping(d.splits.train, pretrained, mapping_params_for(params, d.name));
                const auto ds = score_domain(d.splits, scheme, pretrained, params, mapping ? &*mapping : nullptr);
                out.push_back({std::string(to_string(scheme)), d.name, "auc", auc_of(ds.test)});
            } catch (const Error& e) {
                throw Error("method " + std::string(to_string(scheme)) + ", domain " + d.name + ": " + e.what());
            }
        }
    }
    return out;
}

/**
 * Accuracy on the mixed test set for a scored domain: NoFilter, Oracle, then
 * one row per method. Flags come from strict exceedance of each method's
 * dev-calibrated threshold; unscored sentences are never flagged.
 */
inline std::vector<DownstreamRow> downstream_rows(const MixedTestSet& mixed,
                                                  const std::vector<std::pair<std::string, DomainScores>>& methods,
                                                  const std::vector<ParseOutcome>& outcomes) {
    std::vector<DownstreamRow> rows;
    rows.push_back({kNoFilter, downstream_accuracy(mixed.instances, std::vector<bool>(mixed.instances.size(), false), outcomes)});
    rows.push_back({kOracle, downstream_accuracy(mixed.instances, oracle_flags(mixed.instances), outcomes)});
    for (const auto& [name, ds] : methods) {
        std::unordered_map<std::string, std::optional<double>> by_id;
        for (const auto& s : ds.test) by_id.emplace(s.id, s.score);
        std::vector<bool> flags;
        for (const auto& inst : mixed.instances) {
            auto it = by_id.find(inst.id);
            if (it == by_id.end()) throw Error("no score for test instance '" + inst.id + "'");
            flags.push_back(it->second && exceeds(*it->second, ds.threshold));
        }
        rows.push_back({name, downstream_accuracy(mixed.instances, flags, outcomes)});
    }
    return rows;
}

inline std::vector<ResultRecord> run_downstream_eval(const std::vector<DomainInput>& domains,
                                                     const std::vector<Scheme>& methods,
                                                     const EmbeddingTable& pretrained, const EvalParams& params) {
    std::vector<ResultRecord> out;
    for (const auto& d : domains) {
        std::vector<std::pair<std::string, DomainScores>> scored;
        std::optional<DomainMapping> mapping;
        for (auto scheme : methods) {
            try {
                if (scheme == Scheme::surprise && !mapping)
                    mapping = train_mapping(d.splits.train, pretrained, mapping_params_for(params, d.name));
                scored.emplace_back(std::string(to_string(scheme)),
                                    score_domain(d.splits, scheme, pretrained, params, mapping ? &*mapping : nullptr));
            } catch (const Error& e) {
                throw Error("method " + std::string(to_string(scheme)) + ", domain " + d.name + ": " + e.what());
            }
        }
        const auto mixed = mix_test_set(d.splits.test, params.adjacent_fraction, mix_seed_for(params, d.name));
        for (const auto& row : downstream_rows(mixed, scored, d.outcomes))
            out.push_back({row.method, d.name, "accuracy", row.accuracy});
    }
    return out;
}

} // namespace adjscope
