#pragma once

// File-backed stages behind the CLI. Each stage reads the artifacts of the
// previous one from the output directory:
//
//   models/<domain>.model                 train-mapping
//   encoded/<domain>/<scheme>.jsonl       encode (+ .skipped.jsonl sidecar)
//   scores/<domain>/<scheme>.jsonl        score
//   reports/{auc,downstream,ablation}.*   evaluate / ablate

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "adjscope/config.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/domain_mapping.hpp"
#include "adjscope/embeddings.hpp"
#include "adjscope/encoders.hpp"
#include "adjscope/harness.hpp"

namespace adjscope {

namespace fs = std::filesystem;

struct Layout {
    fs::path root;

    fs::path model(const std::string& domain) const { return root / "models" / (domain + ".model"); }
    fs::path domain_table(const std::string& domain) const { return root / "models" / (domain + ".domain.txt"); }
    fs::path encoded(const std::string& domain, Scheme s) const {
        return root / "encoded" / domain / (std::string(to_string(s)) + ".jsonl");
    }
    fs::path skipped(const std::string& domain, Scheme s) const {
        return root / "encoded" / domain / (std::string(to_string(s)) + ".skipped.jsonl");
    }
    fs::path scores(const std::string& domain, Scheme s) const {
        return root / "scores" / domain / (std::string(to_string(s)) + ".jsonl");
    }
    fs::path report(const std::string& name) const { return root / "reports" / name; }
};

namespace detail {

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

inline std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("missing artifact: " + p.string());
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(p.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

inline Split split_from(const nlohmann::json& j) {
    auto s = parse_split(j.at("split").get<std::string>());
    if (!s) throw Error("bad split in artifact");
    return *s;
}

inline Label label_from(const nlohmann::json& j) {
    return j.at("label").get<std::string>() == to_string(Label::domain_adjacent) ? Label::domain_adjacent
                                                                                 : Label::in_domain;
}

} // namespace detail

/// Loads a domain corpus, excludes its predicates and carves dev when absent.
inline DomainInput prepare_domain(const RunConfig& cfg, const DomainConfig& dc, std::ostream& log,
                                  bool with_outcomes = false) {
    Warnings warnings;
    const auto corpus = load_corpus(dc.corpus, &warnings);
    DomainInput d;
    d.name = dc.name;
    d.splits = exclude_predicates(corpus, SplitSpec(dc.name, dc.excluded_predicates), &warnings);
    if (d.splits.dev.empty()) carve_dev(d.splits, cfg.dev_fraction, dev_seed_for(cfg.eval_params(), dc.name));
    if (with_outcomes) d.outcomes = load_parse_outcomes(dc.outcomes);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    return d;
}

inline EmbeddingTable load_pretrained(const RunConfig& cfg, std::ostream& log) {
    LoadStats stats;
    auto t = load_embeddings(cfg.pretrained, std::nullopt, &stats);
    if (stats.duplicates) log << "warning: " << stats.duplicates << " duplicate tokens ignored in " << cfg.pretrained << '\n';
    return t;
}

// ---------------------------------------------------------------------------

inline void stage_train_mapping(const RunConfig& cfg, const EmbeddingTable& pretrained, std::ostream& log) {
    const Layout layout{cfg.output_dir};
    const auto params = cfg.eval_params();
    for (const auto& dc : cfg.domains) {
        const auto d = prepare_domain(cfg, dc, log);
        const auto mapping = train_mapping(d.splits.train, pretrained, mapping_params_for(params, dc.name));
        for (std::size_t e = 0; e < mapping.epoch_loss.size(); ++e)
            log << dc.name << " epoch " << (e + 1) << " loss " << std::setprecision(6) << mapping.epoch_loss[e] << '\n';
        auto out = detail::open_out(layout.model(dc.name), true);
        write_model(out, mapping);
        if (!out) throw Error("write failed: " + layout.model(dc.name).string());
        log << "wrote " << layout.model(dc.name).string() << '\n';
    }
}

/// Writes the materialized domain-specific table of one trained domain.
inline void export_domain_table(const RunConfig& cfg, const EmbeddingTable& pretrained, const std::string& domain,
                                const fs::path& dest) {
    const Layout layout{cfg.output_dir};
    const auto mapping = load_model(layout.model(domain).string());
    fs::create_directories(dest.parent_path().empty() ? fs::path(".") : dest.parent_path());
    save_embeddings(dest.string(), materialize_domain_table(mapping, pretrained));
}

inline nlohmann::json encoded_record(const EncodedInstance& e, Scheme scheme) {
    nlohmann::json j{{"id", e.instance->id},
                     {"split", std::string(to_string(e.instance->split))},
                     {"label", std::string(to_string(e.instance->label.value_or(Label::in_domain)))},
                     {"scheme", std::string(to_string(scheme))},
                     {"vector", e.embedding->vector},
                     {"weights", e.embedding->weights},
                     {"positions", e.embedding->positions}};
    if (e.embedding->uniform_fallback) j["uniform_fallback"] = true;
    return j;
}

inline void stage_encode(const RunConfig& cfg, Scheme scheme, const EmbeddingTable& pretrained, std::ostream& log) {
    const Layout layout{cfg.output_dir};
    for (const auto& dc : cfg.domains) {
        const auto d = prepare_domain(cfg, dc, log);
        EncoderContext ctx;
        ctx.pretrained = &pretrained;
        ctx.window = cfg.window;
        std::optional<EmbeddingTable> domain_table;
        std::optional<IdfTable> idf;
        if (scheme == Scheme::surprise) {
            const auto model_path = layout.model(dc.name);
            if (!fs::is_regular_file(model_path))
                throw Error("surprise encoding needs the domain mapping model " + model_path.string() +
                            " (run train-mapping first)");
            domain_table = materialize_domain_table(load_model(model_path.string()), pretrained);
            ctx.domain_table = &*domain_table;
        } else if (scheme == Scheme::frequency) {
            idf = IdfTable::build(d.splits.train);
            ctx.idf = &*idf;
        }
        const auto enc = encode_splits(d.splits, scheme, ctx);
        auto out = detail::open_out(layout.encoded(dc.name, scheme));
        auto skipped = detail::open_out(layout.skipped(dc.name, scheme));
        std::size_t written = 0, n_skipped = 0;
        for (const auto* part : {&enc.train, &enc.dev, &enc.test}) {
            for (const auto& e : *part) {
                if (e.embedding) {
                    out << encoded_record(e, scheme).dump() << '\n';
                    ++written;
                } else {
                    skipped << nlohmann::json{{"id", e.instance->id},
                                              {"split", std::string(to_string(e.instance->split))},
                                              {"reason", "no token has a pre-trained vector"}}
                                   .dump()
                            << '\n';
                    ++n_skipped;
                }
            }
        }
        log << dc.name << '/' << to_string(scheme) << ": encoded " << written << ", skipped " << n_skipped << '\n';
    }
}

inline void stage_score(const RunConfig& cfg, Scheme scheme, std::ostream& log) {
    const Layout layout{cfg.output_dir};
    const auto params = cfg.eval_params();
    for (const auto& dc : cfg.domains) {
        const auto d = prepare_domain(cfg, dc, log);
        std::unordered_map<std::string, Vector> vectors;
        for (const auto& rec : detail::read_jsonl(layout.encoded(dc.name, scheme)))
            vectors.emplace(rec.at("id").get<std::string>(), rec.at("vector").get<Vector>());
        // Rebuild the encoded view in split order from the stored vectors.
        EncodedSplits enc;
        auto fill = [&](const std::vector<Instance>& src, std::vector<EncodedInstance>& dst) {
            for (const auto& inst : src) {
                EncodedInstance e{&inst, std::nullopt};
                if (auto it = vectors.find(inst.id); it != vectors.end()) {
                    e.embedding = SentenceEmbedding{};
                    e.embedding->vector = it->second;
                    e.embedding->scheme = scheme;
                }
                dst.push_back(std::move(e));
            }
        };
        fill(d.splits.train, enc.train);
        fill(d.splits.dev, enc.dev);
        fill(d.splits.test, enc.test);
        const auto ds = score_encoded(enc, params, "dev:" + dc.name);

        auto out = detail::open_out(layout.scores(dc.name, scheme));
        std::size_t flagged = 0;
        for (const auto* part : {&ds.dev, &ds.test}) {
            for (const auto& s : *part) {
                const bool flag = s.score && exceeds(*s.score, ds.threshold);
                nlohmann::json j{{"id", s.id},
                                 {"split", std::string(to_string(s.split))},
                                 {"label", std::string(to_string(s.label))},
                                 {"score", s.score ? nlohmann::json(*s.score) : nlohmann::json(nullptr)},
                                 {"flagged", std::string(to_string(flag ? Label::domain_adjacent : Label::in_domain))},
                                 {"threshold", ds.threshold.value},
                                 {"calibration_fraction", ds.threshold.calibration_fraction},
                                 {"threshold_source", ds.threshold.source}};
                out << j.dump() << '\n';
                if (flag && s.split == Split::test) ++flagged;
            }
        }
        log << dc.name << '/' << to_string(scheme) << ": threshold " << std::setprecision(6) << ds.threshold.value
            << ", flagged " << flagged << " of " << ds.test.size() << " test sentences\n";
    }
}

/// Reads a scores file back into dev/test scores plus its threshold.
inline DomainScores read_scores(const fs::path& p) {
    DomainScores ds;
    bool have_threshold = false;
    for (const auto& rec : detail::read_jsonl(p)) {
        InstanceScore s;
        s.id = rec.at("id").get<std::string>();
        s.split = detail::split_from(rec);
        s.label = detail::label_from(rec);
        if (!rec.at("score").is_null()) s.score = rec.at("score").get<double>();
        if (!have_threshold) {
            ds.threshold.value = rec.at("threshold").get<double>();
            ds.threshold.calibration_fraction = rec.at("calibration_fraction").get<double>();
            ds.threshold.source = rec.at("threshold_source").get<std::string>();
            have_threshold = true;
        }
        (s.split == Split::dev ? ds.dev : ds.test).push_back(std::move(s));
    }
    if (!have_threshold) throw Error("empty scores file: " + p.string());
    return ds;
}

enum class EvalMode { auc, downstream };

inline std::vector<ResultRecord> stage_evaluate(const RunConfig& cfg, EvalMode mode, std::ostream& log,
                                                const std::string& report_name = "") {
    const Layout layout{cfg.output_dir};
    const auto params = cfg.eval_params();
    std::vector<ResultRecord> records;
    for (const auto& dc : cfg.domains) {
        if (mode == EvalMode::auc) {
            for (auto scheme : cfg.methods) {
                const auto ds = read_scores(layout.scores(dc.name, scheme));
                records.push_back({std::string(to_string(scheme)), dc.name, "auc", auc_of(ds.test)});
            }
        } else {
            const auto d = prepare_domain(cfg, dc, log, true);
            std::vector<std::pair<std::string, DomainScores>> scored;
            for (auto scheme : cfg.methods)
                scored.emplace_back(std::string(to_string(scheme)), read_scores(layout.scores(dc.name, scheme)));
            const auto mixed = mix_test_set(d.splits.test, cfg.adjacent_fraction, mix_seed_for(params, dc.name));
            if (mixed.with_replacement)
                log << "warning: " << dc.name << ": too few domain-adjacent test sentences, sampled with replacement\n";
            for (const auto& row : downstream_rows(mixed, scored, d.outcomes))
                records.push_back({row.method, dc.name, "accuracy", row.accuracy});
        }
    }
    const std::string name = report_name.empty() ? (mode == EvalMode::auc ? "auc" : "downstream") : report_name;
    const std::string metric = mode == EvalMode::auc ? "auc" : "accuracy";
    {
        auto out = detail::open_out(layout.report(name + ".jsonl"));
        write_records(out, records);
    }
    const auto table = render_table(records, metric);
    {
        auto out = detail::open_out(layout.report(name + ".txt"));
        out << table;
    }
    log << table;
    return records;
}

/// Every stage in order, for the configured methods.
inline std::vector<ResultRecord> run_end_to_end(const RunConfig& cfg, EvalMode mode, std::ostream& log,
                                                const std::string& report_name = "") {
    validate(cfg, {mode == EvalMode::downstream});
    const auto pretrained = load_pretrained(cfg, log);
    const bool needs_model = std::find(cfg.methods.begin(), cfg.methods.end(), Scheme::surprise) != cfg.methods.end();
    if (needs_model) stage_train_mapping(cfg, pretrained, log);
    for (auto scheme : cfg.methods) {
        stage_encode(cfg, scheme, pretrained, log);
        stage_score(cfg, scheme, log);
    }
    return stage_evaluate(cfg, mode, log, report_name);
}

/// All four representations across all configured domains, AUC only.
inline std::vector<ResultRecord> run_ablation(RunConfig cfg, std::ostream& log) {
    cfg.methods = {std::begin(kAllSchemes), std::end(kAllSchemes)};
    return run_end_to_end(cfg, EvalMode::auc, log, "ablation");
}

} // namespace adjscope
