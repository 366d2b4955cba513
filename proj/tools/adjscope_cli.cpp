// adjscope: detect domain-adjacent sentences and evaluate detectors.
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adjscope/config.hpp"
#include "adjscope/pipeline.hpp"
#include "adjscope/synthetic.hpp"

namespace {

using namespace adjscope;

struct Overrides {
    std::string config;
    std::optional<std::string> pretrained;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<std::size_t> window;
    std::optional<std::size_t> training_window;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    std::optional<std::size_t> domain_dim;
    std::optional<double> flag_fraction;
    std::optional<double> adjacent_fraction;
    std::optional<double> dev_fraction;
    std::vector<std::string> methods;
    std::vector<std::string> domains;
    std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, std::string("JSON config file (default: $") + kConfigEnvVar + ")");
    cmd->add_option("--pretrained", o.pretrained, "pre-trained vector file");
    cmd->add_option("-o,--output-dir", o.output_dir, "directory for models, encodings, scores and reports");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("-k,--k", o.k, "neighbors per query");
    cmd->add_option("--window", o.window, "surprise context window");
    cmd->add_option("--training-window", o.training_window, "CBOW training window");
    cmd->add_option("--epochs", o.epochs, "CBOW epochs");
    cmd->add_option("--learning-rate", o.learning_rate, "CBOW SGD learning rate");
    cmd->add_option("--domain-dim", o.domain_dim, "domain-specific dimension (0 = pre-trained)");
    cmd->add_option("--flag-fraction", o.flag_fraction, "share of dev sentences flagged at the threshold");
    cmd->add_option("--adjacent-fraction", o.adjacent_fraction, "domain-adjacent share of the downstream test set");
    cmd->add_option("--dev-fraction", o.dev_fraction, "share of train carved into dev when the corpus has none");
    cmd->add_option("--methods", o.methods, "methods to run")->delimiter(',');
    cmd->add_option("--domains", o.domains, "restrict to these configured domains")->delimiter(',');
    cmd->add_option("-j,--jobs", o.jobs, "worker threads for scoring");
}

RunConfig resolve_config(const Overrides& o) {
    RunConfig cfg;
    std::string path = o.config;
    if (path.empty())
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    if (!path.empty()) cfg = load_config(path);
    if (o.pretrained) cfg.pretrained = *o.pretrained;
    if (o.output_dir) cfg.output_dir = *o.output_dir;
    if (o.seed) cfg.seed = *o.seed;
    if (o.k) cfg.k = *o.k;
    if (o.window) cfg.window = *o.window;
    if (o.training_window) cfg.training_window = *o.training_window;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
    if (o.domain_dim) cfg.domain_dim = *o.domain_dim;
    if (o.flag_fraction) cfg.flag_fraction = *o.flag_fraction;
    if (o.adjacent_fraction) cfg.adjacent_fraction = *o.adjacent_fraction;
    if (o.dev_fraction) cfg.dev_fraction = *o.dev_fraction;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (!o.methods.empty()) cfg.methods = parse_methods(o.methods);
    if (!o.domains.empty()) {
        std::vector<DomainConfig> kept;
        for (const auto& name : o.domains) {
            auto it = std::find_if(cfg.domains.begin(), cfg.domains.end(),
                                   [&](const DomainConfig& d) { return d.name == name; });
            if (it == cfg.domains.end()) throw ConfigError("domain '" + name + "' is not configured");
            kept.push_back(*it);
        }
        cfg.domains = std::move(kept);
    }
    return cfg;
}

Scheme scheme_arg(const std::string& name) {
    auto s = parse_scheme(name);
    if (!s) throw ConfigError("unknown scheme '" + name + "'");
    return *s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-adjacent sentence detection with surprise-weighted embeddings"};
    app.require_subcommand(1);
    Overrides o;

    auto* train = app.add_subcommand("train-mapping", "learn the pre-trained -> domain-specific mapping per domain");
    add_common(train, o);

    std::string scheme_name;
    auto* encode = app.add_subcommand("encode", "encode every split of every domain");
    add_common(encode, o);
    encode->add_option("-s,--scheme", scheme_name, "surprise | cbow | frequency | pretrained-weights")->required();

    auto* score = app.add_subcommand("score", "build the kNN index, calibrate on dev, score test");
    add_common(score, o);
    score->add_option("-s,--scheme", scheme_name, "scheme whose encodings to score")->required();

    std::string mode_name = "auc";
    bool end_to_end = false;
    auto* evaluate = app.add_subcommand("evaluate", "compute AUC or downstream accuracy reports");
    add_common(evaluate, o);
    evaluate->add_option("-m,--mode", mode_name, "auc | downstream")->check(CLI::IsMember({"auc", "downstream"}));
    evaluate->add_flag("--end-to-end", end_to_end, "run train-mapping, encode and score first");

    auto* ablate = app.add_subcommand("ablate", "end-to-end AUC for all four representations");
    add_common(ablate, o);

    std::string export_domain, export_path;
    auto* export_cmd = app.add_subcommand("export-table", "write a domain's materialized domain-specific vectors");
    add_common(export_cmd, o);
    export_cmd->add_option("--domain", export_domain, "configured domain")->required();
    export_cmd->add_option("--out", export_path, "destination text file")->required();

    std::string synth_dir;
    std::size_t synth_domains = 1;
    std::uint64_t synth_seed = 1;
    auto* synth = app.add_subcommand("synth", "write a planted-surprise synthetic workspace");
    synth->add_option("--out", synth_dir, "workspace directory")->required();
    synth->add_option("--domains", synth_domains, "number of synthetic domains")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            std::vector<SyntheticSpec> specs;
            for (std::size_t i = 0; i < synth_domains; ++i) {
                SyntheticSpec s;
                s.domain = "synthetic" + std::to_string(i + 1);
                s.seed = derive_seed(synth_seed, s.domain);
                specs.push_back(s);
            }
            write_synthetic_workspace(synth_dir, specs);
            std::cout << "wrote " << synth_dir << "/config.json\n";
            return 0;
        }

        const RunConfig cfg = resolve_config(o);
        if (train->parsed()) {
            validate(cfg);
            stage_train_mapping(cfg, load_pretrained(cfg, std::cerr), std::cout);
        } else if (encode->parsed()) {
            validate(cfg);
            const auto scheme = scheme_arg(scheme_name);
            stage_encode(cfg, scheme, load_pretrained(cfg, std::cerr), std::cout);
        } else if (score->parsed()) {
            validate(cfg);
            stage_score(cfg, scheme_arg(scheme_name), std::cout);
        } else if (evaluate->parsed()) {
            const auto mode = mode_name == "auc" ? EvalMode::auc : EvalMode::downstream;
            if (end_to_end) {
                run_end_to_end(cfg, mode, std::cout);
            } else {
                validate(cfg, {mode == EvalMode::downstream});
                stage_evaluate(cfg, mode, std::cout);
            }
        } else if (ablate->parsed()) {
            run_ablation(cfg, std::cout);
        } else if (export_cmd->parsed()) {
            validate(cfg);
            export_domain_table(cfg, load_pretrained(cfg, std::cerr), export_domain, export_path);
            std::cout << "wrote " << export_path << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
