#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adjscope/common.hpp"
#include "adjscope/dataset.hpp"
#include "adjscope/encoders.hpp"
#include "adjscope/harness.hpp"

namespace adjscope {

/// Bad configuration or usage; the CLI maps this to exit status 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline constexpr const char* kConfigEnvVar = "ADJSCOPE_CONFIG";

struct DomainConfig {
    std::string name;
    std::string corpus;
    std::set<std::string> excluded_predicates;
    std::string outcomes; // optional; required for downstream evaluation
};

struct RunConfig {
    std::string pretrained;
    std::string output_dir = "adjscope-out";

    std::size_t window = 2;          // surprise context window c
    std::size_t training_window = 2; // CBOW window
    std::size_t epochs = 10;
    double learning_rate = 0.05;
    std::size_t domain_dim = 0; // 0 = pre-trained dimension
    std::size_t k = 5;
    double flag_fraction = 0.03;
    double adjacent_fraction = 0.20;
    double dev_fraction = 0.20;
    std::uint64_t seed = 13;
    unsigned jobs = 1;

    std::vector<Scheme> methods{std::begin(kAllSchemes), std::end(kAllSchemes)};
    std::vector<DomainConfig> domains;

    EvalParams eval_params() const {
        EvalParams p;
        p.surprise_window = window;
        p.k = k;
        p.mapping.window = training_window;
        p.mapping.epochs = epochs;
        p.mapping.learning_rate = learning_rate;
        p.mapping.domain_dim = domain_dim;
        p.flag_fraction = flag_fraction;
        p.adjacent_fraction = adjacent_fraction;
        p.seed = seed;
        p.jobs = jobs;
        return p;
    }
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline void read_count(const nlohmann::json& obj, const char* key, std::size_t& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key + ": expected a non-negative integer");
    out = v.get<std::size_t>();
}

} // namespace detail

inline std::vector<Scheme> parse_methods(const std::vector<std::string>& names) {
    std::vector<Scheme> out;
    for (const auto& n : names) {
        auto s = parse_scheme(n);
        if (!s) throw ConfigError("unknown method '" + n + "' (expected surprise, cbow, frequency, pretrained-weights)");
        out.push_back(*s);
    }
    return out;
}

/**
 * Reads the JSON config. Sections: "paths", "hyperparams", "methods",
 * "domains". Relative paths resolve against the config file's directory.
 * Domains named after a benchmark domain may omit "excluded_predicates".
 */
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        detail::read_field(p, "pretrained", c.pretrained, "paths");
        detail::read_field(p, "output_dir", c.output_dir, "paths");
        c.pretrained = detail::resolve(base_dir, c.pretrained);
        c.output_dir = detail::resolve(base_dir, c.output_dir);
    }
    if (j.contains("hyperparams")) {
        const auto& h = j["hyperparams"];
        const std::string w = "hyperparams";
        detail::read_count(h, "window", c.window, w);
        detail::read_count(h, "training_window", c.training_window, w);
        detail::read_count(h, "epochs", c.epochs, w);
        detail::read_field(h, "learning_rate", c.learning_rate, w);
        detail::read_count(h, "domain_dim", c.domain_dim, w);
        detail::read_count(h, "k", c.k, w);
        detail::read_field(h, "flag_fraction", c.flag_fraction, w);
        detail::read_field(h, "adjacent_fraction", c.adjacent_fraction, w);
        detail::read_field(h, "dev_fraction", c.dev_fraction, w);
        detail::read_field(h, "seed", c.seed, w);
        detail::read_field(h, "jobs", c.jobs, w);
    }
    if (j.contains("methods")) {
        std::vector<std::string> names;
        detail::read_field(j, "methods", names, "config");
        c.methods = parse_methods(names);
    }
    if (j.contains("domains")) {
        if (!j["domains"].is_array()) throw ConfigError("config.domains must be a list");
        for (const auto& d : j["domains"]) {
            DomainConfig dc;
            detail::read_field(d, "name", dc.name, "domains[]");
            detail::read_field(d, "corpus", dc.corpus, "domains[" + dc.name + "]");
            detail::read_field(d, "outcomes", dc.outcomes, "domains[" + dc.name + "]");
            if (d.contains("excluded_predicates")) {
                detail::read_field(d, "excluded_predicates", dc.excluded_predicates, "domains[" + dc.name + "]");
            } else if (auto defaults = default_excluded_predicates(dc.name)) {
                dc.excluded_predicates = *defaults;
            }
            dc.corpus = detail::resolve(base_dir, dc.corpus);
            dc.outcomes = detail::resolve(base_dir, dc.outcomes);
            c.domains.push_back(std::move(dc));
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j, std::filesystem::path(path).parent_path());
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["paths"] = {{"pretrained", c.pretrained}, {"output_dir", c.output_dir}};
    j["hyperparams"] = {{"window", c.window},
                        {"training_window", c.training_window},
                        {"epochs", c.epochs},
                        {"learning_rate", c.learning_rate},
                        {"domain_dim", c.domain_dim},
                        {"k", c.k},
                        {"flag_fraction", c.flag_fraction},
                        {"adjacent_fraction", c.adjacent_fraction},
                        {"dev_fraction", c.dev_fraction},
                        {"seed", c.seed},
                        {"jobs", c.jobs}};
    j["methods"] = nlohmann::json::array();
    for (auto m : c.methods) j["methods"].push_back(std::string(to_string(m)));
    j["domains"] = nlohmann::json::array();
    for (const auto& d : c.domains) {
        nlohmann::json dj{{"name", d.name}, {"corpus", d.corpus}, {"excluded_predicates", d.excluded_predicates}};
        if (!d.outcomes.empty()) dj["outcomes"] = d.outcomes;
        j["domains"].push_back(std::move(dj));
    }
    return j;
}

struct ValidationNeeds {
    bool outcomes = false;
};

/// Checks ranges and that every referenced input exists. Throws ConfigError.
inline void validate(const RunConfig& c, ValidationNeeds needs = {}) {
    namespace fs = std::filesystem;
    auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
    if (c.pretrained.empty()) throw ConfigError("no pre-trained vectors path configured");
    if (!fs::is_regular_file(c.pretrained)) throw ConfigError("pre-trained vectors not found: " + c.pretrained);
    if (c.output_dir.empty()) throw ConfigError("no output directory configured");
    if (c.window == 0) throw ConfigError("window must be positive");
    if (c.training_window == 0) throw ConfigError("training_window must be positive");
    if (c.k == 0) throw ConfigError("k must be positive");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!in_unit(c.flag_fraction)) throw ConfigError("flag_fraction must be in (0,1)");
    if (!in_unit(c.adjacent_fraction)) throw ConfigError("adjacent_fraction must be in (0,1)");
    if (!in_unit(c.dev_fraction)) throw ConfigError("dev_fraction must be in (0,1)");
    if (c.jobs == 0) throw ConfigError("jobs must be positive");
    if (c.methods.empty()) throw ConfigError("no methods selected");
    if (c.domains.empty()) throw ConfigError("no domains configured");
    std::set<std::string> names;
    for (const auto& d : c.domains) {
        if (d.name.empty() || d.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") != std::string::npos)
            throw ConfigError("domain name '" + d.name + "' must be non-empty and use only [A-Za-z0-9_-]");
        if (!names.insert(d.name).second) throw ConfigError("duplicate domain '" + d.name + "'");
        if (d.excluded_predicates.empty())
            throw ConfigError("domain '" + d.name + "': no excluded predicates (and no built-in default)");
        if (!fs::is_regular_file(d.corpus)) throw ConfigError("domain '" + d.name + "': corpus not found: " + d.corpus);
        if (needs.outcomes) {
            if (d.outcomes.empty()) throw ConfigError("domain '" + d.name + "': no parse outcome file configured");
            if (!fs::is_regular_file(d.outcomes))
                throw ConfigError("domain '" + d.name + "': parse outcome file not found: " + d.outcomes);
        }
    }
}

} // namespace adjscope
