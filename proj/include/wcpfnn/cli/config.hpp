#pragma once

// Experiment configuration: flat key = value lines under [section] headers.
//
//   [experiment]  case, n, seed, out, threads, dataset
//   [domain]      low, high                 (fractions of nominal load)
//   [split]       train, validation, test
//   [nn]          hidden (comma list), epochs, learning_rate, beta1, beta2,
//                 epsilon, lambda0, lambda_pf, batch_size
//   [enrich]      initial_epochs, interval, points_per_round, alpha,
//                 gaussian_sigma, baseline_extra_points, top_k
//   [verify]      gap_tol, node_limit, time_limit_s, warm_start_samples,
//                 fix_statuses, fix_threshold, local_half_width, compare_exact,
//                 tighten_bounds
//
// Overrides ("section.key=value") are applied after the file. Relative paths
// in the file resolve against the file's directory.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/enrich/enrich.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/nn/training.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace wcpfnn::cli {

struct ExperimentConfig {
    std::string case_path;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    unsigned threads = 1;
    std::string dataset_path;  // empty: <out>/dataset.csv
    double domain_low = 0.6;
    double domain_high = 1.0;
    data::SplitFractions fractions;
    nn::ArchitectureConfig arch;
    nn::TrainingConfig training;
    enrich::EnrichConfig enrich;

    std::string dataset_file() const {
        return dataset_path.empty() ? (std::filesystem::path(out_dir) / "dataset.csv").string() : dataset_path;
    }

    // Seeds of the individual stages, all derived from `seed`.
    std::uint64_t data_seed() const { return seed; }
    std::uint64_t init_seed() const { return derive_seed(seed, 1); }
    std::uint64_t enrich_seed() const { return derive_seed(seed, 2); }
    std::uint64_t verify_seed() const { return derive_seed(seed, 3); }

    // Library configs with the derived seeds filled in.
    enrich::EnrichConfig enrich_config(double base_mva) const {
        enrich::EnrichConfig e = enrich;
        e.total_epochs = training.epochs;
        e.seed = enrich_seed();
        e.verification.worst_case.seed = verify_seed();
        e.verification.worst_case.base_mva = base_mva;
        return e;
    }

    nn::TrainingConfig training_config() const {
        nn::TrainingConfig t = training;
        t.seed = derive_seed(seed, 4);
        return t;
    }

    void check(bool need_case = true) const {
        if (need_case) {
            if (case_path.empty()) throw ConfigError("experiment.case is not set");
            if (!std::filesystem::exists(case_path)) throw ConfigError("case file '" + case_path + "' does not exist");
        }
        if (n == 0) throw ConfigError("experiment.n must be >= 1");
        if (!(domain_low <= domain_high)) throw ConfigError("domain.low must not exceed domain.high");
        if (arch.hidden.empty()) throw ConfigError("nn.hidden must list at least one layer");
        for (auto h : arch.hidden) {
            if (h < 1) throw ConfigError("nn.hidden sizes must be >= 1");
        }
        fractions.check();
        training.check();
        enrich::EnrichConfig e = enrich;
        e.total_epochs = training.epochs;
        e.check();
    }
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("invalid value '" + text + "' for " + key);
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + key);
}

inline std::vector<Eigen::Index> parse_list(const std::string& key, const std::string& text) {
    std::vector<Eigen::Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_value<Eigen::Index>(key, item));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

inline std::string resolve(const std::string& base_dir, const std::string& p) {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

// Sets one key; `base_dir` resolves relative paths.
inline void apply(ExperimentConfig& c, const std::string& key, const std::string& value, const std::string& base_dir) {
    auto num = [&](auto& field) { field = parse_value<std::remove_reference_t<decltype(field)>>(key, value); };
    auto& t = c.training;
    auto& e = c.enrich;
    auto& w = e.verification.worst_case;
    auto& h = e.verification.hypercube;
    if (key == "experiment.case") c.case_path = resolve(base_dir, value);
    else if (key == "experiment.n") num(c.n);
    else if (key == "experiment.seed") num(c.seed);
    else if (key == "experiment.out") c.out_dir = resolve(base_dir, value);
    else if (key == "experiment.threads") num(c.threads);
    else if (key == "experiment.dataset") c.dataset_path = resolve(base_dir, value);
    else if (key == "domain.low") num(c.domain_low);
    else if (key == "domain.high") num(c.domain_high);
    else if (key == "split.train") num(c.fractions.train);
    else if (key == "split.validation") num(c.fractions.validation);
    else if (key == "split.test") num(c.fractions.test);
    else if (key == "nn.hidden") c.arch.hidden = parse_list(key, value);
    else if (key == "nn.epochs") num(t.epochs);
    else if (key == "nn.learning_rate") num(t.learning_rate);
    else if (key == "nn.beta1") num(t.beta1);
    else if (key == "nn.beta2") num(t.beta2);
    else if (key == "nn.epsilon") num(t.epsilon);
    else if (key == "nn.lambda0") num(t.lambda0);
    else if (key == "nn.lambda_pf") num(t.lambda_pf);
    else if (key == "nn.batch_size") num(t.batch_size);
    else if (key == "enrich.initial_epochs") num(e.initial_epochs);
    else if (key == "enrich.interval") num(e.interval);
    else if (key == "enrich.points_per_round") num(e.points_per_round);
    else if (key == "enrich.alpha") num(e.alpha_wc);
    else if (key == "enrich.gaussian_sigma") num(e.gaussian_sigma);
    else if (key == "enrich.baseline_extra_points") num(e.baseline_extra_points);
    else if (key == "enrich.top_k") num(e.top_k);
    else if (key == "verify.gap_tol") num(w.milp.gap_tol);
    else if (key == "verify.node_limit") num(w.milp.node_limit);
    else if (key == "verify.time_limit_s") num(w.milp.time_limit_s);
    else if (key == "verify.warm_start_samples") num(w.warm_start_samples);
    else if (key == "verify.fix_statuses") h.fix_statuses = parse_bool(key, value);
    else if (key == "verify.tighten_bounds") w.tighten_bounds = h.tighten_bounds = parse_bool(key, value);
    else if (key == "verify.fix_threshold") num(h.fix_threshold);
    else if (key == "verify.local_half_width") num(h.local_half_width);
    else if (key == "verify.compare_exact") e.verification.compare_exact = parse_bool(key, value);
    else throw ConfigError("unknown configuration key '" + key + "'");
    // The hypercube MILPs share the worst-case MILP budgets.
    h.milp = w.milp;
}

}  // namespace detail

// Splits "section.key=value".
inline std::pair<std::string, std::string> parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || text.find('.') > eq) {
        throw ConfigError("override '" + text + "' is not of the form section.key=value");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

// Reads a config file (empty path: defaults only) and applies overrides.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    ExperimentConfig c;
    if (!path.empty()) {
        if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::read_ini(path, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("cannot parse config: ") + e.what());
        }
        const std::string dir = std::filesystem::path(path).parent_path().string();
        for (const auto& [section, entries] : tree) {
            if (entries.empty() && !entries.data().empty()) {
                throw ConfigError("key '" + section + "' is outside any [section]");
            }
            for (const auto& [key, value] : entries) detail::apply(c, section + "." + key, value.data(), dir);
        }
    }
    for (const auto& [k, v] : overrides) detail::apply(c, k, v, "");
    return c;
}

}  // namespace wcpfnn::cli
