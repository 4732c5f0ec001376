#pragma once

// The generate / train / verify / report commands. Each returns a process
// exit code; errors propagate as exceptions and map through exit_code_for.
//
// Outputs under the configured out directory:
//   generate  dataset.csv, dataset.json (provenance)
//   train     <method>_model.json, <method>_runlog.json, <method>_runlog.csv
//   verify    verify.json
//   report    report.json, curves.csv

#include <wcpfnn/cli/comparison.hpp>
#include <wcpfnn/cli/config.hpp>
#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/data/csv.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/enrich/enrich.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/matpower.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/nn/serialize.hpp>
#include <wcpfnn/verify/report.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace wcpfnn::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNumericalError = 3, kNotCertified = 4 };

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericalError*>(&e)) return kNumericalError;
    if (dynamic_cast<const Error*>(&e)) return kConfigError;  // config, parse, validation, I/O
    return kNumericalError;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string out_file(const ExperimentConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

struct Problem {
    grid::GridModel grid;
    grid::InputDomain domain;
};

inline Problem load_problem(const ExperimentConfig& cfg) {
    grid::GridModel g(grid::load_matpower_case(cfg.case_path));
    grid::InputDomain dom = grid::make_input_domain(g.network, cfg.domain_low, cfg.domain_high);
    return {std::move(g), std::move(dom)};
}

}  // namespace detail

inline int cmd_generate(const ExperimentConfig& cfg) {
    cfg.check();
    const detail::Problem p = detail::load_problem(cfg);
    data::GenerateOptions go;
    go.threads = cfg.threads;
    go.fractions = cfg.fractions;
    data::Dataset ds = data::generate_labeled_dataset(p.grid.network, p.grid.forms, p.domain, cfg.n, cfg.data_seed(),
                                                      data::make_opf_labeler(p.grid.forms), go);
    const std::string path = cfg.dataset_file();
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) detail::ensure_dir(parent.string());
    data::save_csv(ds, p.grid.network, path);
    nlohmann::json prov = ds.provenance;
    prov["domain"] = {{"low", cfg.domain_low}, {"high", cfg.domain_high}};
    prov["counts"] = {{"train", ds.count(data::Split::Train)},
                      {"validation", ds.count(data::Split::Validation)},
                      {"test", ds.count(data::Split::Test)}};
    nn::write_json_file(std::filesystem::path(path).replace_extension(".json").string(), prov);
    spdlog::info("wrote {} samples to {}", ds.size(), path);
    return kSuccess;
}

enum class Method { Pfnn, WcPfnn };

inline Method parse_method(const std::string& s) {
    if (s == "pfnn") return Method::Pfnn;
    if (s == "wc-pfnn") return Method::WcPfnn;
    throw ConfigError("unknown method '" + s + "' (expected pfnn or wc-pfnn)");
}

inline const char* to_string(Method m) { return m == Method::Pfnn ? "pfnn" : "wc-pfnn"; }

// Reads the dataset of an experiment; datasets without split tags get them
// from the configured fractions.
inline data::Dataset load_dataset(const ExperimentConfig& cfg, const grid::GridModel& g, const grid::InputDomain& dom) {
    const std::string path = cfg.dataset_file();
    if (!std::filesystem::exists(path)) throw ConfigError("dataset '" + path + "' does not exist (run generate first)");
    bool missing = false;
    data::Dataset ds = data::load_csv(path, g.network, &missing);
    if (missing) data::assign_splits(ds, derive_seed(cfg.data_seed(), 100), cfg.fractions);
    ds.domain = dom;
    ds.check(g.forms);
    return ds;
}

inline int cmd_train(const ExperimentConfig& cfg, Method method) {
    cfg.check();
    const detail::Problem p = detail::load_problem(cfg);
    data::Dataset ds = load_dataset(cfg, p.grid, p.domain);
    nn::PfnnPair init = nn::make_pfnn_pair(p.grid.forms, p.domain, cfg.arch, cfg.init_seed());
    const enrich::EnrichConfig ec = cfg.enrich_config(p.grid.network.base_mva);
    const nn::TrainingConfig tc = cfg.training_config();
    enrich::RunResult res =
        method == Method::WcPfnn
            ? enrich::run_wc_pfnn(p.grid.forms, std::move(ds), std::move(init), tc, ec)
            : enrich::run_pfnn_baseline(p.grid.network, p.grid.forms, std::move(ds), std::move(init), tc, ec,
                                        data::make_opf_labeler(p.grid.forms), cfg.threads);
    detail::ensure_dir(cfg.out_dir);
    const std::string stem = to_string(method);
    nn::write_json_file(detail::out_file(cfg, stem + "_model.json"), nn::to_json(res.pair));
    nn::write_json_file(detail::out_file(cfg, stem + "_runlog.json"), enrich::to_json(res.log));
    std::ofstream csv(detail::out_file(cfg, stem + "_runlog.csv"), std::ios::binary);
    if (!csv) throw Error("cannot write the run log CSV");
    enrich::write_run_csv(csv, res.log);
    if (!res.log.certified()) {
        spdlog::warn("at least one verification round was not certified");
        return kNotCertified;
    }
    return kSuccess;
}

struct VerifyRequest {
    std::string model_path;
    std::optional<double> alpha;
    bool compare_exact = false;
    std::string out_path;  // empty: <out>/verify.json
};

// Verifies the generation network of a model file. A model file is either a
// trained pair ({"format_version", "net_G", "net_v"}) checked against the
// configured case, or a standalone problem {"net", "box": {lower, upper},
// "limits": {lower, upper}, "base_mva"?, "nominal"?}.
inline int cmd_verify(const ExperimentConfig& cfg, const VerifyRequest& req) {
    const nlohmann::json j = nn::read_json_file(req.model_path);
    verify::VerificationConfig vc = cfg.enrich.verification;
    vc.hypercube.alpha = req.alpha.value_or(cfg.enrich.alpha_wc);
    vc.compare_exact = vc.compare_exact || req.compare_exact;
    vc.worst_case.seed = cfg.verify_seed();
    if (!(vc.hypercube.alpha > 0.0 && vc.hypercube.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");

    nn::MlpParams net;
    verify::InputBox box;
    verify::GenerationLimits lim;
    std::optional<Eigen::VectorXd> nominal;
    try {
        if (j.contains("net")) {
            net = nn::mlp_from_json(j.at("net"));
            box = {nn::detail::json_vector(j.at("box").at("lower"), "box.lower"),
                   nn::detail::json_vector(j.at("box").at("upper"), "box.upper")};
            lim = {nn::detail::json_vector(j.at("limits").at("lower"), "limits.lower"),
                   nn::detail::json_vector(j.at("limits").at("upper"), "limits.upper")};
            vc.worst_case.base_mva = j.value("base_mva", vc.worst_case.base_mva);
            if (j.contains("nominal")) nominal = nn::detail::json_vector(j.at("nominal"), "nominal");
        } else {
            cfg.check();
            net = nn::pair_from_json(j).net_G;
            const detail::Problem p = detail::load_problem(cfg);
            box = verify::InputBox::from(p.domain);
            lim = {p.grid.forms.gen_lower, p.grid.forms.gen_upper};
            nominal = p.domain.nominal;
            vc.worst_case.base_mva = p.grid.network.base_mva;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
    box.check();
    const verify::VerificationReport rep = verify::verify_network(net, box, lim, vc, nominal ? &*nominal : nullptr);
    std::string out = req.out_path;
    if (out.empty()) {
        detail::ensure_dir(cfg.out_dir);
        out = detail::out_file(cfg, "verify.json");
    }
    nn::write_json_file(out, verify::to_json(rep));
    spdlog::info("v_g_max {:.6g} p.u. ({:.6g} MVA), certified {}", rep.worst_case.v_g_max, rep.worst_case.v_g_max_mva,
                 rep.certified());
    return rep.certified() ? kSuccess : kNotCertified;
}

inline int cmd_report(const ExperimentConfig& cfg, const std::string& pfnn_log, const std::string& wc_log) {
    const enrich::RunLog a = enrich::run_log_from_json(nn::read_json_file(pfnn_log));
    const enrich::RunLog b = enrich::run_log_from_json(nn::read_json_file(wc_log));
    const ComparisonReport rep = compare_runs(a, b);
    detail::ensure_dir(cfg.out_dir);
    nn::write_json_file(detail::out_file(cfg, "report.json"), to_json(rep));
    std::ofstream csv(detail::out_file(cfg, "curves.csv"), std::ios::binary);
    if (!csv) throw Error("cannot write curves.csv");
    write_curves_csv(csv, rep);
    if (rep.reduction_percent) spdlog::info("worst-case violation reduction {:.2f}%", *rep.reduction_percent);
    return kSuccess;
}

}  // namespace wcpfnn::cli
