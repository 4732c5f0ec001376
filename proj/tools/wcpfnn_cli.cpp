// wcpfnn: dataset generation, PFNN / WC-PFNN training, worst-case
// verification and comparison reports.
//
//   wcpfnn generate --config exp.ini
//   wcpfnn train    --config exp.ini --method wc-pfnn
//   wcpfnn verify   --config exp.ini --model out/wc-pfnn_model.json --alpha 0.8
//   wcpfnn report   --config exp.ini --pfnn out/pfnn_runlog.json --wc out/wc-pfnn_runlog.json
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 verification not certified.

#include <wcpfnn/cli/commands.hpp>
#include <wcpfnn/cli/config.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

using namespace wcpfnn;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> sets;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config file");
    cmd->add_option("--seed", c.seed, "master seed (overrides experiment.seed)");
    cmd->add_option("--out", c.out, "output directory (overrides experiment.out)");
    cmd->add_option("--set", c.sets, "override a config key: section.key=value")->take_all();
    cmd->add_flag("-q,--quiet", c.quiet, "only log warnings and errors");
}

cli::ExperimentConfig make_config(const Common& c) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : c.sets) overrides.push_back(cli::parse_override(s));
    if (c.seed) overrides.emplace_back("experiment.seed", std::to_string(*c.seed));
    if (c.out) overrides.emplace_back("experiment.out", *c.out);
    return cli::load_config(c.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("wcpfnn"));

    CLI::App app{"Worst-case-aware power-flow neural network training and verification"};
    app.require_subcommand(1);
    Common common;

    auto* gen = app.add_subcommand("generate", "sample and label a dataset");
    add_common(gen, common);

    std::string method = "wc-pfnn";
    auto* train = app.add_subcommand("train", "train a PFNN or WC-PFNN");
    add_common(train, common);
    train->add_option("--method", method, "pfnn or wc-pfnn")->check(CLI::IsMember({"pfnn", "wc-pfnn"}));

    cli::VerifyRequest vreq;
    auto* ver = app.add_subcommand("verify", "worst-case violation and hypercube of a model");
    add_common(ver, common);
    ver->add_option("--model", vreq.model_path, "model JSON")->required();
    ver->add_option("--alpha", vreq.alpha, "hypercube violation fraction in (0,1)");
    ver->add_flag("--exact", vreq.compare_exact, "also fit the hypercube without ReLU status fixing");
    ver->add_option("--report", vreq.out_path, "report path (default <out>/verify.json)");

    std::string pfnn_log, wc_log;
    auto* rep = app.add_subcommand("report", "compare a PFNN and a WC-PFNN run log");
    add_common(rep, common);
    rep->add_option("--pfnn", pfnn_log, "PFNN run log JSON")->required();
    rep->add_option("--wc", wc_log, "WC-PFNN run log JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigError;
    }
    if (common.quiet) spdlog::set_level(spdlog::level::warn);

    try {
        const cli::ExperimentConfig cfg = make_config(common);
        if (gen->parsed()) return cli::cmd_generate(cfg);
        if (train->parsed()) return cli::cmd_train(cfg, cli::parse_method(method));
        if (ver->parsed()) return cli::cmd_verify(cfg, vreq);
        if (rep->parsed()) return cli::cmd_report(cfg, pfnn_log, wc_log);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return cli::exit_code_for(e);
    }
    return cli::kConfigError;
}
