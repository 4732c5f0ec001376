// Short PFNN vs WC-PFNN comparison on case9: 200 labeled LHS points, 90
// epochs with verification every 30, 40 enrichment points per round and 80
// extra labeled points for the baseline.
//
//   case9_enrichment [path/to/case9.m] [seed]

#include <wcpfnn/cli/comparison.hpp>
#include <wcpfnn/cli/config.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/enrich/enrich.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/matpower.hpp>

#include <spdlog/spdlog.h>

#include <cstdio>
#include <string>

using namespace wcpfnn;

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    const std::string path = argc > 1 ? argv[1] : std::string(WCPFNN_DATA_DIR) + "/case9.m";
    const std::string seed = argc > 2 ? argv[2] : "1";

    const auto cfg = cli::load_config("", {{"experiment.case", path},
                                           {"experiment.seed", seed},
                                           {"experiment.n", "200"},
                                           {"nn.epochs", "90"},
                                           {"enrich.initial_epochs", "30"},
                                           {"enrich.interval", "30"},
                                           {"enrich.points_per_round", "40"},
                                           {"enrich.baseline_extra_points", "80"}});
    cfg.check();
    const grid::GridModel g(grid::load_matpower_case(cfg.case_path));
    const auto dom = grid::make_input_domain(g.network, cfg.domain_low, cfg.domain_high);
    data::GenerateOptions go;
    go.fractions = cfg.fractions;
    const auto ds = data::generate_labeled_dataset(g.network, g.forms, dom, cfg.n, cfg.data_seed(),
                                                   data::make_opf_labeler(g.forms), go);
    const auto init = nn::make_pfnn_pair(g.forms, dom, cfg.arch, cfg.init_seed());
    const auto ec = cfg.enrich_config(g.network.base_mva);
    const auto tc = cfg.training_config();

    const auto wc = enrich::run_wc_pfnn(g.forms, ds, init, tc, ec);
    const auto pf = enrich::run_pfnn_baseline(g.network, g.forms, ds, init, tc, ec, data::make_opf_labeler(g.forms));

    for (const auto* log : {&pf.log, &wc.log}) {
        std::printf("%-8s test MAE %.3f%%\n", log->method.c_str(), log->final_mae_percent);
        for (const auto& r : log->rounds) {
            std::printf("  epoch %3d  train %4zu  v_g_max %9.4f MVA  d %.4f\n", r.epoch, r.train_size, r.v_g_max_mva,
                        r.d_normalized);
        }
    }
    const auto cmp = cli::compare_runs(pf.log, wc.log);
    if (cmp.reduction_percent) std::printf("worst-case violation reduction: %.1f%%\n", *cmp.reduction_percent);
    return 0;
}
