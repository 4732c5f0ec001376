#include "test_support.hpp"
#include <wcpfnn/cli/commands.hpp>
#include <wcpfnn/cli/comparison.hpp>
#include <wcpfnn/cli/config.hpp>
#include <wcpfnn/data/csv.hpp>
#include <wcpfnn/nn/serialize.hpp>
#include <wcpfnn/nn/training.hpp>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace wcpfnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("wcpfnn_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI, returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(WCPFNN_CLI_PATH) + " " + args + " -q > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small but complete experiment on case9.
std::string small_config(const TempDir& dir) {
    const std::string path = dir / "exp.ini";
    write_file(path, "[experiment]\n"
                     "case = " + wcpfnn::testing::data_path("case9.m") + "\n"
                     "n = 12\nseed = 5\nout = out\n"
                     "[nn]\nhidden = 4,4\nepochs = 6\n"
                     "[enrich]\ninitial_epochs = 2\ninterval = 2\npoints_per_round = 5\nbaseline_extra_points = 0\n"
                     "[verify]\nwarm_start_samples = 16\n");
    return path;
}

// Drops timing fields so run outputs can be compared byte for byte.
nlohmann::json strip_timing(nlohmann::json j) {
    if (j.is_object()) {
        for (const char* k : {"wall_ms", "milp_wall_ms"}) j.erase(k);
        for (auto& [k, v] : j.items()) v = strip_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timing(v);
    }
    return j;
}

}  // namespace

TEST(Config, DefaultsMirrorLibrary) {
    const auto c = cli::load_config("");
    EXPECT_EQ(c.n, 1000u);
    EXPECT_DOUBLE_EQ(c.fractions.train, 0.5);
    EXPECT_DOUBLE_EQ(c.fractions.validation, 0.2);
    EXPECT_DOUBLE_EQ(c.fractions.test, 0.3);
    EXPECT_EQ(c.training.epochs, 600);
    EXPECT_EQ(c.enrich.initial_epochs, 200);
    EXPECT_EQ(c.enrich.interval, 200);
    EXPECT_EQ(c.enrich.points_per_round, 1000u);
    EXPECT_EQ(c.enrich.baseline_extra_points, 2000u);
    EXPECT_EQ(c.arch.hidden, (std::vector<Eigen::Index>{20, 20, 20}));
}

TEST(Config, FileAndOverrides) {
    TempDir dir("cfg");
    write_file(dir / "a.ini", "[experiment]\ncase = case.m\nn = 50\n[nn]\nhidden = 8, 8\nlambda_pf = 0.5\n"
                              "[verify]\nfix_statuses = false\nnode_limit = 77\ntighten_bounds = false\n");
    const auto c = cli::load_config(dir / "a.ini", {{"nn.lambda_pf", "0.25"}, {"experiment.seed", "9"}});
    EXPECT_EQ(c.case_path, dir / "case.m");
    EXPECT_EQ(c.n, 50u);
    EXPECT_EQ(c.arch.hidden, (std::vector<Eigen::Index>{8, 8}));
    EXPECT_DOUBLE_EQ(c.training.lambda_pf, 0.25);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_FALSE(c.enrich.verification.hypercube.fix_statuses);
    EXPECT_FALSE(c.enrich.verification.worst_case.tighten_bounds);
    EXPECT_FALSE(c.enrich.verification.hypercube.tighten_bounds);
    EXPECT_EQ(c.enrich.verification.worst_case.milp.node_limit, 77);
    EXPECT_EQ(c.enrich.verification.hypercube.milp.node_limit, 77);
}

TEST(Config, Errors) {
    TempDir dir("cfgerr");
    write_file(dir / "bad.ini", "[nn]\nepochz = 3\n");
    EXPECT_THROW(cli::load_config(dir / "bad.ini"), ConfigError);
    write_file(dir / "val.ini", "[nn]\nepochs = three\n");
    EXPECT_THROW(cli::load_config(dir / "val.ini"), ConfigError);
    EXPECT_THROW(cli::load_config(dir / "missing.ini"), ConfigError);
    EXPECT_THROW(cli::parse_override("nolabel"), ConfigError);

    auto c = cli::load_config("", {{"experiment.case", dir / "nope.m"}});
    EXPECT_THROW(c.check(), ConfigError);
    c = cli::load_config("", {{"experiment.case", wcpfnn::testing::data_path("case9.m")}, {"split.train", "0.6"}});
    EXPECT_THROW(c.check(), ConfigError);
    c = cli::load_config("", {{"experiment.case", wcpfnn::testing::data_path("case9.m")}});
    EXPECT_NO_THROW(c.check());
}

TEST(Comparison, ReductionPercent) {
    EXPECT_NEAR(*cli::reduction_percent(1280.0, 304.0), 76.25, 1e-12);
    EXPECT_NEAR(*cli::reduction_percent(6.08, 4.18), 31.25, 1e-9);
    EXPECT_EQ(*cli::reduction_percent(5.0, 5.0), 0.0);
    EXPECT_EQ(*cli::reduction_percent(0.0, 0.0), 0.0);
    EXPECT_FALSE(cli::reduction_percent(0.0, 1.0).has_value());
}

TEST(Comparison, CurvesNormalizedByFirstRound) {
    enrich::RunLog a, b;
    a.final_mae_percent = 1.5;
    b.final_mae_percent = 1.7;
    for (int r = 0; r < 3; ++r) {
        enrich::RoundLog x;
        x.epoch = 200 * (r + 1);
        x.v_g_max_mva = 100.0 - 10.0 * r;
        a.rounds.push_back(x);
        x.v_g_max_mva = 80.0 - 30.0 * r;
        x.d_fraction_nominal = 0.1 / (r + 1);
        b.rounds.push_back(x);
    }
    const auto rep = cli::compare_runs(a, b);
    EXPECT_DOUBLE_EQ(rep.pfnn.v_g_mva, 80.0);
    EXPECT_DOUBLE_EQ(rep.wc.v_g_mva, 20.0);
    EXPECT_DOUBLE_EQ(*rep.reduction_percent, 75.0);
    EXPECT_DOUBLE_EQ(rep.wc.mae_percent, 1.7);
    EXPECT_NEAR(*rep.wc.d_fraction_nominal, 0.1 / 3, 1e-15);
    ASSERT_EQ(rep.curves.size(), 3u);
    EXPECT_EQ(rep.curves[0].epoch, 200);
    EXPECT_DOUBLE_EQ(*rep.curves[0].wc_relative, 1.0);
    EXPECT_DOUBLE_EQ(*rep.curves[2].pfnn_relative, 0.8);
    EXPECT_DOUBLE_EQ(*rep.curves[2].wc_relative, 0.25);

    const auto same = cli::compare_runs(a, a);
    EXPECT_EQ(*same.reduction_percent, 0.0);
}

TEST(Cli, VerifyToyModel) {
    TempDir dir("toy");
    const std::string model = wcpfnn::testing::fixture_path("abs_model.json");
    ASSERT_EQ(run_cli("verify --model " + model + " --alpha 0.8 --report " + (dir / "v.json")), 0);
    const auto j = nn::read_json_file(dir / "v.json");
    EXPECT_NEAR(j.at("v_g_max_pu").get<double>(), 0.5, 1e-6);
    EXPECT_NEAR(j.at("v_g_max_mva").get<double>(), 50.0, 1e-4);
    EXPECT_NEAR(j.at("D_WC")[0].get<double>(), 2.0, 1e-6);
    EXPECT_EQ(j.at("side"), "upper");
    EXPECT_TRUE(j.at("certified").get<bool>());
    EXPECT_NEAR(j.at("hypercube").at("d_normalized").get<double>(), 0.1, 1e-6);
    EXPECT_NEAR(j.at("hypercube").at("witness")[0].get<double>(), 1.9, 1e-6);
    EXPECT_NEAR(j.at("hypercube").at("d_fraction_nominal").get<double>(), 0.1, 1e-6);
    EXPECT_DOUBLE_EQ(j.at("hypercube").at("alpha").get<double>(), 0.8);
}

TEST(Cli, VerifyInBoundsModel) {
    TempDir dir("inb");
    ASSERT_EQ(run_cli("verify --model " + wcpfnn::testing::fixture_path("abs_model_in_bounds.json") + " --report " + (dir / "v.json")), 0);
    const auto j = nn::read_json_file(dir / "v.json");
    EXPECT_EQ(j.at("v_g_max_pu").get<double>(), 0.0);
    EXPECT_TRUE(j.at("hypercube").is_null());
    EXPECT_EQ(j.at("nodes").get<long>(), 0);
}

TEST(Cli, ExitCodes) {
    TempDir dir("exit");
    const std::string model = wcpfnn::testing::fixture_path("abs_model.json");
    EXPECT_EQ(run_cli("verify --model " + model + " --alpha 1.0 --out " + dir.path.string()), 2);
    EXPECT_EQ(run_cli("verify --model " + (dir / "none.json") + " --out " + dir.path.string()), 2);
    EXPECT_EQ(run_cli("train --set experiment.case=" + (dir / "missing.m") + " --out " + dir.path.string()), 2);
    EXPECT_EQ(run_cli("train --set nn.epochz=3"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    // A one-node budget cannot close the toy MILP.
    EXPECT_EQ(run_cli("verify --model " + model + " --set verify.node_limit=1 --set verify.warm_start_samples=0 --out " +
                      dir.path.string()),
              4);
    const auto j = nn::read_json_file(dir / "verify.json");
    EXPECT_FALSE(j.at("certified").get<bool>());
}

TEST(Cli, GenerateIsDeterministic) {
    TempDir dir("gen");
    const std::string cfg = small_config(dir);
    ASSERT_EQ(run_cli("generate --config " + cfg), 0);
    const std::string first = read_file(dir / "out/dataset.csv");
    const std::string prov = read_file(dir / "out/dataset.json");
    ASSERT_EQ(run_cli("generate --config " + cfg), 0);
    EXPECT_EQ(read_file(dir / "out/dataset.csv"), first);
    EXPECT_EQ(read_file(dir / "out/dataset.json"), prov);

    const auto c = grid::load_matpower_case(wcpfnn::testing::data_path("case9.m"));
    const auto ds = data::load_csv(dir / "out/dataset.csv", c);
    EXPECT_EQ(ds.size(), 12u);
    EXPECT_EQ(ds.count(data::Split::Train), 6u);
    EXPECT_EQ(ds.count(data::Split::Validation), 2u);
    EXPECT_EQ(ds.count(data::Split::Test), 4u);

    ASSERT_EQ(run_cli("generate --config " + cfg + " --seed 6"), 0);
    EXPECT_NE(read_file(dir / "out/dataset.csv"), first);
}

TEST(Cli, TrainVerifyReportPipeline) {
    TempDir dir("pipe");
    const std::string cfg = small_config(dir);
    ASSERT_EQ(run_cli("generate --config " + cfg), 0);
    ASSERT_EQ(run_cli("train --config " + cfg + " --method wc-pfnn"), 0);
    ASSERT_EQ(run_cli("train --config " + cfg + " --method pfnn"), 0);
    for (const char* f : {"wc-pfnn_model.json", "wc-pfnn_runlog.json", "wc-pfnn_runlog.csv", "pfnn_model.json",
                          "pfnn_runlog.json", "pfnn_runlog.csv"}) {
        EXPECT_TRUE(fs::exists(dir / ("out/" + std::string(f)))) << f;
    }
    const auto wc = enrich::run_log_from_json(nn::read_json_file(dir / "out/wc-pfnn_runlog.json"));
    ASSERT_EQ(wc.rounds.size(), 3u);
    EXPECT_EQ(wc.rounds[0].epoch, 2);
    EXPECT_EQ(wc.rounds[1].epoch, 4);
    EXPECT_EQ(wc.rounds[2].epoch, 6);
    EXPECT_EQ(wc.epochs.size(), 6u);

    // Determinism: identical outputs apart from timing fields.
    const std::string model = read_file(dir / "out/wc-pfnn_model.json");
    const std::string csv = read_file(dir / "out/wc-pfnn_runlog.csv");
    const auto log = strip_timing(nn::read_json_file(dir / "out/wc-pfnn_runlog.json"));
    ASSERT_EQ(run_cli("train --config " + cfg + " --method wc-pfnn"), 0);
    EXPECT_EQ(read_file(dir / "out/wc-pfnn_model.json"), model);
    EXPECT_EQ(read_file(dir / "out/wc-pfnn_runlog.csv"), csv);
    EXPECT_EQ(strip_timing(nn::read_json_file(dir / "out/wc-pfnn_runlog.json")).dump(), log.dump());

    const int vcode = run_cli("verify --config " + cfg + " --model " + (dir / "out/wc-pfnn_model.json"));
    EXPECT_TRUE(vcode == 0 || vcode == 4);
    const auto v = nn::read_json_file(dir / "out/verify.json");
    EXPECT_DOUBLE_EQ(v.at("v_g_max_pu").get<double>(), wc.rounds.back().v_g_max_pu);

    ASSERT_EQ(run_cli("report --config " + cfg + " --pfnn " + (dir / "out/pfnn_runlog.json") + " --wc " +
                      (dir / "out/wc-pfnn_runlog.json")),
              0);
    const auto rep = nn::read_json_file(dir / "out/report.json");
    EXPECT_TRUE(rep.contains("reduction_percent"));
    EXPECT_EQ(rep.at("curves").size(), 3u);
    const std::string curves = read_file(dir / "out/curves.csv");
    EXPECT_EQ(curves.substr(0, curves.find('\n')), "epoch,pfnn_v_g_mva,wc_pfnn_v_g_mva,pfnn_relative,wc_pfnn_relative");
}

TEST(Cli, PfnnWithoutExtrasMatchesLibraryTraining) {
    TempDir dir("lib");
    const std::string cfg_path = small_config(dir);
    ASSERT_EQ(run_cli("generate --config " + cfg_path), 0);
    ASSERT_EQ(run_cli("train --config " + cfg_path + " --method pfnn"), 0);

    const auto cfg = cli::load_config(cfg_path);
    grid::GridModel g(grid::load_matpower_case(cfg.case_path));
    const auto dom = grid::make_input_domain(g.network, cfg.domain_low, cfg.domain_high);
    data::Dataset ds = cli::load_dataset(cfg, g, dom);
    auto pair = nn::make_pfnn_pair(g.forms, dom, cfg.arch, cfg.init_seed());
    nn::train(pair, ds, g.forms, cfg.training_config());
    EXPECT_EQ(read_file(dir / "out/pfnn_model.json"), nn::to_json(pair).dump(1) + "\n");
}
