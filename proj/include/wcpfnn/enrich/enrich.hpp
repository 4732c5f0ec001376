#pragma once

// Worst-case-driven dataset enrichment. Training runs T epochs; after epochs
// T_int, T_int + T_enr, ... (< T) the generation network is verified, a
// hypercube is fitted around the worst-case witness and unlabeled points drawn
// from it join the training split. The baseline instead adds labeled LHS
// points before training and only verifies at the same epochs.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/network_case.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/nn/training.hpp>
#include <wcpfnn/verify/report.hpp>

#include <Eigen/Dense>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace wcpfnn::enrich {

struct EnrichConfig {
    int total_epochs = 600;    // T
    int initial_epochs = 200;  // T_int
    int interval = 200;        // T_enr
    std::size_t points_per_round = 1000;
    double alpha_wc = 0.8;
    double gaussian_sigma = 0.5;  // sampling std as a fraction of d
    std::size_t baseline_extra_points = 2000;
    int top_k = 1;  // hypercubes sampled per round
    std::uint64_t seed = 0;
    verify::VerificationConfig verification;

    void check() const {
        if (total_epochs < 0) throw ConfigError("total_epochs must be nonnegative");
        if (initial_epochs > total_epochs) throw ConfigError("initial_epochs must not exceed total_epochs");
        if (interval < 1) throw ConfigError("interval must be >= 1");
        if (!(alpha_wc > 0.0 && alpha_wc < 1.0)) throw ConfigError("alpha_wc must lie in (0,1)");
        if (!(gaussian_sigma >= 0.0)) throw ConfigError("gaussian_sigma must be nonnegative");
        if (top_k < 1) throw ConfigError("top_k must be >= 1");
    }

    // Epochs with a verification round: the enrichment epochs plus T.
    std::set<int> round_epochs() const {
        std::set<int> e = nn::enrichment_epochs(total_epochs, initial_epochs, interval);
        if (total_epochs >= 1) e.insert(total_epochs);
        return e;
    }
};

// n points ~ Normal(D_WC, (sigma d)^2) per coordinate, d converted from
// normalized units to raw demand through the network's input map, each
// clipped to [D_WC - d, D_WC + d] intersected with the domain.
inline std::vector<Eigen::VectorXd> sample_hypercube_gaussian(const verify::HypercubeResult& hc, const nn::AffineMap& input_map,
                                                              const grid::InputDomain& domain, std::size_t n, double sigma,
                                                              std::uint64_t seed) {
    if (n == 0) throw ValidationError("sample count must be >= 1");
    const Eigen::VectorXd& c = hc.center;
    require_dimension(static_cast<std::size_t>(c.size()), static_cast<std::size_t>(domain.dim()), "hypercube center");
    const Eigen::VectorXd base = c.cwiseMax(domain.lower).cwiseMin(domain.upper);
    if (!(hc.d_normalized > 0.0)) {
        spdlog::warn("hypercube has zero width, returning {} copies of the worst-case point", n);
        return std::vector<Eigen::VectorXd>(n, base);
    }
    Eigen::VectorXd half(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double s = std::abs(input_map.scale[i]);
        half[i] = s > 0.0 ? hc.d_normalized / s : 0.0;
    }
    const Eigen::VectorXd lo = (c - half).cwiseMax(domain.lower);
    const Eigen::VectorXd hi = (c + half).cwiseMin(domain.upper);
    Rng rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Eigen::VectorXd x(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double z = rng.normal();
            x[i] = half[i] > 0.0 ? std::clamp(c[i] + sigma * half[i] * z, lo[i], hi[i]) : base[i];
        }
        out.push_back(std::move(x));
    }
    return out;
}

struct RoundLog {
    int epoch = 0;
    double v_g_max_pu = 0.0;
    double v_g_max_mva = 0.0;
    double d_normalized = 0.0;
    std::optional<double> d_fraction_nominal;
    std::size_t train_size = 0;  // after this round's additions
    std::size_t points_added = 0;
    double milp_wall_ms = 0.0;
    bool certified = true;
    nlohmann::json verification;
};

struct RunLog {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t initial_train_size = 0;
    std::vector<nn::LossBreakdown> epochs;
    std::vector<RoundLog> rounds;
    double final_mae_percent = 0.0;
    std::size_t test_size = 0;

    bool certified() const {
        return std::all_of(rounds.begin(), rounds.end(), [](const RoundLog& r) { return r.certified; });
    }
};

struct RunResult {
    nn::PfnnPair pair;
    RunLog log;
    data::Dataset dataset;  // final, including added points
};

// Mean absolute generation error on the test split in percent of each
// output's range (G_max - G_min); zero-range outputs are skipped.
inline double test_mae_percent(const nn::PfnnPair& pair, const data::Dataset& ds, const grid::QuadraticFormModel& qf) {
    double sum = 0.0;
    std::size_t count = 0;
    const Eigen::VectorXd range = qf.gen_upper - qf.gen_lower;
    for (const data::Sample* s : ds.select(data::Split::Test)) {
        if (!s->labeled) continue;
        const Eigen::VectorXd g = nn::forward(pair.net_G, s->demand);
        for (Eigen::Index m = 0; m < g.size(); ++m) {
            if (!(range[m] > 0.0)) continue;
            sum += std::abs(g[m] - (*s->generation)[m]) / range[m];
            ++count;
        }
    }
    return count == 0 ? 0.0 : 100.0 * sum / static_cast<double>(count);
}

namespace detail {

inline verify::GenerationLimits limits_of(const grid::QuadraticFormModel& qf) { return {qf.gen_lower, qf.gen_upper}; }

inline RoundLog verification_round(int epoch, const nn::PfnnPair& pair, const data::Dataset& ds,
                                   const grid::QuadraticFormModel& qf, const EnrichConfig& cfg,
                                   verify::VerificationReport* out) {
    verify::VerificationConfig vc = cfg.verification;
    vc.hypercube.alpha = cfg.alpha_wc;
    const verify::InputBox box = verify::InputBox::from(ds.domain);
    verify::VerificationReport rep = verify::verify_network(pair.net_G, box, limits_of(qf), vc, &ds.domain.nominal);
    RoundLog r;
    r.epoch = epoch;
    r.v_g_max_pu = rep.worst_case.v_g_max;
    r.v_g_max_mva = rep.worst_case.v_g_max_mva;
    if (rep.hypercube) {
        r.d_normalized = rep.hypercube->d_normalized;
        r.d_fraction_nominal = rep.hypercube->d_fraction_nominal;
    }
    r.milp_wall_ms = rep.worst_case.wall_ms;
    r.certified = rep.certified();
    r.verification = verify::to_json(rep);
    r.train_size = ds.count(data::Split::Train);
    spdlog::info("epoch {}: v_g_max {:.6g} MVA, d {:.4g}, certified {}", epoch, r.v_g_max_mva, r.d_normalized, r.certified);
    if (out) *out = std::move(rep);
    return r;
}

// Hypercubes to sample around: the global worst case first, then (top_k > 1)
// the best witnesses of other component/side MILPs.
inline std::vector<verify::HypercubeResult> sampling_cubes(const nn::PfnnPair& pair, const verify::VerificationReport& rep,
                                                           const data::Dataset& ds, const grid::QuadraticFormModel& qf,
                                                           const EnrichConfig& cfg) {
    std::vector<verify::HypercubeResult> cubes;
    if (!rep.hypercube) return cubes;
    cubes.push_back(*rep.hypercube);
    if (cfg.top_k <= 1) return cubes;
    std::vector<const verify::ComponentSolve*> extra;
    for (const auto& s : rep.worst_case.solves) {
        if (!s.witness || !(s.value > 0.0)) continue;
        if (s.component == rep.worst_case.component && s.side == rep.worst_case.side) continue;
        extra.push_back(&s);
    }
    std::stable_sort(extra.begin(), extra.end(), [](auto* a, auto* b) { return a->value > b->value; });
    verify::HypercubeOptions ho = cfg.verification.hypercube;
    ho.alpha = cfg.alpha_wc;
    const verify::InputBox box = verify::InputBox::from(ds.domain);
    for (const auto* s : extra) {
        if (static_cast<int>(cubes.size()) >= cfg.top_k) break;
        verify::WorstCaseResult wc = rep.worst_case;
        wc.v_g_max = s->value;
        wc.d_wc = *s->witness;
        wc.component = s->component;
        wc.side = s->side;
        cubes.push_back(verify::fit_hypercube(pair.net_G, box, limits_of(qf), wc, ho, &ds.domain.nominal));
    }
    return cubes;
}

inline void append_enrichment(data::Dataset& ds, const std::vector<Eigen::VectorXd>& points) {
    for (const auto& p : points) {
        data::Sample s;
        s.demand = p;
        s.labeled = false;
        s.origin = data::Origin::Enrichment;
        s.split = data::Split::Train;
        ds.samples.push_back(std::move(s));
    }
}

inline RunResult run(const char* method, const grid::QuadraticFormModel& qf, data::Dataset ds, nn::PfnnPair pair,
                     nn::TrainingConfig tc, const EnrichConfig& cfg, bool enrich, std::size_t initial_train_size) {
    cfg.check();
    tc.epochs = cfg.total_epochs;
    RunResult res;
    res.log.method = method;
    res.log.seed = cfg.seed;
    res.log.initial_train_size = initial_train_size;

    nn::TrainingHooks hooks;
    hooks.epochs = nn::enrichment_epochs(cfg.total_epochs, cfg.initial_epochs, cfg.interval);
    hooks.on_epoch = [&](int epoch, nn::PfnnPair& p, data::Dataset& d) {
        verify::VerificationReport rep;
        RoundLog r = verification_round(epoch, p, d, qf, cfg, &rep);
        if (enrich && cfg.points_per_round > 0) {
            if (!(rep.worst_case.v_g_max > 0.0)) {
                spdlog::info("epoch {}: no generation violation, nothing to sample", epoch);
            } else {
                const auto cubes = sampling_cubes(p, rep, d, qf, cfg);
                const std::size_t k = cubes.size();
                for (std::size_t c = 0; c < k; ++c) {
                    const std::size_t n = cfg.points_per_round / k + (c < cfg.points_per_round % k ? 1 : 0);
                    if (n == 0) continue;
                    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * 64 + c);
                    append_enrichment(d, sample_hypercube_gaussian(cubes[c], p.net_G.input_map, d.domain, n,
                                                                   cfg.gaussian_sigma, seed));
                    r.points_added += n;
                }
            }
            r.train_size = d.count(data::Split::Train);
        }
        res.log.rounds.push_back(std::move(r));
    };
    const nn::TrainResult tr = nn::train(pair, ds, qf, tc, hooks);
    res.log.epochs = tr.history;
    if (cfg.total_epochs >= 1) res.log.rounds.push_back(verification_round(cfg.total_epochs, pair, ds, qf, cfg, nullptr));
    res.log.final_mae_percent = test_mae_percent(pair, ds, qf);
    res.log.test_size = ds.count(data::Split::Test);
    res.pair = std::move(pair);
    res.dataset = std::move(ds);
    return res;
}

}  // namespace detail

// WC-PFNN: training with worst-case-driven enrichment of the training split.
inline RunResult run_wc_pfnn(const grid::QuadraticFormModel& qf, data::Dataset ds, nn::PfnnPair init,
                             const nn::TrainingConfig& tc, const EnrichConfig& cfg) {
    ds.check(qf);
    const std::size_t n0 = ds.count(data::Split::Train);
    return detail::run("wc-pfnn", qf, std::move(ds), std::move(init), tc, cfg, true, n0);
}

// PFNN baseline: baseline_extra_points labeled LHS points join the training
// split up front, then plain training with verification at the same epochs.
inline RunResult run_pfnn_baseline(const grid::NetworkCase& c, const grid::QuadraticFormModel& qf, data::Dataset ds,
                                   nn::PfnnPair init, const nn::TrainingConfig& tc, const EnrichConfig& cfg,
                                   const data::Labeler& labeler, unsigned threads = 1) {
    ds.check(qf);
    const std::size_t n0 = ds.count(data::Split::Train);
    if (cfg.baseline_extra_points > 0) {
        data::GenerateOptions go;
        go.threads = threads;
        go.fractions = {1.0, 0.0, 0.0};
        data::Dataset extra = data::generate_labeled_dataset(c, qf, ds.domain, cfg.baseline_extra_points,
                                                             derive_seed(cfg.seed, 2000), labeler, go);
        for (auto& s : extra.samples) {
            s.split = data::Split::Train;
            ds.samples.push_back(std::move(s));
        }
        ds.provenance["baseline_extra_points"] = extra.size();
    }
    return detail::run("pfnn", qf, std::move(ds), std::move(init), tc, cfg, false, n0);
}

// Serialization ------------------------------------------------------------

inline nlohmann::json to_json(const RoundLog& r) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"v_g_max_pu", r.v_g_max_pu},
                        {"v_g_max_mva", r.v_g_max_mva},
                        {"d_normalized", r.d_normalized},
                        {"d_fraction_nominal", nullptr},
                        {"train_size", r.train_size},
                        {"points_added", r.points_added},
                        {"milp_wall_ms", r.milp_wall_ms},
                        {"certified", r.certified},
                        {"verification", r.verification}};
    if (r.d_fraction_nominal) j["d_fraction_nominal"] = *r.d_fraction_nominal;
    return j;
}

inline nlohmann::json to_json(const RunLog& log) {
    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        const auto& l = log.epochs[i];
        epochs.push_back({{"epoch", i + 1}, {"l0_G", l.l0_G}, {"l0_v", l.l0_v}, {"l_pf", l.l_pf}, {"total", l.total}});
    }
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : log.rounds) rounds.push_back(to_json(r));
    return {{"method", log.method},
            {"seed", log.seed},
            {"initial_train_size", log.initial_train_size},
            {"final_mae_percent", log.final_mae_percent},
            {"test_size", log.test_size},
            {"certified", log.certified()},
            {"rounds", rounds},
            {"epochs", epochs}};
}

inline RunLog run_log_from_json(const nlohmann::json& j) {
    RunLog log;
    try {
        log.method = j.at("method").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.initial_train_size = j.at("initial_train_size").get<std::size_t>();
        log.final_mae_percent = j.at("final_mae_percent").get<double>();
        log.test_size = j.value("test_size", std::size_t{0});
        for (const auto& e : j.at("epochs")) {
            log.epochs.push_back({e.at("l0_G").get<double>(), e.at("l0_v").get<double>(), e.at("l_pf").get<double>(),
                                  e.at("total").get<double>()});
        }
        for (const auto& x : j.at("rounds")) {
            RoundLog r;
            r.epoch = x.at("epoch").get<int>();
            r.v_g_max_pu = x.at("v_g_max_pu").get<double>();
            r.v_g_max_mva = x.at("v_g_max_mva").get<double>();
            r.d_normalized = x.at("d_normalized").get<double>();
            if (x.contains("d_fraction_nominal") && x.at("d_fraction_nominal").is_number()) {
                r.d_fraction_nominal = x.at("d_fraction_nominal").get<double>();
            }
            r.train_size = x.at("train_size").get<std::size_t>();
            r.points_added = x.at("points_added").get<std::size_t>();
            r.milp_wall_ms = x.value("milp_wall_ms", 0.0);
            r.certified = x.value("certified", true);
            r.verification = x.value("verification", nlohmann::json());
            log.rounds.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed run log: ") + e.what());
    }
    return log;
}

// epoch,l0,lpf,total,v_g_max,d with the last two filled at verification epochs
// (v_g_max in MVA, d in normalized units).
inline void write_run_csv(std::ostream& out, const RunLog& log) {
    out << "epoch,l0,lpf,total,v_g_max,d\n";
    char buf[160];
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        const int epoch = static_cast<int>(i) + 1;
        const auto& l = log.epochs[i];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g", epoch, l.l0_G + l.l0_v, l.l_pf, l.total);
        out << buf;
        const auto it = std::find_if(log.rounds.begin(), log.rounds.end(), [&](const RoundLog& r) { return r.epoch == epoch; });
        if (it != log.rounds.end()) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", it->v_g_max_mva, it->d_normalized);
            out << buf << '\n';
        } else {
            out << ",,\n";
        }
    }
}

}  // namespace wcpfnn::enrich
