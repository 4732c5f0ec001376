#pragma once

// One verification pass (worst case, then hypercube) and its JSON report:
//   {component, quantity, generator, side, v_g_max_pu, v_g_max_mva, D_WC, gap,
//    nodes, wall_ms, certified, components: [...],
//    hypercube: {alpha, d_normalized, d_fraction_nominal, witness, ...} | null}

#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/hypercube.hpp>
#include <wcpfnn/verify/worst_case.hpp>

#include <Eigen/Dense>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace wcpfnn::verify {

struct VerificationConfig {
    WorstCaseConfig worst_case;
    HypercubeOptions hypercube;
    bool fit_hypercube = true;
    // Also solve the hypercube MILP without status fixing and log deviations above 10%.
    bool compare_exact = false;
};

struct VerificationReport {
    WorstCaseResult worst_case;
    std::optional<HypercubeResult> hypercube;
    std::optional<double> exact_d;  // compare_exact only
    Eigen::Index generators = 0;    // components [0, N_g) are P, the rest Q

    bool certified() const { return worst_case.certified && (!hypercube || hypercube->certified); }
};

inline VerificationReport verify_network(const nn::MlpParams& net, const InputBox& box, const GenerationLimits& lim,
                                         const VerificationConfig& cfg = {}, const Eigen::VectorXd* nominal = nullptr) {
    VerificationReport rep;
    rep.generators = std::max<Eigen::Index>(1, net.output_dim() / 2);
    rep.worst_case = find_worst_case(net, box, lim, cfg.worst_case);
    if (!cfg.fit_hypercube || !(rep.worst_case.v_g_max > 0.0)) return rep;
    rep.hypercube = fit_hypercube(net, box, lim, rep.worst_case, cfg.hypercube, nominal);
    if (cfg.compare_exact && cfg.hypercube.fix_statuses) {
        HypercubeOptions exact = cfg.hypercube;
        exact.fix_statuses = false;
        rep.exact_d = fit_hypercube(net, box, lim, rep.worst_case, exact, nominal).d_normalized;
        const double fixed = rep.hypercube->d_normalized;
        const double dev = *rep.exact_d > 0.0 ? std::abs(fixed - *rep.exact_d) / *rep.exact_d : std::abs(fixed);
        if (dev > 0.1) {
            spdlog::warn("ReLU status fixing changed the hypercube width by {:.1f}% (fixed {:.6g}, exact {:.6g})", 100.0 * dev,
                         fixed, *rep.exact_d);
        }
    }
    return rep;
}

namespace detail {

inline nlohmann::json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

inline nlohmann::json to_json(const HypercubeResult& h) {
    nlohmann::json j = {{"alpha", h.alpha},
                        {"d_normalized", h.d_normalized},
                        {"d_fraction_nominal", nullptr},
                        {"witness", detail::vec(h.witness)},
                        {"center", detail::vec(h.center)},
                        {"component", h.component},
                        {"side", to_string(h.side)},
                        {"violation_at_witness", h.violation_at_witness},
                        {"fixed_relus", h.fixed_relus},
                        {"stable_relus", h.stable_relus},
                        {"binaries", h.binaries},
                        {"nodes", h.nodes},
                        {"feasible", h.feasible},
                        {"certified", h.certified}};
    if (h.d_fraction_nominal) j["d_fraction_nominal"] = *h.d_fraction_nominal;
    if (!h.diagnostic.empty()) j["diagnostic"] = h.diagnostic;
    return j;
}

inline nlohmann::json to_json(const VerificationReport& r) {
    const WorstCaseResult& wc = r.worst_case;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& s : wc.solves) {
        nlohmann::json c = {{"component", s.component},     {"side", to_string(s.side)}, {"skipped", s.skipped},
                            {"upper_bound", s.upper_bound}, {"nodes", s.nodes},          {"budget_exhausted", s.budget_exhausted}};
        if (s.witness) c["value"] = s.value;
        comps.push_back(std::move(c));
    }
    nlohmann::json j = {{"component", wc.component},
                        {"quantity", wc.component < 0 ? "" : (wc.component < r.generators ? "P" : "Q")},
                        {"generator", wc.component < 0 ? -1 : wc.component % r.generators},
                        {"side", to_string(wc.side)},
                        {"v_g_max_pu", wc.v_g_max},
                        {"v_g_max_mva", wc.v_g_max_mva},
                        {"D_WC", detail::vec(wc.d_wc)},
                        {"gap", wc.gap},
                        {"nodes", wc.nodes},
                        {"wall_ms", wc.wall_ms},
                        {"certified", r.certified()},
                        {"components", comps},
                        {"hypercube", nullptr}};
    if (r.hypercube) j["hypercube"] = to_json(*r.hypercube);
    if (r.exact_d) j["hypercube_exact_d"] = *r.exact_d;
    return j;
}

}  // namespace wcpfnn::verify
