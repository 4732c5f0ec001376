#pragma once

// Worst-case generation-limit violation of a generation network over an input
// box: one MILP per output component and bound side, maximizing
// Ghat_m - Gmax_m (upper) or Gmin_m - Ghat_m (lower); the overall maximum is
// clamped at zero.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/branch_and_bound.hpp>
#include <wcpfnn/verify/encoding.hpp>
#include <wcpfnn/verify/tightening.hpp>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <vector>

namespace wcpfnn::verify {

enum class BoundSide { Upper, Lower };

inline const char* to_string(BoundSide s) { return s == BoundSide::Upper ? "upper" : "lower"; }

struct GenerationLimits {
    Eigen::VectorXd lower;  // [P_min; Q_min]
    Eigen::VectorXd upper;  // [P_max; Q_max]

    Eigen::Index dim() const { return lower.size(); }
};

// Signed violation of one component/side (negative = inside the bound).
inline double side_violation(double g, const GenerationLimits& lim, Eigen::Index m, BoundSide side) {
    return side == BoundSide::Upper ? g - lim.upper[m] : lim.lower[m] - g;
}

struct Violation {
    double value = 0.0;  // max(G - Gmax, Gmin - G, 0) over all components
    Eigen::Index component = -1;
    BoundSide side = BoundSide::Upper;
};

inline Violation generation_violation(const Eigen::Ref<const Eigen::VectorXd>& g, const GenerationLimits& lim) {
    require_dimension(static_cast<std::size_t>(g.size()), static_cast<std::size_t>(lim.dim()), "generation prediction");
    Violation v;
    for (Eigen::Index m = 0; m < g.size(); ++m) {
        for (BoundSide s : {BoundSide::Upper, BoundSide::Lower}) {
            const double x = side_violation(g[m], lim, m, s);
            if (x > v.value) v = {x, m, s};
        }
    }
    return v;
}

// Objective expression of one component/side over an encoding.
inline AffineExpr violation_expression(const nn::MlpParams& net, const NetworkEncoding& enc, const GenerationLimits& lim,
                                       Eigen::Index m, BoundSide side) {
    AffineExpr e = enc.output(net, m);
    if (side == BoundSide::Upper) {
        e.constant -= lim.upper[m];
    } else {
        for (auto& t : e.terms) t.second = -t.second;
        e.constant = lim.lower[m] - e.constant;
    }
    return e;
}

// MILP maximizing the violation of component m on `side` over the box.
inline NetworkEncoding encode_worstcase(const nn::MlpParams& net, const LayerBounds& bounds, const InputBox& box,
                                        Eigen::Index m, BoundSide side, const GenerationLimits& lim) {
    require_dimension(static_cast<std::size_t>(lim.dim()), static_cast<std::size_t>(net.output_dim()), "generation limits");
    NetworkEncoding enc = encode_network(net, bounds, box);
    const AffineExpr obj = violation_expression(net, enc, lim, m, side);
    enc.model.objective = obj.terms;
    enc.model.objective_constant = obj.constant;
    enc.model.maximize = true;
    return enc;
}

struct ComponentSolve {
    Eigen::Index component = 0;
    BoundSide side = BoundSide::Upper;
    bool skipped = false;       // output bound already at or below the incumbent
    double upper_bound = 0.0;   // proven bound on this component's violation
    long nodes = 0;
    bool budget_exhausted = false;
    // Best point found by this MILP (beyond the cutoff), if any.
    std::optional<Eigen::VectorXd> witness;
    double value = 0.0;
};

struct WorstCaseConfig {
    MilpOptions milp;
    double base_mva = 100.0;
    // Random box points evaluated up front; the best one seeds every MILP's cutoff.
    int warm_start_samples = 256;
    std::uint64_t seed = 0;
    // LP-tightened big-M constants instead of plain interval bounds.
    bool tighten_bounds = true;
};

struct WorstCaseResult {
    double v_g_max = 0.0;      // p.u.
    double v_g_max_mva = 0.0;
    Eigen::VectorXd d_wc;      // witness input
    Eigen::Index component = -1;
    BoundSide side = BoundSide::Upper;
    double gap = 0.0;          // proven bound minus v_g_max
    long nodes = 0;
    double wall_ms = 0.0;
    bool certified = true;     // every sub-MILP closed within the gap tolerance
    std::vector<ComponentSolve> solves;
};

inline WorstCaseResult find_worst_case(const nn::MlpParams& net, const InputBox& box, const GenerationLimits& lim,
                                       const WorstCaseConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    require_dimension(static_cast<std::size_t>(lim.dim()), static_cast<std::size_t>(net.output_dim()), "generation limits");
    const LayerBounds bounds = cfg.tighten_bounds ? lp_tightened_bounds(net, box) : interval_bounds(net, box);
    WorstCaseResult res;

    // Incumbent from the box center and random box points; the clamp at zero
    // makes 0 the floor.
    res.d_wc = 0.5 * (box.lower + box.upper);
    {
        Rng rng(cfg.seed);
        Eigen::VectorXd d = res.d_wc;
        for (int s = 0; s <= cfg.warm_start_samples; ++s) {
            if (s > 0) {
                for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.uniform(box.lower[i], box.upper[i]);
            }
            const Violation v = generation_violation(nn::forward(net, d), lim);
            if (s == 0 || v.value > res.v_g_max) {
                res.v_g_max = v.value;
                res.component = v.component;
                res.side = v.side;
                res.d_wc = d;
            }
        }
    }
    double proven = res.v_g_max;
    const double tol = cfg.milp.gap_tol;

    // Most promising components (largest output bound) first.
    struct Job {
        Eigen::Index m;
        BoundSide side;
        double bound;
    };
    std::vector<Job> jobs;
    for (Eigen::Index m = 0; m < net.output_dim(); ++m) {
        jobs.push_back({m, BoundSide::Upper, bounds.output_upper[m] - lim.upper[m]});
        jobs.push_back({m, BoundSide::Lower, lim.lower[m] - bounds.output_lower[m]});
    }
    std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.bound > b.bound; });

    for (const Job& job : jobs) {
        const Eigen::Index m = job.m;
        const BoundSide side = job.side;
        const double ob = job.bound;
        ComponentSolve cs{m, side};
        cs.upper_bound = ob;
        if (ob <= res.v_g_max + tol) {
            cs.skipped = true;
            res.solves.push_back(cs);
            continue;
        }
        NetworkEncoding enc = encode_worstcase(net, bounds, box, m, side, lim);
        MilpOptions opt = cfg.milp;
        opt.cutoff = res.v_g_max;
        const PrimalHeuristic heuristic = [&](const Eigen::VectorXd& x) -> std::optional<Eigen::VectorXd> {
            return complete_assignment(net, enc, box.clamp(input_of(enc, x)));
        };
        MilpResult r;
        try {
            r = solve_milp_bnb(enc.model, opt, heuristic);
        } catch (const MilpBudgetError& e) {
            r = e.partial();
            cs.budget_exhausted = true;
            res.certified = false;
            spdlog::warn("worst-case MILP for component {} ({}) stopped with bound {:.6g}", m, to_string(side), r.bound);
        }
        cs.nodes = r.nodes;
        cs.upper_bound = std::min(ob, r.bound);
        res.nodes += r.nodes;
        if (r.found) {
            const Eigen::VectorXd d = box.clamp(input_of(enc, r.x));
            const double v = side_violation(nn::forward(net, d)[m], lim, m, side);
            cs.witness = d;
            cs.value = v;
            if (v > res.v_g_max) {
                res.v_g_max = v;
                res.d_wc = d;
                res.component = m;
                res.side = side;
            }
        }
        proven = std::max(proven, cs.upper_bound);
        res.solves.push_back(cs);
    }
    res.v_g_max = std::max(res.v_g_max, 0.0);
    res.gap = std::max(0.0, proven - res.v_g_max);
    if (res.gap > tol) res.certified = false;
    res.v_g_max_mva = res.v_g_max * cfg.base_mva;
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace wcpfnn::verify
