#pragma once

// Hypercube fitting around a worst-case witness: the largest infinity-norm
// distance d (in the network's normalized input units) from D_WC to a point D
// whose violation is still at least alpha * v_g_max.
//
// max d = ||x(D) - x(D_WC)||_inf is linearized with one binary pair
// (s+_i, s-_i) per input coordinate, sum of all pairs = 1, and
//   d <= (x_i - xwc_i) + B+_i (1 - s+_i),   d <= (xwc_i - x_i) + B-_i (1 - s-_i).
// The violation requirement over all components is a disjunction, so one MILP
// is solved per component/side and the largest d is kept.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/branch_and_bound.hpp>
#include <wcpfnn/verify/encoding.hpp>
#include <wcpfnn/verify/tightening.hpp>
#include <wcpfnn/verify/worst_case.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace wcpfnn::verify {

struct HypercubeOptions {
    double alpha = 0.8;
    bool fix_statuses = true;
    double fix_threshold = 0.1;
    double local_half_width = 0.5;  // normalized units around D_WC used for bound tightening
    bool tighten_bounds = true;     // LP-tightened big-M constants on the local box
    MilpOptions milp;
};

struct HypercubeResult {
    double d_normalized = 0.0;
    std::optional<double> d_fraction_nominal;
    Eigen::VectorXd center;   // D_WC
    Eigen::VectorXd witness;  // D_0
    double alpha = 0.0;
    Eigen::Index component = -1;
    BoundSide side = BoundSide::Upper;
    double violation_at_witness = 0.0;
    std::size_t fixed_relus = 0;   // by the status heuristic
    std::size_t stable_relus = 0;  // by the local bounds
    std::size_t binaries = 0;      // in the largest model solved
    long nodes = 0;
    bool feasible = true;
    bool certified = true;
    std::string diagnostic;
};

// Restricts `box` to the points within `half_width` normalized units of `center`.
inline InputBox local_box(const nn::MlpParams& net, const InputBox& box, const Eigen::Ref<const Eigen::VectorXd>& center,
                          double half_width) {
    InputBox b = box;
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
        const double s = std::abs(net.input_map.scale[i]);
        if (s == 0.0) continue;
        b.lower[i] = std::max(box.lower[i], center[i] - half_width / s);
        b.upper[i] = std::min(box.upper[i], center[i] + half_width / s);
    }
    return b;
}

inline HypercubeResult fit_hypercube(const nn::MlpParams& net, const InputBox& box, const GenerationLimits& lim,
                                     const WorstCaseResult& wc, const HypercubeOptions& opt = {},
                                     const Eigen::VectorXd* nominal = nullptr) {
    if (!(wc.v_g_max > 0.0)) throw ValidationError("hypercube fitting needs a positive worst-case violation");
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    require_dimension(static_cast<std::size_t>(wc.d_wc.size()), static_cast<std::size_t>(net.input_dim()), "worst-case witness");

    const InputBox lbox = local_box(net, box, wc.d_wc, opt.local_half_width);
    const LayerBounds bounds = opt.tighten_bounds ? lp_tightened_bounds(net, lbox) : interval_bounds(net, lbox);
    std::optional<ReluStatusMap> statuses;
    if (opt.fix_statuses) statuses = fix_relu_statuses(net, bounds, wc.d_wc, opt.fix_threshold);
    const double target = opt.alpha * wc.v_g_max;

    HypercubeResult res;
    res.alpha = opt.alpha;
    res.center = wc.d_wc;
    res.witness = wc.d_wc;
    res.component = wc.component;
    res.side = wc.side;
    res.violation_at_witness = wc.v_g_max;
    res.feasible = false;

    const Eigen::VectorXd xwc = net.input_map.apply(wc.d_wc);
    // Normalized coordinate range of the local box per input.
    std::vector<Eigen::Index> coords;
    Eigen::VectorXd below(net.input_dim()), above(net.input_dim());
    for (Eigen::Index i = 0; i < net.input_dim(); ++i) {
        const double a = net.input_map.offset[i] + net.input_map.scale[i] * lbox.lower[i];
        const double b = net.input_map.offset[i] + net.input_map.scale[i] * lbox.upper[i];
        below[i] = std::max(0.0, xwc[i] - std::min(a, b));
        above[i] = std::max(0.0, std::max(a, b) - xwc[i]);
        if (net.input_map.scale[i] != 0.0 && lbox.upper[i] > lbox.lower[i]) coords.push_back(i);
    }
    double d_ub = 0.0;
    for (Eigen::Index i : coords) d_ub = std::max({d_ub, below[i], above[i]});

    for (Eigen::Index m = 0; m < net.output_dim(); ++m) {
        for (BoundSide side : {BoundSide::Upper, BoundSide::Lower}) {
            const double ob = side == BoundSide::Upper ? bounds.output_upper[m] - lim.upper[m]
                                                       : lim.lower[m] - bounds.output_lower[m];
            if (ob < target - opt.milp.gap_tol) continue;
            NetworkEncoding enc = encode_network(net, bounds, lbox, statuses ? &*statuses : nullptr);
            MilpModel& model = enc.model;
            const AffineExpr viol = violation_expression(net, enc, lim, m, side);
            model.add_row(viol.terms, Sense::GreaterEqual, target - viol.constant);
            const int dvar = model.add_variable(0.0, d_ub, "d");
            LinearTerms pick;
            std::vector<std::pair<int, int>> pairs;
            for (Eigen::Index i : coords) {
                const double s = net.input_map.scale[i];
                const int din = enc.input_vars[static_cast<std::size_t>(i)];
                const int sp = model.add_variable(0.0, 1.0, "sp" + std::to_string(i), true);
                const int sn = model.add_variable(0.0, 1.0, "sn" + std::to_string(i), true);
                const double bp = d_ub + below[i];
                const double bn = d_ub + above[i];
                const double off = net.input_map.offset[i] - xwc[i];
                // d - s D_i + bp sp <= off + bp ; d + s D_i + bn sn <= -off + bn
                model.add_row({{dvar, 1.0}, {din, -s}, {sp, bp}}, Sense::LessEqual, off + bp);
                model.add_row({{dvar, 1.0}, {din, s}, {sn, bn}}, Sense::LessEqual, -off + bn);
                pick.emplace_back(sp, 1.0);
                pick.emplace_back(sn, 1.0);
                pairs.emplace_back(sp, sn);
            }
            if (pick.empty()) {
                model.variables[static_cast<std::size_t>(dvar)].upper = 0.0;
            } else {
                model.add_row(pick, Sense::Equal, 1.0);
            }
            model.objective = {{dvar, 1.0}};
            model.maximize = true;
            res.binaries = std::max(res.binaries, model.num_binaries());
            res.stable_relus = enc.stable_neurons;
            res.fixed_relus = enc.status_fixed_neurons;

            const PrimalHeuristic heuristic = [&](const Eigen::VectorXd& x) -> std::optional<Eigen::VectorXd> {
                const Eigen::VectorXd d = lbox.clamp(input_of(enc, x));
                Eigen::VectorXd full = complete_assignment(net, enc, d);
                const Eigen::VectorXd xn = net.input_map.apply(d);
                double best = 0.0;
                std::size_t arg = 0;
                bool positive = true;
                for (std::size_t k = 0; k < coords.size(); ++k) {
                    const double diff = xn[coords[k]] - xwc[coords[k]];
                    if (k == 0 || std::abs(diff) > best) {
                        best = std::abs(diff);
                        arg = k;
                        positive = diff >= 0.0;
                    }
                }
                if (!pairs.empty()) full[positive ? pairs[arg].first : pairs[arg].second] = 1.0;
                full[dvar] = std::min(best, d_ub);
                return full;
            };
            MilpOptions mo = opt.milp;
            if (res.feasible) mo.cutoff = res.d_normalized;
            MilpResult r;
            try {
                r = solve_milp_bnb(model, mo, heuristic);
            } catch (const MilpBudgetError& e) {
                r = e.partial();
                res.certified = false;
            }
            res.nodes += r.nodes;
            if (r.found && (!res.feasible || r.objective > res.d_normalized)) {
                const Eigen::VectorXd d0 = lbox.clamp(input_of(enc, r.x));
                res.feasible = true;
                res.witness = d0;
                res.component = m;
                res.side = side;
                res.violation_at_witness = side_violation(nn::forward(net, d0)[m], lim, m, side);
                res.d_normalized = (net.input_map.apply(d0) - xwc).cwiseAbs().maxCoeff();
            }
        }
    }
    if (!res.feasible) {
        res.d_normalized = 0.0;
        res.diagnostic = "no point reaches alpha * v_g_max under the fixed ReLU statuses";
    }
    if (nominal) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < nominal->size(); ++i) {
            if ((*nominal)[i] != 0.0) f = std::max(f, std::abs(res.witness[i] - wc.d_wc[i]) / std::abs((*nominal)[i]));
        }
        res.d_fraction_nominal = f;
    }
    return res;
}

}  // namespace wcpfnn::verify
