#pragma once

// Best-first branch-and-bound over the binary variables of a MilpModel, with
// LP relaxations from the simplex solver warm-started from the parent basis.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/verify/milp_model.hpp>
#include <wcpfnn/verify/simplex.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

namespace wcpfnn::verify {

struct MilpOptions {
    double gap_tol = 1e-6;
    long node_limit = 500000;
    double time_limit_s = 3600.0;
    double integrality_tol = 1e-6;
    double feasibility_tol = 1e-6;  // accepted violation of heuristic points
    // Only solutions strictly better than the cutoff (by more than gap_tol) are sought.
    std::optional<double> cutoff;
    LpOptions lp;
};

struct MilpResult {
    bool found = false;          // an incumbent better than the cutoff exists
    double objective = 0.0;      // incumbent value
    Eigen::VectorXd x;           // incumbent point
    double bound = 0.0;          // proven bound on the optimum (max: upper bound)
    double gap = 0.0;            // bound - objective for max, objective - bound for min
    long nodes = 0;
    double wall_ms = 0.0;
    bool infeasible = false;     // relaxation infeasible at the root
};

class MilpBudgetError : public NumericalError {
public:
    MilpBudgetError(const std::string& what, MilpResult partial) : NumericalError(what), partial_(std::move(partial)) {}
    const MilpResult& partial() const { return partial_; }

private:
    MilpResult partial_;
};

// Maps an LP relaxation point to a candidate MILP point (for instance by
// evaluating the network at the relaxation's input). Candidates are checked
// against the model before being accepted as incumbents.
using PrimalHeuristic = std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd& relaxation)>;

inline MilpResult solve_milp_bnb(const MilpModel& model, const MilpOptions& opt = {}, const PrimalHeuristic& heuristic = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const LpSolver lp(model, opt.lp);
    const double sense = model.maximize ? 1.0 : -1.0;  // work with "larger is better" values
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<int> binaries;
    for (int j = 0; j < model.num_variables(); ++j) {
        if (model.variables[static_cast<std::size_t>(j)].binary) binaries.push_back(j);
    }

    MilpResult res;
    double incumbent = opt.cutoff ? sense * *opt.cutoff : -inf;
    auto offer = [&](const Eigen::VectorXd& x) {
        if (model.max_violation(x) > opt.feasibility_tol) return;
        const double v = sense * model.objective_value(x);
        if (v > incumbent) {
            incumbent = v;
            res.found = true;
            res.x = x;
            res.objective = model.objective_value(x);
        }
    };

    struct Node {
        double bound;
        int depth;
        long id;
        Eigen::VectorXd lower, upper;
        LpBasis basis;
    };
    struct Order {
        bool operator()(const Node* a, const Node* b) const {
            if (a->bound != b->bound) return a->bound < b->bound;
            if (a->depth != b->depth) return a->depth < b->depth;
            return a->id > b->id;
        }
    };
    std::vector<std::unique_ptr<Node>> storage;
    std::priority_queue<Node*, std::vector<Node*>, Order> open;
    long next_id = 0;
    storage.push_back(std::make_unique<Node>(Node{inf, 0, next_id++, lp.model_lower(), lp.model_upper(), {}}));
    open.push(storage.back().get());

    auto finish = [&](double best_open) {
        res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const double b = std::max(best_open, incumbent);
        res.bound = sense * b;
        res.gap = res.found ? std::max(0.0, b - sense * res.objective) : 0.0;
    };

    while (!open.empty()) {
        Node* node = open.top();
        if (node->bound <= incumbent + opt.gap_tol) break;
        open.pop();
        if (res.nodes >= opt.node_limit ||
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > opt.time_limit_s) {
            finish(node->bound);
            throw MilpBudgetError("branch-and-bound budget exhausted after " + std::to_string(res.nodes) + " nodes", res);
        }
        ++res.nodes;
        const LpResult r = lp.solve(node->lower, node->upper, node->basis.head.empty() ? nullptr : &node->basis);
        if (r.status == LpStatus::Infeasible) {
            if (res.nodes == 1) res.infeasible = true;
            continue;
        }
        const double value = sense * r.objective;
        if (value <= incumbent + opt.gap_tol) continue;
        if (heuristic) {
            if (auto cand = heuristic(r.x)) offer(*cand);
        }
        int branch = -1;
        double frac_best = opt.integrality_tol;
        for (int j : binaries) {
            const double f = std::abs(r.x[j] - std::round(r.x[j]));
            if (f > frac_best + 1e-15) {
                frac_best = f;
                branch = j;
            }
        }
        if (branch < 0) {
            Eigen::VectorXd x = r.x;
            for (int j : binaries) x[j] = std::round(x[j]);
            const double before = incumbent;
            offer(x);
            if (incumbent == before && value > incumbent) {
                // Rounding moved the point past the acceptance tolerance; the
                // relaxation itself is integral within tolerance, so keep it.
                incumbent = value;
                res.found = true;
                res.x = r.x;
                res.objective = r.objective;
            }
            continue;
        }
        if (value <= incumbent + opt.gap_tol) continue;
        const bool up_first = r.x[branch] >= 0.5;
        for (int side = 0; side < 2; ++side) {
            const bool up = (side == 0) == up_first;
            auto child = std::make_unique<Node>(Node{value, node->depth + 1, next_id++, node->lower, node->upper, r.basis});
            child->lower[branch] = up ? 1.0 : 0.0;
            child->upper[branch] = up ? 1.0 : 0.0;
            open.push(child.get());
            storage.push_back(std::move(child));
        }
        // Release relaxation data of processed nodes.
        node->lower.resize(0);
        node->upper.resize(0);
        node->basis = {};
    }
    finish(open.empty() ? -inf : open.top()->bound);
    if (!res.found) res.gap = 0.0;
    return res;
}

}  // namespace wcpfnn::verify
