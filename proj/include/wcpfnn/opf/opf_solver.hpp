#pragma once

// AC-OPF over the compact quadratic form. Each start is solved with a
// primal-dual interior-point method on
//
//   min c^T G   s.t.  v^T L_l v - a_l^T G - b_l^T D = 0
//                     v^T M_m v - d_m^T D - f_m <= 0,   G_min <= G <= G_max
//
// using a dense KKT system (the benchmark cases stay below a few hundred
// unknowns). Several starts are tried and the best feasible point is kept.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/opf/power_flow.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace wcpfnn::opf {

struct PenaltyConfig {
    int max_iterations = 150;     // interior-point iterations per start
    int multistart_count = 5;
    double eq_tol = 1e-6;
    double ineq_tol = 1e-6;
    double optimality_tol = 1e-7;  // scaled gradient / complementarity tolerance
    double start_perturbation = 0.05;
    std::uint64_t random_seed = 0;

    void check() const {
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (!(eq_tol > 0.0) || !(ineq_tol > 0.0) || !(optimality_tol > 0.0)) {
            throw ConfigError("OPF tolerances must be positive");
        }
        if (multistart_count < 1) throw ConfigError("multistart_count must be >= 1");
        if (!(start_perturbation >= 0.0)) throw ConfigError("start_perturbation must be >= 0");
    }
};

struct DispatchSolution {
    Eigen::VectorXd generation;  // G = [P_g; Q_g]
    Eigen::VectorXd voltage;     // v = [v^r; v^i]
    double objective = 0.0;      // c^T G, currency per hour
    double max_equality_residual = 0.0;
    double max_inequality_violation = 0.0;
    bool converged = false;
    int iterations = 0;
    int start_index = 0;
};

class OpfInfeasibleError : public NumericalError {
public:
    OpfInfeasibleError(const std::string& what, DispatchSolution best) : NumericalError(what), best_(std::move(best)) {}
    const DispatchSolution& best() const { return best_; }

private:
    DispatchSolution best_;
};

namespace detail {

// Violation measures for a candidate, including the box on G.
inline void measure(const grid::QuadraticFormModel& qf, const Eigen::VectorXd& demand, DispatchSolution& s) {
    const grid::Residuals r = grid::evaluate_residuals(qf, s.voltage, s.generation, demand);
    s.max_equality_residual = r.max_abs_equality();
    double worst = r.max_violation();
    for (Eigen::Index j = 0; j < s.generation.size(); ++j) {
        worst = std::max(worst, s.generation[j] - qf.gen_upper[j]);
        worst = std::max(worst, qf.gen_lower[j] - s.generation[j]);
    }
    s.max_inequality_violation = worst;
    s.objective = qf.cost.dot(s.generation);
}

inline void add_form(const grid::SymmetricForm& form, double weight, Eigen::MatrixXd& hess) {
    // Hessian of v^T A v is 2A.
    for (const auto& e : form.entries()) {
        const auto i = static_cast<Eigen::Index>(e.row);
        const auto j = static_cast<Eigen::Index>(e.col);
        hess(i, j) += 2.0 * weight * e.value;
        if (i != j) hess(j, i) += 2.0 * weight * e.value;
    }
}

// Generator-limit rows bound the bus injection by the summed generator limits.
// Given the injection equalities they follow from the box on G, and keeping
// both makes the active constraint gradients linearly dependent.
inline bool is_generator_row(grid::InequalityKind k) {
    using K = grid::InequalityKind;
    return k == K::GenPUpper || k == K::GenPLower || k == K::GenQUpper || k == K::GenQLower;
}

class InteriorPoint {
public:
    InteriorPoint(const grid::QuadraticFormModel& qf, const Eigen::VectorXd& demand)
        : qf_(qf), nv_(static_cast<Eigen::Index>(qf.voltage_dim())), ng2_(static_cast<Eigen::Index>(qf.generation_dim())) {
        n_ = nv_ + ng2_;
        const double cmax = qf.cost.size() ? qf.cost.cwiseAbs().maxCoeff() : 0.0;
        cost_scale_ = cmax > 0.0 ? 1.0 / cmax : 1.0;
        for (std::size_t l = 0; l < qf.equalities.size(); ++l) eq_offset_.push_back(grid::dot(qf.equalities[l].demand, demand));
        for (std::size_t m = 0; m < qf.inequalities.size(); ++m) {
            const auto& row = qf.inequalities[m];
            if (!row.active() || is_generator_row(row.kind)) continue;
            rows_.push_back(m);
            ineq_offset_.push_back(grid::dot(row.demand, demand) + row.constant);
        }
        neq_ = static_cast<Eigen::Index>(qf.equalities.size());
        nin_ = static_cast<Eigen::Index>(rows_.size()) + 2 * ng2_;
    }

    // Returns the number of iterations; x is updated in place.
    int solve(Eigen::VectorXd& x, const PenaltyConfig& cfg) {
        Eigen::VectorXd h(neq_), g(nin_);
        Eigen::MatrixXd jh(neq_, n_), jg(nin_, n_);
        evaluate(x, h, g, jh, jg);

        Eigen::VectorXd z(nin_), mu(nin_), lambda = Eigen::VectorXd::Zero(neq_);
        for (Eigen::Index k = 0; k < nin_; ++k) {
            z[k] = std::max(-g[k], 1.0);
        }
        double gamma = 1.0;
        mu = gamma * z.cwiseInverse();

        const double xi = 0.99995;
        const double sigma = 0.1;
        Eigen::VectorXd grad_f = Eigen::VectorXd::Zero(n_);
        grad_f.tail(ng2_) = cost_scale_ * qf_.cost;
        Eigen::MatrixXd kkt(n_ + neq_, n_ + neq_);
        Eigen::VectorXd rhs(n_ + neq_);
        Eigen::MatrixXd hess(n_, n_);

        int it = 0;
        for (; it < cfg.max_iterations; ++it) {
            const Eigen::VectorXd lx = grad_f + jh.transpose() * lambda + jg.transpose() * mu;
            const double feas = std::max(h.size() ? h.cwiseAbs().maxCoeff() : 0.0, g.size() ? g.maxCoeff() : 0.0);
            const double multipliers = std::max(lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0,
                                                mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0);
            const double gradcond = lx.lpNorm<Eigen::Infinity>() / (1.0 + multipliers);
            const double compcond = z.dot(mu) / (1.0 + x.lpNorm<Eigen::Infinity>());
            if (!std::isfinite(feas) || !std::isfinite(gradcond)) break;
            if (feas <= 0.01 * std::min(cfg.eq_tol, cfg.ineq_tol) && gradcond <= cfg.optimality_tol &&
                compcond <= cfg.optimality_tol) {
                break;
            }

            hess.setZero();
            for (std::size_t l = 0; l < qf_.equalities.size(); ++l) {
                add_form(qf_.equalities[l].form, lambda[static_cast<Eigen::Index>(l)], hess);
            }
            for (std::size_t k = 0; k < rows_.size(); ++k) {
                add_form(qf_.inequalities[rows_[k]].form, mu[static_cast<Eigen::Index>(k)], hess);
            }
            const Eigen::VectorXd zinv = z.cwiseInverse();
            const Eigen::VectorXd w = mu.cwiseProduct(zinv);
            kkt.setZero();
            kkt.topLeftCorner(n_, n_) = hess + jg.transpose() * w.asDiagonal() * jg;
            kkt.topRightCorner(n_, neq_) = jh.transpose();
            kkt.bottomLeftCorner(neq_, n_) = jh;
            const Eigen::VectorXd inner = zinv.cwiseProduct(Eigen::VectorXd::Constant(nin_, gamma) + mu.cwiseProduct(g));
            rhs.head(n_) = -(lx + jg.transpose() * inner);
            rhs.tail(neq_) = -h;
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
            const Eigen::VectorXd step = lu.solve(rhs);
            if (!step.allFinite()) break;
            const Eigen::VectorXd dx = step.head(n_);
            const Eigen::VectorXd dlambda = step.tail(neq_);
            const Eigen::VectorXd dz = -g - z - jg * dx;
            const Eigen::VectorXd dmu = -mu + zinv.cwiseProduct(Eigen::VectorXd::Constant(nin_, gamma) - mu.cwiseProduct(dz));

            double alpha_p = 1.0, alpha_d = 1.0;
            for (Eigen::Index k = 0; k < nin_; ++k) {
                if (dz[k] < 0.0) alpha_p = std::min(alpha_p, -xi * z[k] / dz[k]);
                if (dmu[k] < 0.0) alpha_d = std::min(alpha_d, -xi * mu[k] / dmu[k]);
            }
            x += alpha_p * dx;
            z += alpha_p * dz;
            lambda += alpha_d * dlambda;
            mu += alpha_d * dmu;
            gamma = nin_ > 0 ? sigma * z.dot(mu) / static_cast<double>(nin_) : 0.0;
            evaluate(x, h, g, jh, jg);
        }
        return it;
    }

private:
    void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& h, Eigen::VectorXd& g, Eigen::MatrixXd& jh,
                  Eigen::MatrixXd& jg) const {
        const auto v = x.head(nv_);
        const auto gen = x.tail(ng2_);
        jh.setZero();
        jg.setZero();
        Eigen::VectorXd grad(nv_);
        for (std::size_t l = 0; l < qf_.equalities.size(); ++l) {
            const auto i = static_cast<Eigen::Index>(l);
            const auto& row = qf_.equalities[l];
            h[i] = row.form.evaluate(v) - grid::dot(row.generation, gen) - eq_offset_[l];
            grad.setZero();
            row.form.add_gradient(v, 1.0, grad);
            jh.row(i).head(nv_) = grad.transpose();
            for (const auto& [j, a] : row.generation) jh(i, nv_ + static_cast<Eigen::Index>(j)) -= a;
        }
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const auto& row = qf_.inequalities[rows_[k]];
            g[i] = row.form.evaluate(v) - ineq_offset_[k];
            grad.setZero();
            row.form.add_gradient(v, 1.0, grad);
            jg.row(i).head(nv_) = grad.transpose();
        }
        const auto base = static_cast<Eigen::Index>(rows_.size());
        for (Eigen::Index j = 0; j < ng2_; ++j) {
            g[base + 2 * j] = gen[j] - qf_.gen_upper[j];
            jg(base + 2 * j, nv_ + j) = 1.0;
            g[base + 2 * j + 1] = qf_.gen_lower[j] - gen[j];
            jg(base + 2 * j + 1, nv_ + j) = -1.0;
        }
    }

    const grid::QuadraticFormModel& qf_;
    Eigen::Index nv_, ng2_, n_ = 0, neq_ = 0, nin_ = 0;
    double cost_scale_ = 1.0;
    std::vector<std::size_t> rows_;
    std::vector<double> eq_offset_;
    std::vector<double> ineq_offset_;
};

// Equality-feasible starting point: generators share the active demand (plus a
// loss allowance) in proportion to their ranges, generator buses hold 1 p.u.
// (clipped into their voltage band) and a power flow fills in the voltages.
// Generation is then set from the resulting bus injections. Returns nothing
// when the power flow fails.
inline std::optional<Eigen::VectorXd> power_flow_start(const grid::QuadraticFormModel& qf, const Eigen::VectorXd& demand) {
    const std::size_t nb = qf.num_buses;
    const std::size_t ng = qf.num_generators;
    const auto nv = static_cast<Eigen::Index>(qf.voltage_dim());
    const auto ngi = static_cast<Eigen::Index>(ng);

    std::vector<double> vmin(nb, 0.0), vmax(nb, std::numeric_limits<double>::infinity());
    for (const auto& row : qf.inequalities) {
        if (row.kind == grid::InequalityKind::VoltageUpper && row.active()) vmax[row.element] = std::sqrt(row.constant);
        if (row.kind == grid::InequalityKind::VoltageLower && row.active()) vmin[row.element] = std::sqrt(-row.constant);
    }
    const double p_demand = demand.head(static_cast<Eigen::Index>(qf.num_loads)).sum();
    double pmin = 0.0, prange = 0.0;
    for (Eigen::Index g = 0; g < ngi; ++g) {
        pmin += qf.gen_lower[g];
        prange += qf.gen_upper[g] - qf.gen_lower[g];
    }
    const double share = prange > 0.0 ? std::clamp((1.03 * p_demand - pmin) / prange, 0.0, 1.0) : 0.0;
    Eigen::VectorXd gen(2 * ngi);
    for (Eigen::Index g = 0; g < ngi; ++g) {
        gen[g] = qf.gen_lower[g] + share * (qf.gen_upper[g] - qf.gen_lower[g]);
        gen[ngi + g] = std::clamp(0.0, qf.gen_lower[ngi + g], qf.gen_upper[ngi + g]);
    }

    std::vector<bool> pv(nb, false);
    std::vector<double> setpoint(nb, 1.0);
    std::vector<int> count(nb, 0);
    for (std::size_t g = 0; g < ng; ++g) {
        pv[qf.gen_bus[g]] = qf.gen_bus[g] != qf.slack;
        ++count[qf.gen_bus[g]];
    }
    for (std::size_t n = 0; n < nb; ++n) setpoint[n] = std::clamp(1.0, vmin[n], std::max(vmin[n], vmax[n]));

    auto target = [&](std::size_t l, const Eigen::VectorXd& generation) {
        const auto& row = qf.equalities[l];
        return grid::dot(row.generation, generation) + grid::dot(row.demand, demand);
    };
    Eigen::VectorXd p_sched(static_cast<Eigen::Index>(nb)), q_sched(static_cast<Eigen::Index>(nb));
    for (std::size_t n = 0; n < nb; ++n) {
        p_sched[static_cast<Eigen::Index>(n)] = target(n, gen);
        q_sched[static_cast<Eigen::Index>(n)] = target(nb + n, gen);
    }
    Eigen::VectorXd v;
    try {
        v = solve_injection_flow(qf, p_sched, q_sched, pv, setpoint);
    } catch (const PowerFlowError&) {
        return std::nullopt;
    }
    // Spread each bus's injection mismatch evenly over its generators.
    for (std::size_t n = 0; n < nb; ++n) {
        if (count[n] == 0) continue;
        const double dp = (qf.equalities[n].form.evaluate(v) - target(n, gen)) / count[n];
        const double dq = (qf.equalities[nb + n].form.evaluate(v) - target(nb + n, gen)) / count[n];
        for (std::size_t g = 0; g < ng; ++g) {
            if (qf.gen_bus[g] != n) continue;
            gen[static_cast<Eigen::Index>(g)] += dp;
            gen[ngi + static_cast<Eigen::Index>(g)] += dq;
        }
    }
    Eigen::VectorXd x(nv + 2 * ngi);
    x << v, gen;
    return x;
}

}  // namespace detail

// Multistart solve: start 0 is a power-flow warm start, start 1 the flat
// profile with mid-range generation, later starts are seeded perturbations of
// the warm start (of the flat profile when the power flow fails). The
// selected candidate minimizes (not converged, objective, start index).
inline DispatchSolution solve_opf_penalty(const grid::QuadraticFormModel& qf,
                                          const Eigen::Ref<const Eigen::VectorXd>& demand,
                                          const PenaltyConfig& cfg = {}) {
    cfg.check();
    require_dimension(static_cast<std::size_t>(demand.size()), qf.demand_dim(), "demand vector");
    const auto nb = static_cast<Eigen::Index>(qf.num_buses);
    const auto nv = static_cast<Eigen::Index>(qf.voltage_dim());
    const auto ngen = static_cast<Eigen::Index>(qf.generation_dim());
    const Eigen::VectorXd d = demand;
    detail::InteriorPoint solver(qf, d);

    Rng rng(derive_seed(cfg.random_seed, 0x0bf));
    std::optional<DispatchSolution> best;
    auto better = [](const DispatchSolution& a, const DispatchSolution& b) {
        if (a.converged != b.converged) return a.converged;
        if (!a.converged) {
            const double va = std::max(a.max_equality_residual, a.max_inequality_violation);
            const double vb = std::max(b.max_equality_residual, b.max_inequality_violation);
            if (va != vb) return va < vb;
        }
        if (a.objective != b.objective) return a.objective < b.objective;
        return a.start_index < b.start_index;
    };

    Eigen::VectorXd flat(nv + ngen);
    for (Eigen::Index n = 0; n < nb; ++n) {
        flat[n] = 1.0;
        flat[nb + n] = 0.0;
    }
    for (Eigen::Index j = 0; j < ngen; ++j) flat[nv + j] = 0.5 * (qf.gen_lower[j] + qf.gen_upper[j]);
    const std::optional<Eigen::VectorXd> warm = detail::power_flow_start(qf, d);

    for (int start = 0; start < cfg.multistart_count; ++start) {
        Eigen::VectorXd x = (warm && start != 1) ? *warm : flat;
        if (start >= 2) {
            const double p = cfg.start_perturbation;
            for (Eigen::Index n = 0; n < nb; ++n) {
                x[n] *= 1.0 + rng.uniform(-p, p);
                if (static_cast<std::size_t>(n) != qf.slack) x[nb + n] += rng.uniform(-p, p);
            }
            for (Eigen::Index j = 0; j < ngen; ++j) {
                const double w = qf.gen_upper[j] - qf.gen_lower[j];
                x[nv + j] = std::clamp(x[nv + j] + rng.uniform(-p, p) * w, qf.gen_lower[j], qf.gen_upper[j]);
            }
        }
        DispatchSolution s;
        s.iterations = solver.solve(x, cfg);
        s.voltage = x.head(nv);
        s.generation = x.tail(ngen);
        s.start_index = start;
        detail::measure(qf, d, s);
        s.converged = std::isfinite(s.objective) && s.max_equality_residual <= cfg.eq_tol &&
                      s.max_inequality_violation <= cfg.ineq_tol;
        if (!best || better(s, *best)) best = std::move(s);
    }
    if (!best->converged) {
        throw OpfInfeasibleError("OPF did not converge from any start (best equality residual " +
                                     std::to_string(best->max_equality_residual) + ", inequality violation " +
                                     std::to_string(best->max_inequality_violation) + ")",
                                 *best);
    }
    return *best;
}

}  // namespace wcpfnn::opf
