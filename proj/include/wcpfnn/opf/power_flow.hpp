#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/network_case.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace wcpfnn::opf {

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 30;
};

class PowerFlowError : public NumericalError {
public:
    PowerFlowError(const std::string& what, double mismatch, int iterations)
        : NumericalError(what + " (mismatch " + std::to_string(mismatch) + " after " + std::to_string(iterations) +
                         " iterations)"),
          mismatch_(mismatch),
          iterations_(iterations) {}

    double mismatch() const { return mismatch_; }
    int iterations() const { return iterations_; }

private:
    double mismatch_;
    int iterations_;
};

// Newton-Raphson on the cartesian injection equations v^T M_p^n v = p_n and
// v^T M_q^n v = q_n, given scheduled net injections per bus. The slack bus
// holds `setpoint[slack]` with zero angle; buses flagged in `pv` hold
// |v_n|^2 = setpoint[n]^2 and their reactive injection is free.
inline Eigen::VectorXd solve_injection_flow(const grid::QuadraticFormModel& qf, const Eigen::VectorXd& p_sched,
                                            const Eigen::VectorXd& q_sched, const std::vector<bool>& pv,
                                            const std::vector<double>& setpoint, const PowerFlowOptions& opt = {}) {
    const std::size_t nb = qf.num_buses;
    const std::size_t slack = qf.slack;

    // Unknowns: every voltage entry except the slack's two.
    std::vector<Eigen::Index> unknown;
    for (std::size_t i = 0; i < 2 * nb; ++i) {
        if (i != slack && i != nb + slack) unknown.push_back(static_cast<Eigen::Index>(i));
    }
    const auto nu = static_cast<Eigen::Index>(unknown.size());

    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * nb));
    for (std::size_t n = 0; n < nb; ++n) v[static_cast<Eigen::Index>(n)] = setpoint[n];

    Eigen::VectorXd f(nu);
    Eigen::MatrixXd jac(nu, nu);
    Eigen::VectorXd grad(static_cast<Eigen::Index>(2 * nb));

    auto assemble = [&]() {
        Eigen::Index row = 0;
        auto put_row = [&](const grid::SymmetricForm& form, double target) {
            f[row] = form.evaluate(v) - target;
            grad.setZero();
            form.add_gradient(v, 1.0, grad);
            for (Eigen::Index j = 0; j < nu; ++j) jac(row, j) = grad[unknown[static_cast<std::size_t>(j)]];
            ++row;
        };
        for (std::size_t n = 0; n < nb; ++n) {
            if (n == slack) continue;
            put_row(qf.p_injection[n], p_sched[static_cast<Eigen::Index>(n)]);
            if (pv[n]) {
                put_row(qf.voltage[n], setpoint[n] * setpoint[n]);
            } else {
                put_row(qf.q_injection[n], q_sched[static_cast<Eigen::Index>(n)]);
            }
        }
    };

    double mismatch = 0.0;
    for (int it = 0; it <= opt.max_iterations; ++it) {
        assemble();
        mismatch = nu > 0 ? f.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(mismatch)) throw PowerFlowError("power flow diverged", mismatch, it);
        if (mismatch <= opt.tolerance) return v;
        if (it == opt.max_iterations) break;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) throw PowerFlowError("power flow Jacobian is singular", mismatch, it);
        const Eigen::VectorXd step = lu.solve(-f);
        for (Eigen::Index j = 0; j < nu; ++j) v[unknown[static_cast<std::size_t>(j)]] += step[j];
    }
    throw PowerFlowError("power flow did not converge", mismatch, opt.max_iterations);
}

// Power flow for a dispatch: the slack bus holds its generator setpoint with
// zero angle, PV buses hold |v_n|^2 at the setpoint of their first generator.
// Generator reactive entries of `generation` are used only at PQ buses.
inline Eigen::VectorXd solve_power_flow(const grid::QuadraticFormModel& qf, const grid::NetworkCase& c,
                                        const Eigen::Ref<const Eigen::VectorXd>& generation,
                                        const Eigen::Ref<const Eigen::VectorXd>& demand,
                                        const PowerFlowOptions& opt = {}) {
    require_dimension(static_cast<std::size_t>(generation.size()), qf.generation_dim(), "generation vector");
    require_dimension(static_cast<std::size_t>(demand.size()), qf.demand_dim(), "demand vector");
    const std::size_t nb = qf.num_buses;
    const std::size_t ng = qf.num_generators;
    const std::size_t nd = qf.num_loads;

    std::vector<double> setpoint(nb, 1.0);
    std::vector<bool> regulated(nb, false);
    for (std::size_t g = ng; g-- > 0;) {
        setpoint[qf.gen_bus[g]] = c.generators[g].v_setpoint;
        regulated[qf.gen_bus[g]] = true;
    }
    std::vector<bool> pv(nb, false);
    for (std::size_t n = 0; n < nb; ++n) pv[n] = c.buses[n].type == grid::BusType::PV && regulated[n];

    Eigen::VectorXd p_sched = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
    Eigen::VectorXd q_sched = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
    for (std::size_t g = 0; g < ng; ++g) {
        p_sched[static_cast<Eigen::Index>(qf.gen_bus[g])] += generation[static_cast<Eigen::Index>(g)];
        q_sched[static_cast<Eigen::Index>(qf.gen_bus[g])] += generation[static_cast<Eigen::Index>(ng + g)];
    }
    const auto loads = c.load_buses();
    for (std::size_t k = 0; k < nd; ++k) {
        p_sched[static_cast<Eigen::Index>(loads[k])] -= demand[static_cast<Eigen::Index>(k)];
        q_sched[static_cast<Eigen::Index>(loads[k])] -= demand[static_cast<Eigen::Index>(nd + k)];
    }
    return solve_injection_flow(qf, p_sched, q_sched, pv, setpoint, opt);
}

}  // namespace wcpfnn::opf
