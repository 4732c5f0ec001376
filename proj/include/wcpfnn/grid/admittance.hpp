#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/network_case.hpp>

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace wcpfnn::grid {

struct AdmittanceModel {
    Eigen::MatrixXd conductance;  // G_nk
    Eigen::MatrixXd susceptance;  // B_nk
    // Series admittance 1/(r + jx) of each branch, in case order.
    std::vector<std::complex<double>> branch_series;

    std::complex<double> entry(std::size_t n, std::size_t k) const { return {conductance(n, k), susceptance(n, k)}; }
};

// Standard bus admittance construction: pi-model branches with line charging
// split evenly between the ends, plus bus shunts on the diagonal.
inline AdmittanceModel build_admittance(const NetworkCase& c) {
    const auto nb = static_cast<Eigen::Index>(c.num_buses());
    AdmittanceModel y;
    y.conductance = Eigen::MatrixXd::Zero(nb, nb);
    y.susceptance = Eigen::MatrixXd::Zero(nb, nb);
    y.branch_series.reserve(c.num_branches());

    for (std::size_t l = 0; l < c.branches.size(); ++l) {
        const Branch& br = c.branches[l];
        const std::complex<double> z(br.r, br.x);
        if (std::norm(z) <= 0.0) throw ValidationError("branch " + std::to_string(l + 1) + " has zero impedance");
        const std::complex<double> ys = 1.0 / z;
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from_bus));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to_bus));
        const double half_b = 0.5 * br.b_charging;
        y.conductance(f, f) += ys.real();
        y.susceptance(f, f) += ys.imag() + half_b;
        y.conductance(t, t) += ys.real();
        y.susceptance(t, t) += ys.imag() + half_b;
        y.conductance(f, t) -= ys.real();
        y.susceptance(f, t) -= ys.imag();
        y.conductance(t, f) -= ys.real();
        y.susceptance(t, f) -= ys.imag();
        y.branch_series.push_back(ys);
    }
    for (Eigen::Index n = 0; n < nb; ++n) {
        y.conductance(n, n) += c.buses[static_cast<std::size_t>(n)].shunt_g;
        y.susceptance(n, n) += c.buses[static_cast<std::size_t>(n)].shunt_b;
    }
    return y;
}

}  // namespace wcpfnn::grid
