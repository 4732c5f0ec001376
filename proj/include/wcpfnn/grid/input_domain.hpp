#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/network_case.hpp>

#include <Eigen/Dense>

#include <algorithm>

namespace wcpfnn::grid {

// Box of admissible demand vectors D = [P_d; Q_d] (p.u.).
struct InputDomain {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd nominal;

    Eigen::Index dim() const { return lower.size(); }

    bool contains(const Eigen::Ref<const Eigen::VectorXd>& d, double tol = 0.0) const {
        return d.size() == lower.size() && (d.array() >= lower.array() - tol).all() &&
               (d.array() <= upper.array() + tol).all();
    }

    Eigen::VectorXd width() const { return upper - lower; }

    void check() const {
        if (lower.size() != upper.size() || lower.size() != nominal.size())
            throw DimensionError("input domain bounds have inconsistent dimensions");
        if ((lower.array() > upper.array()).any()) throw ValidationError("input domain has lower > upper");
    }
};

inline Eigen::VectorXd nominal_demand(const NetworkCase& c) {
    const auto loads = c.load_buses();
    const auto nd = static_cast<Eigen::Index>(loads.size());
    Eigen::VectorXd d(2 * nd);
    for (Eigen::Index k = 0; k < nd; ++k) {
        d[k] = c.buses[loads[static_cast<std::size_t>(k)]].p_demand;
        d[nd + k] = c.buses[loads[static_cast<std::size_t>(k)]].q_demand;
    }
    return d;
}

// Each demand entry ranges over [low, high] times its nominal value. Negative
// nominal entries keep the interval ordered.
inline InputDomain make_input_domain(const NetworkCase& c, double low_fraction = 0.6, double high_fraction = 1.0) {
    if (low_fraction > high_fraction) throw ValidationError("input domain fractions are reversed");
    InputDomain dom;
    dom.nominal = nominal_demand(c);
    const Eigen::VectorXd a = low_fraction * dom.nominal;
    const Eigen::VectorXd b = high_fraction * dom.nominal;
    dom.lower = a.cwiseMin(b);
    dom.upper = a.cwiseMax(b);
    return dom;
}

}  // namespace wcpfnn::grid
