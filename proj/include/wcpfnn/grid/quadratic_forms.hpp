#pragma once

// Cartesian quadratic-form model of AC-OPF. The voltage vector is
// v = [v^r; v^i] (2 N_b), generation G = [P_g; Q_g] (2 N_g) and demand
// D = [P_d; Q_d] (2 N_d), all per unit. The model reads
//
//   v^T L_l v = a_l^T G + b_l^T D        l = 1..2 N_b + 1
//   v^T M_m v <= d_m^T D + f_m           m = 1..4 N_g + 2 N_b + N_l

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/admittance.hpp>
#include <wcpfnn/grid/network_case.hpp>
#include <wcpfnn/grid/symmetric_form.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace wcpfnn::grid {

struct EqualityRow {
    SymmetricForm form;         // L_l
    SparseVector generation;    // a_l
    SparseVector demand;        // b_l
};

enum class InequalityKind { GenPUpper, GenPLower, GenQUpper, GenQLower, VoltageUpper, VoltageLower, BranchCurrent };

struct InequalityRow {
    SymmetricForm form;  // M_m
    SparseVector demand; // d_m
    double constant = 0.0;  // f_m; +inf means the row is inactive
    InequalityKind kind = InequalityKind::VoltageUpper;
    std::size_t element = 0;  // generator, bus or branch position

    bool active() const { return std::isfinite(constant); }
};

struct QuadraticFormModel {
    std::size_t num_buses = 0;
    std::size_t num_generators = 0;
    std::size_t num_loads = 0;
    std::size_t num_branches = 0;
    std::size_t slack = 0;

    std::vector<SymmetricForm> p_injection;  // M_p^n
    std::vector<SymmetricForm> q_injection;  // M_q^n
    std::vector<SymmetricForm> voltage;      // M_v^n
    std::vector<SymmetricForm> current;      // M_i^{mn}
    SymmetricForm slack_reference;           // e_{Nb+s} e_{Nb+s}^T

    std::vector<EqualityRow> equalities;
    std::vector<InequalityRow> inequalities;

    Eigen::VectorXd cost;        // c, currency per hour per p.u. of G
    Eigen::VectorXd gen_lower;   // [P_min; Q_min]
    Eigen::VectorXd gen_upper;   // [P_max; Q_max]
    std::vector<std::size_t> gen_bus;  // bus position per generator

    std::size_t voltage_dim() const { return 2 * num_buses; }
    std::size_t generation_dim() const { return 2 * num_generators; }
    std::size_t demand_dim() const { return 2 * num_loads; }
};

inline QuadraticFormModel build_quadratic_forms(const NetworkCase& c, const AdmittanceModel& y) {
    const std::size_t nb = c.num_buses();
    const std::size_t ng = c.num_generators();
    const std::size_t nd = c.num_loads();
    const std::size_t dim = 2 * nb;
    require_dimension(static_cast<std::size_t>(y.conductance.rows()), nb, "admittance matrix");
    require_dimension(y.branch_series.size(), c.num_branches(), "branch admittances");

    QuadraticFormModel qf;
    qf.num_buses = nb;
    qf.num_generators = ng;
    qf.num_loads = nd;
    qf.num_branches = c.num_branches();
    qf.slack = c.slack_index();

    auto re = [](std::size_t n) { return n; };
    auto im = [nb](std::size_t n) { return nb + n; };

    for (std::size_t n = 0; n < nb; ++n) {
        SymmetricForm::Builder p(dim), q(dim);
        for (std::size_t k = 0; k < nb; ++k) {
            const double g = y.conductance(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
            const double b = y.susceptance(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
            if (g == 0.0 && b == 0.0) continue;
            // p_n += v_n^r (v_k^r G - v_k^i B) + v_n^i (v_k^i G + v_k^r B)
            p.add_product(re(n), re(k), g);
            p.add_product(re(n), im(k), -b);
            p.add_product(im(n), im(k), g);
            p.add_product(im(n), re(k), b);
            // q_n += v_n^i (v_k^r G - v_k^i B) - v_n^r (v_k^i G + v_k^r B)
            q.add_product(im(n), re(k), g);
            q.add_product(im(n), im(k), -b);
            q.add_product(re(n), im(k), -g);
            q.add_product(re(n), re(k), -b);
        }
        qf.p_injection.push_back(p.build());
        qf.q_injection.push_back(q.build());

        SymmetricForm::Builder v(dim);
        v.add_product(re(n), re(n), 1.0);
        v.add_product(im(n), im(n), 1.0);
        qf.voltage.push_back(v.build());
    }

    for (std::size_t l = 0; l < c.num_branches(); ++l) {
        const auto m = c.bus_index(c.branches[l].from_bus);
        const auto k = c.bus_index(c.branches[l].to_bus);
        const double y2 = std::norm(y.branch_series[l]);
        SymmetricForm::Builder b(dim);
        // |y|^2 (e_m - e_k)(e_m - e_k)^T on both the real and imaginary blocks
        for (auto [a, z] : {std::pair{re(m), re(k)}, std::pair{im(m), im(k)}}) {
            b.add_product(a, a, y2);
            b.add_product(z, z, y2);
            b.add_product(a, z, -2.0 * y2);
        }
        qf.current.push_back(b.build());
    }

    {
        SymmetricForm::Builder s(dim);
        s.add_product(im(qf.slack), im(qf.slack), 1.0);
        qf.slack_reference = s.build();
    }

    // Generation data.
    qf.cost = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * ng));
    qf.gen_lower.resize(static_cast<Eigen::Index>(2 * ng));
    qf.gen_upper.resize(static_cast<Eigen::Index>(2 * ng));
    std::vector<std::vector<std::size_t>> gens_at_bus(nb);
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& gen = c.generators[g];
        const auto gi = static_cast<Eigen::Index>(g);
        const auto qi = static_cast<Eigen::Index>(ng + g);
        qf.cost[gi] = gen.cost_linear * c.base_mva;
        qf.cost[qi] = gen.cost_linear_q * c.base_mva;
        qf.gen_lower[gi] = gen.p_min;
        qf.gen_upper[gi] = gen.p_max;
        qf.gen_lower[qi] = gen.q_min;
        qf.gen_upper[qi] = gen.q_max;
        const std::size_t bus = c.bus_index(gen.bus_id);
        qf.gen_bus.push_back(bus);
        gens_at_bus[bus].push_back(g);
    }
    const auto load_of = c.load_of_bus();

    // Equalities: P rows, Q rows, slack reference.
    for (std::size_t n = 0; n < nb; ++n) {
        EqualityRow row{qf.p_injection[n], {}, {}};
        for (auto g : gens_at_bus[n]) row.generation.emplace_back(g, 1.0);
        if (load_of[n]) row.demand.emplace_back(*load_of[n], -1.0);
        qf.equalities.push_back(std::move(row));
    }
    for (std::size_t n = 0; n < nb; ++n) {
        EqualityRow row{qf.q_injection[n], {}, {}};
        for (auto g : gens_at_bus[n]) row.generation.emplace_back(ng + g, 1.0);
        if (load_of[n]) row.demand.emplace_back(nd + *load_of[n], -1.0);
        qf.equalities.push_back(std::move(row));
    }
    qf.equalities.push_back(EqualityRow{qf.slack_reference, {}, {}});

    // Generator limits expressed through the bus injection v^T M v = sum(G at bus) - D_bus.
    // Rows are emitted per generator; co-located generators bound the bus total.
    auto gen_rows = [&](bool reactive, bool upper, InequalityKind kind) {
        for (std::size_t g = 0; g < ng; ++g) {
            const std::size_t n = qf.gen_bus[g];
            double limit = 0.0;
            for (auto other : gens_at_bus[n]) {
                const auto& o = c.generators[other];
                limit += reactive ? (upper ? o.q_max : o.q_min) : (upper ? o.p_max : o.p_min);
            }
            const auto& form = reactive ? qf.q_injection[n] : qf.p_injection[n];
            InequalityRow row;
            row.kind = kind;
            row.element = g;
            row.form = upper ? form : form.negated();
            row.constant = upper ? limit : -limit;
            if (load_of[n]) {
                const std::size_t idx = (reactive ? nd : 0) + *load_of[n];
                row.demand.emplace_back(idx, upper ? -1.0 : 1.0);
            }
            qf.inequalities.push_back(std::move(row));
        }
    };
    gen_rows(false, true, InequalityKind::GenPUpper);
    gen_rows(false, false, InequalityKind::GenPLower);
    gen_rows(true, true, InequalityKind::GenQUpper);
    gen_rows(true, false, InequalityKind::GenQLower);

    for (std::size_t n = 0; n < nb; ++n) {
        InequalityRow row;
        row.kind = InequalityKind::VoltageUpper;
        row.element = n;
        row.form = qf.voltage[n];
        row.constant = c.buses[n].v_max * c.buses[n].v_max;
        qf.inequalities.push_back(std::move(row));
    }
    for (std::size_t n = 0; n < nb; ++n) {
        InequalityRow row;
        row.kind = InequalityKind::VoltageLower;
        row.element = n;
        row.form = qf.voltage[n].negated();
        row.constant = -c.buses[n].v_min * c.buses[n].v_min;
        qf.inequalities.push_back(std::move(row));
    }
    for (std::size_t l = 0; l < c.num_branches(); ++l) {
        InequalityRow row;
        row.kind = InequalityKind::BranchCurrent;
        row.element = l;
        row.form = qf.current[l];
        const double rating = c.branches[l].rating;
        row.constant = rating > 0.0 ? rating * rating : std::numeric_limits<double>::infinity();
        qf.inequalities.push_back(std::move(row));
    }
    return qf;
}

struct Residuals {
    Eigen::VectorXd equality;    // v^T L_l v - a_l^T G - b_l^T D
    Eigen::VectorXd inequality;  // v^T M_m v - d_m^T D - f_m, positive = violated

    double max_abs_equality() const { return equality.size() ? equality.cwiseAbs().maxCoeff() : 0.0; }
    double max_violation() const {
        double worst = 0.0;
        for (Eigen::Index m = 0; m < inequality.size(); ++m) worst = std::max(worst, inequality[m]);
        return worst;
    }
};

inline Residuals evaluate_residuals(const QuadraticFormModel& qf, const Eigen::Ref<const Eigen::VectorXd>& v,
                                    const Eigen::Ref<const Eigen::VectorXd>& gen,
                                    const Eigen::Ref<const Eigen::VectorXd>& demand) {
    require_dimension(static_cast<std::size_t>(v.size()), qf.voltage_dim(), "voltage vector");
    require_dimension(static_cast<std::size_t>(gen.size()), qf.generation_dim(), "generation vector");
    require_dimension(static_cast<std::size_t>(demand.size()), qf.demand_dim(), "demand vector");
    Residuals r;
    r.equality.resize(static_cast<Eigen::Index>(qf.equalities.size()));
    for (std::size_t l = 0; l < qf.equalities.size(); ++l) {
        const auto& row = qf.equalities[l];
        r.equality[static_cast<Eigen::Index>(l)] = row.form.evaluate(v) - dot(row.generation, gen) - dot(row.demand, demand);
    }
    r.inequality.resize(static_cast<Eigen::Index>(qf.inequalities.size()));
    for (std::size_t m = 0; m < qf.inequalities.size(); ++m) {
        const auto& row = qf.inequalities[m];
        r.inequality[static_cast<Eigen::Index>(m)] = row.form.evaluate(v) - dot(row.demand, demand) - row.constant;
    }
    return r;
}

// Bundles the pieces needed downstream so callers build them once.
struct GridModel {
    NetworkCase network;
    AdmittanceModel admittance;
    QuadraticFormModel forms;

    explicit GridModel(NetworkCase c)
        : network(std::move(c)), admittance(build_admittance(network)), forms(build_quadratic_forms(network, admittance)) {}
};

}  // namespace wcpfnn::grid
