#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>

#include <Eigen/Dense>

#include <cmath>

namespace wcpfnn::nn {

struct LossBreakdown {
    double l0_G = 0.0;
    double l0_v = 0.0;
    double l_pf = 0.0;
    double total = 0.0;
};

// Mean over samples (columns) of the mean absolute componentwise error.
inline double loss_l0(const Eigen::Ref<const Eigen::MatrixXd>& pred, const Eigen::Ref<const Eigen::MatrixXd>& labels) {
    if (pred.rows() != labels.rows() || pred.cols() != labels.cols()) {
        throw DimensionError("prediction and label batches differ in shape");
    }
    if (pred.size() == 0) return 0.0;
    return (pred - labels).cwiseAbs().sum() / static_cast<double>(pred.rows() * pred.cols());
}

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Power-flow violation of one sample: sum_l |h_l| + sum_m max(g_m, 0). When
// gradient buffers are given, adds `scale` times the subgradient (0 at kinks).
inline double pf_violation(const grid::QuadraticFormModel& qf, const Eigen::Ref<const Eigen::VectorXd>& d,
                           const Eigen::Ref<const Eigen::VectorXd>& g, const Eigen::Ref<const Eigen::VectorXd>& v,
                           double scale = 0.0, Eigen::VectorXd* grad_g = nullptr, Eigen::VectorXd* grad_v = nullptr) {
    double total = 0.0;
    for (const auto& row : qf.equalities) {
        const double h = row.form.evaluate(v) - grid::dot(row.generation, g) - grid::dot(row.demand, d);
        total += std::abs(h);
        if (grad_v && h != 0.0) {
            const double w = scale * sign0(h);
            row.form.add_gradient(v, w, *grad_v);
            for (const auto& [j, a] : row.generation) (*grad_g)[static_cast<Eigen::Index>(j)] -= w * a;
        }
    }
    for (const auto& row : qf.inequalities) {
        if (!row.active()) continue;
        const double s = row.form.evaluate(v) - grid::dot(row.demand, d) - row.constant;
        if (s > 0.0) {
            total += s;
            if (grad_v) row.form.add_gradient(v, scale, *grad_v);
        }
    }
    return total;
}

// (1/N) sum_i (sigma_eq + sigma_ineq) over a batch; columns are samples.
inline double loss_lpf(const grid::QuadraticFormModel& qf, const Eigen::Ref<const Eigen::MatrixXd>& d,
                       const Eigen::Ref<const Eigen::MatrixXd>& g, const Eigen::Ref<const Eigen::MatrixXd>& v) {
    require_dimension(static_cast<std::size_t>(d.rows()), qf.demand_dim(), "demand batch");
    require_dimension(static_cast<std::size_t>(g.rows()), qf.generation_dim(), "generation batch");
    require_dimension(static_cast<std::size_t>(v.rows()), qf.voltage_dim(), "voltage batch");
    if (d.cols() != g.cols() || d.cols() != v.cols()) throw DimensionError("batch column counts differ");
    if (d.cols() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d.cols(); ++i) sum += pf_violation(qf, d.col(i), g.col(i), v.col(i));
    return sum / static_cast<double>(d.cols());
}

}  // namespace wcpfnn::nn
