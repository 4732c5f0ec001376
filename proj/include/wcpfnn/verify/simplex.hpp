#pragma once

// Dense bounded-variable primal simplex. Each row i gets a logical variable
// r_i = a_i x whose bounds encode the sense, so the slack basis is always a
// valid start. Phase 1 minimizes the sum of bound infeasibilities of the basic
// variables; phase 2 optimizes the objective. The basis inverse is kept
// explicitly with product-form row updates and refactored periodically.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/verify/milp_model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace wcpfnn::verify {

enum class LpStatus { Optimal, Infeasible };

// Basis snapshot for warm starts: the basic variable of each row and, for
// every variable (structural then logical), whether it rests at its upper bound.
struct LpBasis {
    std::vector<int> head;
    std::vector<char> at_upper;
};

struct LpOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    int max_iterations = 200000;
    int refactor_interval = 64;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;  // in the model's sense (max or min), including the constant
    Eigen::VectorXd x;       // structural variables
    LpBasis basis;
    int iterations = 0;
};

class LpSolver {
public:
    explicit LpSolver(const MilpModel& model, LpOptions opt = {}) : opt_(opt) {
        n_ = model.num_variables();
        m_ = model.num_rows();
        a_ = Eigen::MatrixXd::Zero(m_, n_);
        row_lo_.resize(m_);
        row_up_.resize(m_);
        constexpr double inf = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m_; ++i) {
            const auto& r = model.rows[static_cast<std::size_t>(i)];
            for (const auto& [j, c] : r.terms) a_(i, j) += c;
            row_lo_[i] = r.sense == Sense::LessEqual ? -inf : r.rhs;
            row_up_[i] = r.sense == Sense::GreaterEqual ? inf : r.rhs;
        }
        cost_ = Eigen::VectorXd::Zero(n_);
        const double sign = model.maximize ? -1.0 : 1.0;
        for (const auto& [j, c] : model.objective) cost_[j] += sign * c;
        lower_.resize(n_);
        upper_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            lower_[j] = model.variables[static_cast<std::size_t>(j)].lower;
            upper_[j] = model.variables[static_cast<std::size_t>(j)].upper;
        }
        sign_ = sign;
        constant_ = model.objective_constant;
    }

    int num_variables() const { return n_; }
    int num_rows() const { return m_; }
    const Eigen::VectorXd& model_lower() const { return lower_; }
    const Eigen::VectorXd& model_upper() const { return upper_; }

    LpResult solve(const LpBasis* warm = nullptr) const { return solve(lower_, upper_, warm); }

    // Solves with the structural bounds replaced by `lower` / `upper`.
    LpResult solve(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const LpBasis* warm = nullptr) const {
        require_dimension(static_cast<std::size_t>(lower.size()), static_cast<std::size_t>(n_), "LP lower bounds");
        require_dimension(static_cast<std::size_t>(upper.size()), static_cast<std::size_t>(n_), "LP upper bounds");
        State s(*this, lower, upper);
        for (int j = 0; j < n_; ++j) {
            if (lower[j] > upper[j]) {
                LpResult r;
                r.status = LpStatus::Infeasible;
                return r;
            }
        }
        if (!(warm && s.load(*warm))) s.slack_basis();
        return s.run();
    }

private:
    struct State {
        const LpSolver& lp;
        int n, m, total;
        Eigen::VectorXd lo, up;
        std::vector<int> head;
        std::vector<int> pos;  // row of a basic variable, -1 if nonbasic
        std::vector<char> at_upper;
        Eigen::MatrixXd binv;

        State(const LpSolver& owner, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper)
            : lp(owner), n(owner.n_), m(owner.m_), total(owner.n_ + owner.m_) {
            lo.resize(total);
            up.resize(total);
            lo.head(n) = lower;
            up.head(n) = upper;
            lo.tail(m) = owner.row_lo_;
            up.tail(m) = owner.row_up_;
        }

        double nonbasic_value(int j) const {
            if (lo[j] == up[j]) return lo[j];
            if (at_upper[static_cast<std::size_t>(j)]) return std::isfinite(up[j]) ? up[j] : (std::isfinite(lo[j]) ? lo[j] : 0.0);
            return std::isfinite(lo[j]) ? lo[j] : (std::isfinite(up[j]) ? up[j] : 0.0);
        }

        void column(int j, Eigen::VectorXd& out) const {
            if (j < n) {
                out = lp.a_.col(j);
            } else {
                out.setZero(m);
                out[j - n] = -1.0;
            }
        }

        void slack_basis() {
            head.resize(static_cast<std::size_t>(m));
            pos.assign(static_cast<std::size_t>(total), -1);
            at_upper.assign(static_cast<std::size_t>(total), 0);
            for (int i = 0; i < m; ++i) {
                head[static_cast<std::size_t>(i)] = n + i;
                pos[static_cast<std::size_t>(n + i)] = i;
            }
            for (int j = 0; j < n; ++j) at_upper[static_cast<std::size_t>(j)] = !std::isfinite(lo[j]) && std::isfinite(up[j]);
            binv = -Eigen::MatrixXd::Identity(m, m);
        }

        bool load(const LpBasis& b) {
            if (static_cast<int>(b.head.size()) != m || static_cast<int>(b.at_upper.size()) != total) return false;
            head = b.head;
            at_upper = b.at_upper;
            pos.assign(static_cast<std::size_t>(total), -1);
            for (int i = 0; i < m; ++i) {
                const int j = head[static_cast<std::size_t>(i)];
                if (j < 0 || j >= total || pos[static_cast<std::size_t>(j)] >= 0) return false;
                pos[static_cast<std::size_t>(j)] = i;
            }
            return refactor();
        }

        // Basis inverse from the structural block only. With logical columns
        // -e_r for the rows r in R, B x = b splits into K x_S = b_C on the
        // remaining rows C (K = A[C, S]) and x_r = A[r, S] x_S - b_r.
        bool refactor() {
            if (m == 0) {
                binv.resize(0, 0);
                return true;
            }
            std::vector<int> spos, scol, crow;
            std::vector<char> covered(static_cast<std::size_t>(m), 0);
            for (int p = 0; p < m; ++p) {
                const int j = head[static_cast<std::size_t>(p)];
                if (j >= n) {
                    covered[static_cast<std::size_t>(j - n)] = 1;
                } else {
                    spos.push_back(p);
                    scol.push_back(j);
                }
            }
            for (int i = 0; i < m; ++i) {
                if (!covered[static_cast<std::size_t>(i)]) crow.push_back(i);
            }
            const auto k = static_cast<Eigen::Index>(spos.size());
            if (static_cast<Eigen::Index>(crow.size()) != k) return false;
            binv.setZero(m, m);
            Eigen::MatrixXd kinv;
            if (k > 0) {
                Eigen::MatrixXd kmat(k, k);
                for (Eigen::Index b = 0; b < k; ++b) {
                    for (Eigen::Index a = 0; a < k; ++a) kmat(a, b) = lp.a_(crow[static_cast<std::size_t>(a)], scol[static_cast<std::size_t>(b)]);
                }
                Eigen::FullPivLU<Eigen::MatrixXd> lu(kmat);
                lu.setThreshold(1e-11);
                if (lu.rank() < k) {
                    repair(kmat, lu.rank(), spos, crow);
                    return refactor();
                }
                kinv = lu.inverse();
                for (Eigen::Index q = 0; q < k; ++q) {
                    for (Eigen::Index a = 0; a < k; ++a) binv(spos[static_cast<std::size_t>(q)], crow[static_cast<std::size_t>(a)]) = kinv(q, a);
                }
            }
            Eigen::RowVectorXd ar(k);
            for (int p = 0; p < m; ++p) {
                const int j = head[static_cast<std::size_t>(p)];
                if (j < n) continue;
                const int r = j - n;
                if (k > 0) {
                    for (Eigen::Index b = 0; b < k; ++b) ar[b] = lp.a_(r, scol[static_cast<std::size_t>(b)]);
                    const Eigen::RowVectorXd row = ar * kinv;
                    for (Eigen::Index a = 0; a < k; ++a) binv(p, crow[static_cast<std::size_t>(a)]) = row[a];
                }
                binv(p, r) = -1.0;
            }
            return true;
        }

        // Swaps the dependent structural columns of a singular K for the
        // logicals of the rows they leave uncovered; those structurals go
        // nonbasic at a bound and phase 1 absorbs the resulting infeasibility.
        void repair(const Eigen::MatrixXd& kmat, Eigen::Index rank, const std::vector<int>& spos, const std::vector<int>& crow) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> cq(kmat);
            const Eigen::Index r = std::min(rank, cq.rank());
            const auto& cols = cq.colsPermutation().indices();
            Eigen::MatrixXd sub(kmat.rows(), r);
            for (Eigen::Index q = 0; q < r; ++q) sub.col(q) = kmat.col(cols[q]);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rq(sub.transpose());
            const auto& rows = rq.colsPermutation().indices();
            for (Eigen::Index q = r; q < kmat.cols(); ++q) {
                const int p = spos[static_cast<std::size_t>(cols[q])];
                const int j = head[static_cast<std::size_t>(p)];
                const int logical = n + crow[static_cast<std::size_t>(rows[q])];
                pos[static_cast<std::size_t>(j)] = -1;
                at_upper[static_cast<std::size_t>(j)] = !std::isfinite(lo[j]) && std::isfinite(up[j]);
                head[static_cast<std::size_t>(p)] = logical;
                pos[static_cast<std::size_t>(logical)] = p;
            }
        }

        Eigen::VectorXd basic_values() const {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
            for (int j = 0; j < total; ++j) {
                if (pos[static_cast<std::size_t>(j)] >= 0) continue;
                const double v = nonbasic_value(j);
                if (v == 0.0) continue;
                if (j < n) {
                    rhs.noalias() -= lp.a_.col(j) * v;
                } else {
                    rhs[j - n] += v;
                }
            }
            return binv * rhs;
        }

        double tol(double bound) const { return lp.opt_.feasibility_tol * (1.0 + std::abs(bound)); }

        LpResult run() {
            LpResult res;
            int since_refactor = 0;
            int degenerate = 0;
            Eigen::VectorXd cb(m), y(m), col(m), alpha(m);
            std::vector<signed char> infeasible(static_cast<std::size_t>(m));
            for (int iter = 0;; ++iter) {
                if (iter >= lp.opt_.max_iterations) throw NumericalError("simplex iteration limit reached");
                if (since_refactor >= lp.opt_.refactor_interval) {
                    refactor();
                    since_refactor = 0;
                }
                const Eigen::VectorXd xb = basic_values();
                bool phase1 = false;
                for (int i = 0; i < m; ++i) {
                    const int j = head[static_cast<std::size_t>(i)];
                    signed char f = 0;
                    if (xb[i] < lo[j] - tol(lo[j])) f = -1;
                    else if (xb[i] > up[j] + tol(up[j])) f = 1;
                    infeasible[static_cast<std::size_t>(i)] = f;
                    phase1 = phase1 || f != 0;
                    cb[i] = f != 0 ? static_cast<double>(f) : (j < n ? lp.cost_[j] : 0.0);
                }
                if (phase1) {
                    for (int i = 0; i < m; ++i) {
                        if (infeasible[static_cast<std::size_t>(i)] == 0) cb[i] = 0.0;
                    }
                }
                y.noalias() = binv.transpose() * cb;

                // Pricing: Dantzig, or Bland's smallest index while stalling.
                const bool bland = degenerate > 50;
                int enter = -1;
                double enter_dir = 0.0;
                double best = 0.0;
                const double otol = lp.opt_.optimality_tol;
                for (int j = 0; j < total; ++j) {
                    if (pos[static_cast<std::size_t>(j)] >= 0 || lo[j] == up[j]) continue;
                    const double cj = (!phase1 && j < n) ? lp.cost_[j] : 0.0;
                    const double d = j < n ? cj - lp.a_.col(j).dot(y) : y[j - n];
                    const bool free = !std::isfinite(lo[j]) && !std::isfinite(up[j]);
                    const bool resting_upper =
                        !free && (!std::isfinite(lo[j]) || (at_upper[static_cast<std::size_t>(j)] && std::isfinite(up[j])));
                    double dir = 0.0;
                    if (d < -otol && (free || !resting_upper)) dir = 1.0;
                    else if (d > otol && (free || resting_upper)) dir = -1.0;
                    if (dir == 0.0) continue;
                    if (bland) {
                        enter = j;
                        enter_dir = dir;
                        break;
                    }
                    if (std::abs(d) > best) {
                        best = std::abs(d);
                        enter = j;
                        enter_dir = dir;
                    }
                }
                if (enter < 0) {
                    // Confirm the verdict on a fresh factorization.
                    if (since_refactor > 0) {
                        refactor();
                        since_refactor = 0;
                        continue;
                    }
                    res.iterations = iter;
                    res.status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
                    break;
                }

                column(enter, col);
                alpha.noalias() = binv * col;
                // Ratio test: basic values move by -dir * alpha per unit step.
                double step = (std::isfinite(lo[enter]) && std::isfinite(up[enter])) ? up[enter] - lo[enter]
                                                                                      : std::numeric_limits<double>::infinity();
                int leave = -1;
                bool leave_upper = false;
                double leave_pivot = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double a = -enter_dir * alpha[i];
                    if (std::abs(a) < 1e-11) continue;
                    const int j = head[static_cast<std::size_t>(i)];
                    const double x = xb[i];
                    double t = std::numeric_limits<double>::infinity();
                    bool to_upper = false;
                    const signed char f = infeasible[static_cast<std::size_t>(i)];
                    if (f < 0) {
                        if (a > 0.0) t = (lo[j] - x) / a;
                    } else if (f > 0) {
                        if (a < 0.0) {
                            t = (up[j] - x) / a;
                            to_upper = true;
                        }
                    } else if (a < 0.0) {
                        if (std::isfinite(lo[j])) t = std::max(0.0, (x - lo[j]) / -a);
                    } else if (std::isfinite(up[j])) {
                        t = std::max(0.0, (up[j] - x) / a);
                        to_upper = true;
                    }
                    if (!std::isfinite(t)) continue;
                    // Ties go to the larger pivot (Bland: smaller index); a tie with
                    // the entering variable's own bound flip keeps the flip.
                    const bool tie = leave >= 0 && t <= step + 1e-12 &&
                                     (bland ? j < head[static_cast<std::size_t>(leave)] : std::abs(a) > leave_pivot);
                    if (t < step - 1e-12 || tie) {
                        step = t;
                        leave = i;
                        leave_upper = to_upper;
                        leave_pivot = std::abs(a);
                    }
                }
                if (!std::isfinite(step)) {
                    throw NumericalError("LP is unbounded; every variable must be boxed");
                }
                degenerate = step <= 1e-12 ? degenerate + 1 : 0;
                if (leave < 0) {
                    // The entering variable reaches its opposite bound.
                    at_upper[static_cast<std::size_t>(enter)] = enter_dir > 0.0;
                    continue;
                }
                const int out = head[static_cast<std::size_t>(leave)];
                at_upper[static_cast<std::size_t>(out)] = leave_upper;
                pos[static_cast<std::size_t>(out)] = -1;
                head[static_cast<std::size_t>(leave)] = enter;
                pos[static_cast<std::size_t>(enter)] = leave;
                const Eigen::RowVectorXd pivot_row = binv.row(leave) / alpha[leave];
                binv.noalias() -= alpha * pivot_row;
                binv.row(leave) = pivot_row;
                ++since_refactor;
            }
            if (res.status == LpStatus::Optimal) {
                const Eigen::VectorXd xb = basic_values();
                res.x.resize(n);
                for (int j = 0; j < n; ++j) {
                    const int p = pos[static_cast<std::size_t>(j)];
                    res.x[j] = p >= 0 ? std::clamp(xb[p], lo[j], up[j]) : nonbasic_value(j);
                }
                res.objective = lp.constant_ + lp.sign_ * lp.cost_.dot(res.x);
            }
            res.basis.head = head;
            res.basis.at_upper = at_upper;
            return res;
        }
    };

    LpOptions opt_;
    int n_ = 0;
    int m_ = 0;
    Eigen::MatrixXd a_;
    Eigen::VectorXd row_lo_, row_up_;
    Eigen::VectorXd cost_;  // minimization form
    Eigen::VectorXd lower_, upper_;
    double sign_ = 1.0;
    double constant_ = 0.0;
};

// LP relaxation of `model` (binaries relaxed to [0,1]).
inline LpResult solve_lp(const MilpModel& model, const LpOptions& opt = {}) { return LpSolver(model, opt).solve(); }

}  // namespace wcpfnn::verify
