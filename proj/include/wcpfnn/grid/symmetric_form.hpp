#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

namespace wcpfnn::grid {

// Sparse symmetric matrix A stored as its upper triangle. Only the upper
// triangle exists, so A == A^T holds exactly by construction.
class SymmetricForm {
public:
    struct Entry {
        std::size_t row;
        std::size_t col;  // row <= col
        double value;
    };

    SymmetricForm() = default;
    explicit SymmetricForm(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    const std::vector<Entry>& entries() const { return entries_; }

    double operator()(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        for (const auto& e : entries_) {
            if (e.row == i && e.col == j) return e.value;
        }
        return 0.0;
    }

    // v^T A v
    double evaluate(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        double sum = 0.0;
        for (const auto& e : entries_) {
            const double term = e.value * v[static_cast<Eigen::Index>(e.row)] * v[static_cast<Eigen::Index>(e.col)];
            sum += e.row == e.col ? term : 2.0 * term;
        }
        return sum;
    }

    // grad += scale * 2 A v, the gradient of scale * v^T A v.
    void add_gradient(const Eigen::Ref<const Eigen::VectorXd>& v, double scale, Eigen::Ref<Eigen::VectorXd> grad) const {
        const double s = 2.0 * scale;
        for (const auto& e : entries_) {
            const auto r = static_cast<Eigen::Index>(e.row);
            const auto c = static_cast<Eigen::Index>(e.col);
            grad[r] += s * e.value * v[c];
            if (r != c) grad[c] += s * e.value * v[r];
        }
    }

    Eigen::MatrixXd dense() const {
        const auto n = static_cast<Eigen::Index>(dim_);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (const auto& e : entries_) {
            m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
            m(static_cast<Eigen::Index>(e.col), static_cast<Eigen::Index>(e.row)) = e.value;
        }
        return m;
    }

    SymmetricForm negated() const {
        SymmetricForm out = *this;
        for (auto& e : out.entries_) e.value = -e.value;
        return out;
    }

    class Builder {
    public:
        explicit Builder(std::size_t dim) : dim_(dim) {}

        // Adds x to the symmetric pair (i, j) and (j, i), i.e. contributes
        // x * v_i * v_j to the quadratic form.
        void add_product(std::size_t i, std::size_t j, double x) {
            if (x == 0.0) return;
            if (i == j) {
                acc_[{i, i}] += x;
            } else {
                acc_[{std::min(i, j), std::max(i, j)}] += 0.5 * x;
            }
        }

        SymmetricForm build() const {
            SymmetricForm f(dim_);
            for (const auto& [key, value] : acc_) {
                if (value != 0.0) f.entries_.push_back({key.first, key.second, value});
            }
            return f;
        }

    private:
        std::size_t dim_;
        std::map<std::pair<std::size_t, std::size_t>, double> acc_;
    };

private:
    std::size_t dim_ = 0;
    std::vector<Entry> entries_;
};

// Sparse coefficient vector (index, value).
using SparseVector = std::vector<std::pair<std::size_t, double>>;

inline double dot(const SparseVector& a, const Eigen::Ref<const Eigen::VectorXd>& x) {
    double s = 0.0;
    for (const auto& [i, v] : a) s += v * x[static_cast<Eigen::Index>(i)];
    return s;
}

}  // namespace wcpfnn::grid
