#pragma once

// Mixed-integer linear models: boxed variables, some binary, sparse rows with
// a sense and right-hand side, and a linear objective.

#include <wcpfnn/core/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace wcpfnn::verify {

using LinearTerms = std::vector<std::pair<int, double>>;

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Variable {
    double lower = 0.0;
    double upper = 0.0;
    bool binary = false;
    std::string name;
};

struct Row {
    LinearTerms terms;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

struct MilpModel {
    std::vector<Variable> variables;
    std::vector<Row> rows;
    LinearTerms objective;
    double objective_constant = 0.0;
    bool maximize = true;

    int add_variable(double lower, double upper, std::string name, bool binary = false) {
        if (binary) {
            lower = std::max(lower, 0.0);
            upper = std::min(upper, 1.0);
        }
        if (!(lower <= upper)) throw ValidationError("variable '" + name + "' has an empty range");
        variables.push_back({lower, upper, binary, std::move(name)});
        return static_cast<int>(variables.size()) - 1;
    }

    void add_row(LinearTerms terms, Sense sense, double rhs) {
        for (const auto& [j, a] : terms) {
            if (j < 0 || j >= num_variables()) throw ValidationError("row refers to an unknown variable");
            (void)a;
        }
        rows.push_back({std::move(terms), sense, rhs});
    }

    int num_variables() const { return static_cast<int>(variables.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    std::size_t num_binaries() const {
        return static_cast<std::size_t>(std::count_if(variables.begin(), variables.end(), [](const Variable& v) { return v.binary; }));
    }

    double objective_value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        double s = objective_constant;
        for (const auto& [j, c] : objective) s += c * x[j];
        return s;
    }

    // Largest violation of any row, variable bound or integrality requirement.
    double max_violation(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        require_dimension(static_cast<std::size_t>(x.size()), variables.size(), "MILP point");
        double worst = 0.0;
        for (int j = 0; j < num_variables(); ++j) {
            const auto& v = variables[static_cast<std::size_t>(j)];
            worst = std::max({worst, v.lower - x[j], x[j] - v.upper});
            if (v.binary) worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
        }
        for (const auto& r : rows) {
            double s = 0.0;
            for (const auto& [j, a] : r.terms) s += a * x[j];
            switch (r.sense) {
                case Sense::LessEqual: worst = std::max(worst, s - r.rhs); break;
                case Sense::GreaterEqual: worst = std::max(worst, r.rhs - s); break;
                case Sense::Equal: worst = std::max(worst, std::abs(s - r.rhs)); break;
            }
        }
        return worst;
    }
};

}  // namespace wcpfnn::verify
