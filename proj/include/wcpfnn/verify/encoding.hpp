#pragma once

// Big-M MILP encoding of a ReLU network over an input box. Hidden-layer
// pre-activations Zhat are substituted as affine expressions of the previous
// layer's variables; each neuron with IBP bounds L < 0 < U gets
//
//   z <= Zhat - L (1 - y),   z >= Zhat,   z <= U y,   z >= 0,   y binary.
//
// Neurons with L >= 0 keep z = Zhat; neurons with U <= 0 drop out (z = 0).

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/milp_model.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace wcpfnn::verify {

// Per hidden neuron: 1 fixed active, 0 fixed inactive, -1 left to the MILP.
struct ReluStatusMap {
    std::vector<Eigen::VectorXi> status;

    std::size_t fixed_count() const {
        std::size_t n = 0;
        for (const auto& s : status) n += static_cast<std::size_t>((s.array() >= 0).count());
        return n;
    }
};

// Fixes neurons whose pre-activation at `center` is clearly signed relative to
// the bounds: active if Zhat > threshold * U, inactive if Zhat < threshold * L.
inline ReluStatusMap fix_relu_statuses(const nn::MlpParams& net, const LayerBounds& bounds,
                                       const Eigen::Ref<const Eigen::VectorXd>& center, double threshold = 0.1) {
    const auto trace = nn::forward_with_preactivations(net, center);
    ReluStatusMap m;
    for (std::size_t k = 0; k < trace.preactivations.size(); ++k) {
        const Eigen::VectorXd& z = trace.preactivations[k];
        Eigen::VectorXi s = Eigen::VectorXi::Constant(z.size(), -1);
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            if (z[j] > threshold * bounds.upper[k][j] && z[j] > 0.0) s[j] = 1;
            else if (z[j] < threshold * bounds.lower[k][j] && z[j] < 0.0) s[j] = 0;
        }
        m.status.push_back(std::move(s));
    }
    return m;
}

struct AffineExpr {
    LinearTerms terms;
    double constant = 0.0;
};

struct NetworkEncoding {
    MilpModel model;
    std::vector<int> input_vars;
    std::vector<std::vector<int>> z_vars;  // -1 where the neuron output is identically 0
    std::vector<std::vector<int>> y_vars;  // -1 where the neuron has no binary
    std::vector<AffineExpr> raw_outputs;   // last layer before the output map
    std::size_t stable_neurons = 0;        // fixed by the bounds
    std::size_t status_fixed_neurons = 0;  // fixed by a status map (and not already stable)

    // Mapped output m as an affine expression of the model variables.
    AffineExpr output(const nn::MlpParams& net, Eigen::Index m) const {
        AffineExpr e;
        const double s = net.output_map.scale[m];
        const AffineExpr& raw = raw_outputs[static_cast<std::size_t>(m)];
        e.constant = net.output_map.offset[m] + s * raw.constant;
        if (s != 0.0) {
            for (const auto& [j, a] : raw.terms) e.terms.emplace_back(j, s * a);
        }
        return e;
    }
};

namespace detail {

// Row i of w applied to the previous layer (variables or constants).
inline AffineExpr layer_expression(const nn::Layer& l, Eigen::Index row, const std::vector<int>& prev_vars,
                                   const Eigen::VectorXd& prev_scale, const Eigen::VectorXd& prev_offset) {
    AffineExpr e;
    e.constant = l.biases[row];
    for (Eigen::Index i = 0; i < l.inputs(); ++i) {
        const double w = l.weights(row, i);
        if (w == 0.0) continue;
        e.constant += w * prev_offset[i];
        const int v = prev_vars[static_cast<std::size_t>(i)];
        if (v >= 0 && prev_scale[i] != 0.0) e.terms.emplace_back(v, w * prev_scale[i]);
    }
    return e;
}

inline LinearTerms negated(const LinearTerms& t) {
    LinearTerms out;
    out.reserve(t.size());
    for (const auto& [j, a] : t) out.emplace_back(j, -a);
    return out;
}

}  // namespace detail

inline NetworkEncoding encode_network(const nn::MlpParams& net, const LayerBounds& bounds, const InputBox& box,
                                      const ReluStatusMap* fixed = nullptr) {
    net.check();
    box.check();
    require_dimension(static_cast<std::size_t>(box.dim()), static_cast<std::size_t>(net.input_dim()), "input box");
    if (bounds.lower.size() != net.hidden_layers()) throw DimensionError("layer bounds do not match the network");
    NetworkEncoding enc;
    MilpModel& model = enc.model;
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
        enc.input_vars.push_back(model.add_variable(box.lower[i], box.upper[i], "D" + std::to_string(i)));
    }
    // The previous layer as (variable, scale, offset): value = offset + scale * var.
    std::vector<int> prev_vars = enc.input_vars;
    Eigen::VectorXd prev_scale = net.input_map.scale;
    Eigen::VectorXd prev_offset = net.input_map.offset;

    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        if (k + 1 == net.layers.size()) {
            for (Eigen::Index j = 0; j < l.outputs(); ++j) {
                enc.raw_outputs.push_back(detail::layer_expression(l, j, prev_vars, prev_scale, prev_offset));
            }
            break;
        }
        std::vector<int> zs(static_cast<std::size_t>(l.outputs()), -1), ys(static_cast<std::size_t>(l.outputs()), -1);
        for (Eigen::Index j = 0; j < l.outputs(); ++j) {
            const AffineExpr zhat = detail::layer_expression(l, j, prev_vars, prev_scale, prev_offset);
            const double lo = bounds.lower[k][j];
            const double hi = bounds.upper[k][j];
            int status = -1;
            if (lo >= 0.0) status = 1;
            else if (hi <= 0.0) status = 0;
            if (status >= 0) ++enc.stable_neurons;
            if (status < 0 && fixed && k < fixed->status.size() && fixed->status[k][j] >= 0) {
                status = fixed->status[k][j];
                ++enc.status_fixed_neurons;
                if (status == 0) {
                    // Inactive by assumption: keep the input on its side of the kink.
                    model.add_row(zhat.terms, Sense::LessEqual, -zhat.constant);
                }
            }
            const std::string tag = std::to_string(k) + "_" + std::to_string(j);
            if (status == 0) continue;
            if (status == 1) {
                const int z = model.add_variable(std::max(lo, 0.0), std::max(hi, 0.0), "z" + tag);
                LinearTerms t = detail::negated(zhat.terms);
                t.emplace_back(z, 1.0);
                model.add_row(std::move(t), Sense::Equal, zhat.constant);
                zs[static_cast<std::size_t>(j)] = z;
                continue;
            }
            const int z = model.add_variable(0.0, hi, "z" + tag);
            const int y = model.add_variable(0.0, 1.0, "y" + tag, true);
            LinearTerms t = detail::negated(zhat.terms);
            t.emplace_back(z, 1.0);
            model.add_row(t, Sense::GreaterEqual, zhat.constant);  // z >= Zhat
            t.emplace_back(y, -lo);
            model.add_row(std::move(t), Sense::LessEqual, zhat.constant - lo);  // z <= Zhat - L (1 - y)
            model.add_row({{z, 1.0}, {y, -hi}}, Sense::LessEqual, 0.0);         // z <= U y
            zs[static_cast<std::size_t>(j)] = z;
            ys[static_cast<std::size_t>(j)] = y;
        }
        enc.z_vars.push_back(zs);
        enc.y_vars.push_back(ys);
        prev_vars = zs;
        prev_scale = Eigen::VectorXd::Ones(l.outputs());
        prev_offset = Eigen::VectorXd::Zero(l.outputs());
    }
    return enc;
}

// Full model point for input D, taken from a forward pass (y = true pattern).
// Variables added after encoding (beyond the network's) are left at zero.
inline Eigen::VectorXd complete_assignment(const nn::MlpParams& net, const NetworkEncoding& enc,
                                           const Eigen::Ref<const Eigen::VectorXd>& d) {
    const auto trace = nn::forward_with_preactivations(net, d);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(enc.model.num_variables());
    for (std::size_t i = 0; i < enc.input_vars.size(); ++i) x[enc.input_vars[i]] = d[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < enc.z_vars.size(); ++k) {
        for (std::size_t j = 0; j < enc.z_vars[k].size(); ++j) {
            const double zh = trace.preactivations[k][static_cast<Eigen::Index>(j)];
            if (enc.z_vars[k][j] >= 0) x[enc.z_vars[k][j]] = std::max(zh, 0.0);
            if (enc.y_vars[k][j] >= 0) x[enc.y_vars[k][j]] = zh > 0.0 ? 1.0 : 0.0;
        }
    }
    return x;
}

inline Eigen::VectorXd input_of(const NetworkEncoding& enc, const Eigen::Ref<const Eigen::VectorXd>& x) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(enc.input_vars.size()));
    for (std::size_t i = 0; i < enc.input_vars.size(); ++i) d[static_cast<Eigen::Index>(i)] = x[enc.input_vars[i]];
    return d;
}

inline double evaluate(const AffineExpr& e, const Eigen::Ref<const Eigen::VectorXd>& x) {
    double s = e.constant;
    for (const auto& [j, a] : e.terms) s += a * x[j];
    return s;
}

}  // namespace wcpfnn::verify
