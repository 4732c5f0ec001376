#pragma once

// Independent re-implementations and finite-difference helpers shared by the
// unit and acceptance suites.

#include <wcpfnn/core/random.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/nn/losses.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/nn/training.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace wcpfnn::testing {

// 1-2-1 net computing |x|: w1 = [1; -1], b = 0, w2 = [1 1].
inline nn::MlpParams abs_net() {
    nn::MlpParams net;
    nn::Layer l1{Eigen::MatrixXd(2, 1), Eigen::VectorXd::Zero(2)};
    l1.weights << 1.0, -1.0;
    nn::Layer l2{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
    l2.weights << 1.0, 1.0;
    net.layers = {l1, l2};
    net.input_map = nn::AffineMap::identity(1);
    net.output_map = nn::AffineMap::identity(1);
    return net;
}

// Random weights plus random nonidentity boundary maps.
inline nn::MlpParams random_mlp(const std::vector<Eigen::Index>& dims, std::uint64_t seed) {
    nn::MlpParams net = nn::init_mlp(dims, seed);
    Rng rng(derive_seed(seed, 77));
    for (Eigen::Index i = 0; i < dims.front(); ++i) {
        net.input_map.offset[i] = rng.uniform(-1.0, 1.0);
        net.input_map.scale[i] = rng.uniform(0.5, 2.0);
    }
    for (Eigen::Index i = 0; i < dims.back(); ++i) {
        net.output_map.offset[i] = rng.uniform(-1.0, 1.0);
        net.output_map.scale[i] = rng.uniform(0.5, 2.0);
    }
    return net;
}

// Scalar-loop forward pass written without Eigen expressions.
inline std::vector<double> reference_forward(const nn::MlpParams& net, const std::vector<double>& input) {
    std::vector<double> a(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        a[i] = net.input_map.offset[static_cast<Eigen::Index>(i)] + net.input_map.scale[static_cast<Eigen::Index>(i)] * input[i];
    }
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        std::vector<double> z(static_cast<std::size_t>(l.outputs()));
        for (Eigen::Index r = 0; r < l.outputs(); ++r) {
            double s = l.biases[r];
            for (Eigen::Index c = 0; c < l.inputs(); ++c) s += l.weights(r, c) * a[static_cast<std::size_t>(c)];
            const bool hidden = k + 1 < net.layers.size();
            z[static_cast<std::size_t>(r)] = hidden ? std::max(s, 0.0) : s;
        }
        a = std::move(z);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = net.output_map.offset[static_cast<Eigen::Index>(i)] + net.output_map.scale[static_cast<Eigen::Index>(i)] * a[i];
    }
    return a;
}

// True when no ReLU pre-activation and no absolute-value / hinge argument of
// the loss lies within `margin` of its kink for this sample.
inline bool kink_free(const nn::PfnnPair& pair, const grid::QuadraticFormModel& qf, const Eigen::VectorXd& d,
                      const Eigen::VectorXd* g_label, const Eigen::VectorXd* v_label, double margin) {
    const auto tg = nn::forward_with_preactivations(pair.net_G, d);
    const auto tv = nn::forward_with_preactivations(pair.net_v, d);
    for (const auto* t : {&tg, &tv}) {
        for (const auto& z : t->preactivations) {
            if ((z.array().abs() <= margin).any()) return false;
        }
    }
    if (g_label && ((tg.output - *g_label).array().abs() <= margin).any()) return false;
    if (v_label) {
        const Eigen::VectorXd ev = tv.output - *v_label;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            // The pinned slack output has zero error gradient; its kink is harmless.
            if (pair.net_v.output_map.scale[i] != 0.0 && std::abs(ev[i]) <= margin) return false;
        }
    }
    for (const auto& row : qf.equalities) {
        const double h = row.form.evaluate(tv.output) - grid::dot(row.generation, tg.output) - grid::dot(row.demand, d);
        if (std::abs(h) > margin) continue;
        // A row that depends only on pinned outputs (the slack reference) is
        // constant in the parameters, so its kink is harmless.
        Eigen::VectorXd gv = Eigen::VectorXd::Zero(tv.output.size());
        row.form.add_gradient(tv.output, 1.0, gv);
        gv = gv.cwiseProduct(pair.net_v.output_map.scale);
        if (!row.generation.empty() || gv.cwiseAbs().maxCoeff() > 0.0) return false;
    }
    for (const auto& row : qf.inequalities) {
        if (!row.active()) continue;
        const double s = row.form.evaluate(tv.output) - grid::dot(row.demand, d) - row.constant;
        if (std::abs(s) <= margin) return false;
    }
    return true;
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

// Central differences over every weight and bias of both nets against the
// analytic gradient. Relative error uses max(|a|, |f|, floor) as denominator.
inline GradientCheck finite_difference_check(nn::PfnnPair pair, const nn::Batch& batch, const grid::QuadraticFormModel& qf,
                                             const nn::LossWeights& w, double h = 1e-5, double floor = 1e-6) {
    nn::PairGradients grads;
    nn::evaluate_loss(pair, batch, qf, w, &grads);
    GradientCheck out;
    auto visit = [&](std::vector<nn::Layer>& layers, const std::vector<nn::Layer>& analytic) {
        for (std::size_t k = 0; k < layers.size(); ++k) {
            auto check = [&](double& param, double a) {
                const double keep = param;
                param = keep + h;
                const double up = nn::evaluate_loss(pair, batch, qf, w).total;
                param = keep - h;
                const double down = nn::evaluate_loss(pair, batch, qf, w).total;
                param = keep;
                const double f = (up - down) / (2.0 * h);
                const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
                out.max_relative_error = std::max(out.max_relative_error, rel);
                ++out.checked;
            };
            for (Eigen::Index i = 0; i < layers[k].weights.size(); ++i) {
                check(layers[k].weights.data()[i], analytic[k].weights.data()[i]);
            }
            for (Eigen::Index i = 0; i < layers[k].biases.size(); ++i) check(layers[k].biases[i], analytic[k].biases[i]);
        }
    };
    visit(pair.net_G.layers, grads.G);
    visit(pair.net_v.layers, grads.v);
    return out;
}

// A random pair on `qf` plus a kink-free batch of labeled and unlabeled samples.
struct GradientFixture {
    nn::PfnnPair pair;
    nn::Batch batch;
};

inline GradientFixture random_gradient_fixture(const grid::QuadraticFormModel& qf, const grid::InputDomain& domain,
                                               std::uint64_t seed, int samples = 6) {
    GradientFixture fx;
    nn::ArchitectureConfig arch;
    arch.hidden = {8, 8};
    fx.pair = nn::make_pfnn_pair(qf, domain, arch, seed);
    Rng rng(derive_seed(seed, 5));
    const auto ng = static_cast<Eigen::Index>(qf.generation_dim());
    const auto nv = static_cast<Eigen::Index>(qf.voltage_dim());
    std::vector<Eigen::VectorXd> ds, gs, vs;
    std::vector<char> labeled;
    for (int attempt = 0; attempt < 2000 && static_cast<int>(ds.size()) < samples; ++attempt) {
        Eigen::VectorXd d(domain.dim()), g(ng), v(nv);
        for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.uniform(domain.lower[i], domain.upper[i]);
        for (Eigen::Index i = 0; i < ng; ++i) g[i] = rng.uniform(qf.gen_lower[i], qf.gen_upper[i]);
        for (Eigen::Index i = 0; i < nv; ++i) v[i] = rng.uniform(-0.2, 1.1);
        const bool lab = ds.size() % 3 != 2;
        if (!kink_free(fx.pair, qf, d, lab ? &g : nullptr, lab ? &v : nullptr, 1e-3)) continue;
        ds.push_back(d);
        gs.push_back(g);
        vs.push_back(v);
        labeled.push_back(lab ? 1 : 0);
    }
    const auto n = static_cast<Eigen::Index>(ds.size());
    fx.batch.demand.resize(domain.dim(), n);
    fx.batch.generation = Eigen::MatrixXd::Zero(ng, n);
    fx.batch.voltage = Eigen::MatrixXd::Zero(nv, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        fx.batch.demand.col(i) = ds[static_cast<std::size_t>(i)];
        if (labeled[static_cast<std::size_t>(i)]) {
            fx.batch.generation.col(i) = gs[static_cast<std::size_t>(i)];
            fx.batch.voltage.col(i) = vs[static_cast<std::size_t>(i)];
            ++fx.batch.labeled_count;
        }
    }
    fx.batch.labeled = labeled;
    return fx;
}

}  // namespace wcpfnn::testing
