#pragma once

// LP bound tightening. Starting from interval bounds, each hidden layer past
// the first (and the mapped outputs) gets its pre-activation range from two
// LPs over the relaxed encoding of the layers before it, which already carry
// the tightened bounds. The result stays sound for every point of the box and
// for every point of the relaxation, so it can replace the interval bounds in
// the big-M encoding.

#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/encoding.hpp>
#include <wcpfnn/verify/simplex.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>

namespace wcpfnn::verify {

struct TighteningOptions {
    LpOptions lp;
    // Added to every LP optimum before it replaces a bound, so simplex
    // round-off can never cut off a reachable value.
    double margin = 1e-7;
};

namespace detail {

// The first k+1 layers of `net`, the last of them affine; the output map is
// the network's own when k is the last layer, the identity otherwise.
inline nn::MlpParams truncated(const nn::MlpParams& net, std::size_t k) {
    nn::MlpParams t;
    t.layers.assign(net.layers.begin(), net.layers.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    t.input_map = net.input_map;
    t.output_map = k + 1 == net.layers.size() ? net.output_map : nn::AffineMap::identity(net.layers[k].outputs());
    return t;
}

// Maximum (sign +1) or minimum (sign -1) of an affine expression over the relaxation.
inline std::optional<double> lp_extreme(const MilpModel& base, const AffineExpr& e, double sign, const LpOptions& lp) {
    MilpModel m = base;
    m.objective = e.terms;
    m.objective_constant = e.constant;
    m.maximize = sign > 0.0;
    const LpResult r = LpSolver(m, lp).solve();
    if (r.status != LpStatus::Optimal) return std::nullopt;
    return r.objective;
}

}  // namespace detail

inline LayerBounds lp_tightened_bounds(const nn::MlpParams& net, const InputBox& box, const TighteningOptions& opt = {}) {
    LayerBounds b = interval_bounds(net, box);
    const std::size_t hidden = net.hidden_layers();
    for (std::size_t k = 1; k <= hidden; ++k) {
        const nn::MlpParams t = detail::truncated(net, k);
        LayerBounds prefix;
        prefix.lower.assign(b.lower.begin(), b.lower.begin() + static_cast<std::ptrdiff_t>(k));
        prefix.upper.assign(b.upper.begin(), b.upper.begin() + static_cast<std::ptrdiff_t>(k));
        const NetworkEncoding enc = encode_network(t, prefix, box);
        const bool output = k == hidden;
        Eigen::VectorXd& lo = output ? b.output_lower : b.lower[k];
        Eigen::VectorXd& hi = output ? b.output_upper : b.upper[k];
        for (Eigen::Index j = 0; j < t.output_dim(); ++j) {
            // Stable hidden neurons are encoded without binaries either way.
            if (!output && (lo[j] >= 0.0 || hi[j] <= 0.0)) continue;
            const AffineExpr e = enc.output(t, j);
            auto pad = [&](double v) { return opt.margin * (1.0 + std::abs(v)); };
            if (auto v = detail::lp_extreme(enc.model, e, 1.0, opt.lp)) hi[j] = std::min(hi[j], *v + pad(*v));
            if (auto v = detail::lp_extreme(enc.model, e, -1.0, opt.lp)) lo[j] = std::max(lo[j], *v - pad(*v));
            if (lo[j] > hi[j]) lo[j] = hi[j] = 0.5 * (lo[j] + hi[j]);
        }
        if (output) break;
        // Later layers start from the interval image of the tightened layer.
        Eigen::VectorXd al = b.lower[k].cwiseMax(0.0), ah = b.upper[k].cwiseMax(0.0);
        for (std::size_t q = k + 1; q < net.layers.size(); ++q) {
            Eigen::VectorXd zl, zh;
            detail::affine_interval(net.layers[q].weights, net.layers[q].biases, al, ah, zl, zh);
            if (q + 1 < net.layers.size()) {
                b.lower[q] = b.lower[q].cwiseMax(zl);
                b.upper[q] = b.upper[q].cwiseMin(zh);
                al = b.lower[q].cwiseMax(0.0);
                ah = b.upper[q].cwiseMax(0.0);
            } else {
                const Eigen::VectorXd& os = net.output_map.scale;
                const Eigen::VectorXd ol = net.output_map.offset + os.cwiseMax(0.0).cwiseProduct(zl) + os.cwiseMin(0.0).cwiseProduct(zh);
                const Eigen::VectorXd oh = net.output_map.offset + os.cwiseMax(0.0).cwiseProduct(zh) + os.cwiseMin(0.0).cwiseProduct(zl);
                b.output_lower = b.output_lower.cwiseMax(ol);
                b.output_upper = b.output_upper.cwiseMin(oh);
            }
        }
    }
    return b;
}

}  // namespace wcpfnn::verify
