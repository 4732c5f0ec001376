#pragma once

// Interval bound propagation through the input map, affine layers and ReLUs.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/nn/mlp.hpp>

#include <Eigen/Dense>

#include <vector>

namespace wcpfnn::verify {

// Box of raw network inputs (demands in p.u.).
struct InputBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static InputBox from(const grid::InputDomain& d) { return {d.lower, d.upper}; }

    Eigen::Index dim() const { return lower.size(); }

    void check() const {
        if (lower.size() != upper.size()) throw DimensionError("box bounds differ in size");
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!(lower[i] <= upper[i])) throw ValidationError("box is empty in coordinate " + std::to_string(i));
        }
    }

    bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 0.0) const {
        return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
    }

    Eigen::VectorXd clamp(const Eigen::Ref<const Eigen::VectorXd>& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

// Pre-activation bounds of every hidden neuron and bounds of the mapped outputs.
struct LayerBounds {
    std::vector<Eigen::VectorXd> lower;  // Zhat lower per hidden layer
    std::vector<Eigen::VectorXd> upper;
    Eigen::VectorXd output_lower;
    Eigen::VectorXd output_upper;

    std::size_t stable_count() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < lower.size(); ++k) {
            n += static_cast<std::size_t>(((lower[k].array() >= 0.0) || (upper[k].array() <= 0.0)).count());
        }
        return n;
    }
};

namespace detail {

// Interval image of [lo, hi] under x -> w x + b.
inline void affine_interval(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, Eigen::VectorXd& out_lo, Eigen::VectorXd& out_hi) {
    const Eigen::MatrixXd wp = w.cwiseMax(0.0);
    const Eigen::MatrixXd wn = w.cwiseMin(0.0);
    out_lo = wp * lo + wn * hi + b;
    out_hi = wp * hi + wn * lo + b;
}

}  // namespace detail

inline LayerBounds interval_bounds(const nn::MlpParams& net, const InputBox& box) {
    net.check();
    box.check();
    require_dimension(static_cast<std::size_t>(box.dim()), static_cast<std::size_t>(net.input_dim()), "input box");
    const Eigen::VectorXd s = net.input_map.scale;
    Eigen::VectorXd lo = net.input_map.offset + s.cwiseProduct(box.lower);
    Eigen::VectorXd hi = net.input_map.offset + s.cwiseProduct(box.upper);
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (lo[i] > hi[i]) std::swap(lo[i], hi[i]);
    }
    LayerBounds out;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        Eigen::VectorXd zl, zh;
        detail::affine_interval(net.layers[k].weights, net.layers[k].biases, lo, hi, zl, zh);
        if (k + 1 < net.layers.size()) {
            out.lower.push_back(zl);
            out.upper.push_back(zh);
            lo = zl.cwiseMax(0.0);
            hi = zh.cwiseMax(0.0);
        } else {
            lo = zl;
            hi = zh;
        }
    }
    const Eigen::VectorXd& os = net.output_map.scale;
    out.output_lower = net.output_map.offset + os.cwiseMax(0.0).cwiseProduct(lo) + os.cwiseMin(0.0).cwiseProduct(hi);
    out.output_upper = net.output_map.offset + os.cwiseMax(0.0).cwiseProduct(hi) + os.cwiseMin(0.0).cwiseProduct(lo);
    return out;
}

}  // namespace wcpfnn::verify
