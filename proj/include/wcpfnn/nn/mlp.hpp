#pragma once

// Fully connected ReLU networks. A network maps raw inputs through an input
// affine map, K affine layers with ReLU on all but the last, and an output
// affine map:
//
//   x = in.offset + in.scale .* D
//   Zhat_k = w_k Z_{k-1} + b_k,  Z_k = max(Zhat_k, 0)    (hidden layers)
//   y = out.offset + out.scale .* (w_K Z_{K-1} + b_K)

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace wcpfnn::nn {

// y = offset + scale .* x, elementwise.
struct AffineMap {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    static AffineMap identity(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)}; }

    Eigen::Index dim() const { return offset.size(); }

    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return offset + scale.cwiseProduct(x);
    }

    Eigen::MatrixXd apply_columns(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
        return (scale.asDiagonal() * x).colwise() + offset;
    }
};

struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd biases;   // out

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

struct MlpParams {
    std::vector<Layer> layers;
    AffineMap input_map;
    AffineMap output_map;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().inputs(); }
    Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().outputs(); }
    std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }

    std::size_t relu_count() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k + 1 < layers.size(); ++k) n += static_cast<std::size_t>(layers[k].outputs());
        return n;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
        return n;
    }

    void check() const {
        if (layers.empty()) throw ValidationError("network has no layers");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            if (l.biases.size() != l.outputs()) throw DimensionError("layer " + std::to_string(k) + " bias size mismatch");
            if (k > 0 && l.inputs() != layers[k - 1].outputs()) {
                throw DimensionError("layer " + std::to_string(k) + " does not chain with the previous layer");
            }
        }
        if (input_map.dim() != input_dim() || input_map.scale.size() != input_dim()) {
            throw DimensionError("input map does not match the first layer");
        }
        if (output_map.dim() != output_dim() || output_map.scale.size() != output_dim()) {
            throw DimensionError("output map does not match the last layer");
        }
    }
};

// Weights and biases uniform in +-sqrt(1/fan_in); identity maps.
inline MlpParams init_mlp(const std::vector<Eigen::Index>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ValidationError("network needs at least input and output sizes");
    MlpParams net;
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        if (dims[k] < 1 || dims[k + 1] < 1) throw ValidationError("layer sizes must be positive");
        const double bound = std::sqrt(1.0 / static_cast<double>(dims[k]));
        Layer l{Eigen::MatrixXd(dims[k + 1], dims[k]), Eigen::VectorXd(dims[k + 1])};
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = rng.uniform(-bound, bound);
        }
        for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases[i] = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(l));
    }
    net.input_map = AffineMap::identity(dims.front());
    net.output_map = AffineMap::identity(dims.back());
    return net;
}

// Maps the domain box onto [0,1]; zero-width coordinates map to 0.
inline AffineMap normalizing_map(const grid::InputDomain& domain) {
    AffineMap m{Eigen::VectorXd::Zero(domain.dim()), Eigen::VectorXd::Zero(domain.dim())};
    for (Eigen::Index i = 0; i < domain.dim(); ++i) {
        const double w = domain.upper[i] - domain.lower[i];
        if (w > 0.0) {
            m.scale[i] = 1.0 / w;
            m.offset[i] = -domain.lower[i] / w;
        }
    }
    return m;
}

// Raw outputs (before the output map) of a batch; columns are samples.
inline Eigen::MatrixXd forward_normalized(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& x) {
    Eigen::MatrixXd a = x;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        Eigen::MatrixXd z = (l.weights * a).colwise() + l.biases;
        if (k + 1 < net.layers.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

inline Eigen::VectorXd forward(const MlpParams& net, const Eigen::Ref<const Eigen::VectorXd>& d) {
    require_dimension(static_cast<std::size_t>(d.size()), static_cast<std::size_t>(net.input_dim()), "network input");
    return net.output_map.apply(forward_normalized(net, net.input_map.apply(d)).col(0));
}

// Batch forward pass; columns are samples.
inline Eigen::MatrixXd forward_batch(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& d) {
    require_dimension(static_cast<std::size_t>(d.rows()), static_cast<std::size_t>(net.input_dim()), "network input");
    return net.output_map.apply_columns(forward_normalized(net, net.input_map.apply_columns(d)));
}

struct ForwardTrace {
    Eigen::VectorXd output;
    std::vector<Eigen::VectorXd> preactivations;  // Zhat_k, hidden layers only
    std::vector<Eigen::VectorXi> patterns;        // y_k = 1[Zhat_k > 0]
};

inline ForwardTrace forward_with_preactivations(const MlpParams& net, const Eigen::Ref<const Eigen::VectorXd>& d) {
    require_dimension(static_cast<std::size_t>(d.size()), static_cast<std::size_t>(net.input_dim()), "network input");
    ForwardTrace t;
    Eigen::VectorXd a = net.input_map.apply(d);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        Eigen::VectorXd z = l.weights * a + l.biases;
        if (k + 1 < net.layers.size()) {
            t.preactivations.push_back(z);
            t.patterns.push_back((z.array() > 0.0).cast<int>());
            a = z.cwiseMax(0.0);
        } else {
            a = std::move(z);
        }
    }
    t.output = net.output_map.apply(a);
    return t;
}

// The two networks of the surrogate: generation and voltage predictions from
// the same demand input.
struct PfnnPair {
    MlpParams net_G;
    MlpParams net_v;
};

struct ArchitectureConfig {
    std::vector<Eigen::Index> hidden{20, 20, 20};
};

// Builds both networks with the domain-normalizing input map. The generation
// output map spans each generator's bounds; the voltage output map has unit
// scale, centers real parts at 1 p.u. and pins the slack imaginary entry to zero.
inline PfnnPair make_pfnn_pair(const grid::QuadraticFormModel& qf, const grid::InputDomain& domain,
                               const ArchitectureConfig& arch, std::uint64_t seed) {
    require_dimension(static_cast<std::size_t>(domain.dim()), qf.demand_dim(), "input domain");
    auto dims = [&](std::size_t out) {
        std::vector<Eigen::Index> d{static_cast<Eigen::Index>(qf.demand_dim())};
        d.insert(d.end(), arch.hidden.begin(), arch.hidden.end());
        d.push_back(static_cast<Eigen::Index>(out));
        return d;
    };
    PfnnPair p;
    p.net_G = init_mlp(dims(qf.generation_dim()), seed);
    p.net_v = init_mlp(dims(qf.voltage_dim()), derive_seed(seed, 1));
    const AffineMap in = normalizing_map(domain);
    p.net_G.input_map = in;
    p.net_v.input_map = in;
    p.net_G.output_map = {qf.gen_lower, qf.gen_upper - qf.gen_lower};
    p.net_v.output_map = AffineMap::identity(static_cast<Eigen::Index>(qf.voltage_dim()));
    p.net_v.output_map.offset.head(static_cast<Eigen::Index>(qf.num_buses)).setOnes();
    p.net_v.output_map.scale[static_cast<Eigen::Index>(qf.num_buses + qf.slack)] = 0.0;
    return p;
}

}  // namespace wcpfnn::nn
