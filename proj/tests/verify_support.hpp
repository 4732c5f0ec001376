#pragma once

// Brute-force oracles for the verifier: LP by vertex enumeration and network
// maxima by activation-pattern enumeration. Neither touches the simplex code.

#include <wcpfnn/core/random.hpp>
#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/milp_model.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace wcpfnn::testing {

// Half-space a x <= b.
struct HalfSpace {
    Eigen::VectorXd a;
    double b;
};

// Maximum of c x + c0 over {x : a_i x <= b_i} by enumerating every vertex
// (intersection of n linearly independent constraint planes). Returns nullopt
// when no vertex is feasible. Requires a bounded polytope.
inline std::optional<double> vertex_enumeration_max(const std::vector<HalfSpace>& hs, const Eigen::VectorXd& c, double c0,
                                                    double tol = 1e-9) {
    const auto n = static_cast<int>(c.size());
    const auto k = static_cast<int>(hs.size());
    std::optional<double> best;
    if (n == 0) {
        for (const auto& h : hs) {
            if (h.b < -tol) return std::nullopt;
        }
        return c0;
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        Eigen::MatrixXd a(n, n);
        Eigen::VectorXd b(n);
        for (int r = 0; r < n; ++r) {
            a.row(r) = hs[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])].a.transpose();
            b[r] = hs[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])].b;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() == n) {
            const Eigen::VectorXd x = lu.solve(b);
            bool ok = true;
            for (const auto& h : hs) {
                if (h.a.dot(x) > h.b + tol * (1.0 + std::abs(h.b))) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                const double v = c.dot(x) + c0;
                if (!best || v > *best) best = v;
            }
        }
        // Next combination of n out of k.
        int i = n - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == k - n + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

// Half-space form of a continuous model (binaries treated as [0,1]).
inline std::vector<HalfSpace> model_halfspaces(const verify::MilpModel& m) {
    const auto n = static_cast<Eigen::Index>(m.num_variables());
    std::vector<HalfSpace> hs;
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[j] = 1.0;
        hs.push_back({e, m.variables[static_cast<std::size_t>(j)].upper});
        hs.push_back({-e, -m.variables[static_cast<std::size_t>(j)].lower});
    }
    for (const auto& r : m.rows) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        for (const auto& [j, c] : r.terms) a[j] += c;
        if (r.sense != verify::Sense::GreaterEqual) hs.push_back({a, r.rhs});
        if (r.sense != verify::Sense::LessEqual) hs.push_back({-a, -r.rhs});
    }
    return hs;
}

inline std::optional<double> vertex_enumeration_lp(const verify::MilpModel& m) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m.num_variables());
    for (const auto& [j, v] : m.objective) c[j] += v;
    const double s = m.maximize ? 1.0 : -1.0;
    auto best = vertex_enumeration_max(model_halfspaces(m), s * c, s * m.objective_constant);
    if (best) *best *= s;
    return best;
}

// Maximum of out_m(D) (after the output map, times `sign`) over the box, by
// enumerating all activation patterns. Each pattern's region is the polytope
// {D in box : sign constraints of every Zhat}; on it the net is affine in D,
// and the region maximum is found by vertex enumeration in D-space.
// Practical for input dimension <= 3 and <= 12 neurons.
inline std::optional<double> pattern_enumeration_max(const nn::MlpParams& net, const Eigen::VectorXd& lower,
                                                     const Eigen::VectorXd& upper, Eigen::Index component, double sign,
                                                     double offset = 0.0) {
    const Eigen::Index n = net.input_dim();
    std::vector<Eigen::Index> widths;
    std::size_t relus = 0;
    for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
        widths.push_back(net.layers[k].outputs());
        relus += static_cast<std::size_t>(net.layers[k].outputs());
    }
    std::optional<double> best;
    for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << relus); ++pattern) {
        // Affine map D -> a: a = M D + c, starting from the input map.
        Eigen::MatrixXd mat = net.input_map.scale.asDiagonal();
        Eigen::VectorXd off = net.input_map.offset;
        std::vector<HalfSpace> hs;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e[i] = 1.0;
            hs.push_back({e, upper[i]});
            hs.push_back({-e, -lower[i]});
        }
        std::size_t bit = 0;
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            const auto& l = net.layers[k];
            Eigen::MatrixXd zm = l.weights * mat;
            Eigen::VectorXd zc = l.weights * off + l.biases;
            if (k + 1 == net.layers.size()) {
                mat = zm;
                off = zc;
                break;
            }
            for (Eigen::Index j = 0; j < l.outputs(); ++j, ++bit) {
                const bool on = (pattern >> bit) & 1U;
                if (on) {
                    hs.push_back({-zm.row(j).transpose(), zc[j]});  // Zhat >= 0
                } else {
                    hs.push_back({zm.row(j).transpose(), -zc[j]});  // Zhat <= 0
                    zm.row(j).setZero();
                    zc[j] = 0.0;
                }
            }
            mat = zm;
            off = zc;
        }
        const double s = net.output_map.scale[component];
        const Eigen::VectorXd c = sign * s * mat.row(component).transpose();
        const double c0 = sign * (net.output_map.offset[component] + s * off[component]) + offset;
        const auto v = vertex_enumeration_max(hs, c, c0);
        if (v && (!best || *v > *best)) best = v;
    }
    return best;
}

// Small random net with bounded ReLU count and input dimension.
inline nn::MlpParams small_random_net(std::uint64_t seed, Eigen::Index inputs, const std::vector<Eigen::Index>& hidden,
                                      Eigen::Index outputs) {
    std::vector<Eigen::Index> dims{inputs};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(outputs);
    auto net = nn::init_mlp(dims, seed);
    Rng rng(derive_seed(seed, 3));
    for (Eigen::Index i = 0; i < inputs; ++i) {
        net.input_map.offset[i] = rng.uniform(-0.5, 0.5);
        net.input_map.scale[i] = rng.uniform(0.5, 1.5);
    }
    for (Eigen::Index i = 0; i < outputs; ++i) {
        net.output_map.offset[i] = rng.uniform(-0.2, 0.2);
        net.output_map.scale[i] = rng.uniform(0.5, 1.5);
    }
    return net;
}

}  // namespace wcpfnn::testing
