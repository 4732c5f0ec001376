#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/grid/input_domain.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <vector>

namespace wcpfnn::data {

// Plain stratified Latin hypercube: every coordinate range is cut into n equal
// strata, each stratum receives exactly one point at a uniform position, and
// strata are paired across coordinates by independent random permutations.
inline std::vector<Eigen::VectorXd> lhs_sample(const grid::InputDomain& domain, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("lhs_sample needs n >= 1");
    domain.check();
    const Eigen::Index dim = domain.dim();
    std::vector<Eigen::VectorXd> points(n, Eigen::VectorXd(dim));
    Rng rng(seed);
    std::vector<std::size_t> perm(n);
    for (Eigen::Index j = 0; j < dim; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        const double lo = domain.lower[j];
        const double width = domain.upper[j] - lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
            points[i][j] = width > 0.0 ? lo + width * u : lo;
        }
    }
    return points;
}

}  // namespace wcpfnn::data
