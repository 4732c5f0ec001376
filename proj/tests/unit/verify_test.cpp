#include "nn_support.hpp"
#include "test_support.hpp"
#include "verify_support.hpp"

#include <wcpfnn/verify/bounds.hpp>
#include <wcpfnn/verify/branch_and_bound.hpp>
#include <wcpfnn/verify/encoding.hpp>
#include <wcpfnn/verify/hypercube.hpp>
#include <wcpfnn/verify/simplex.hpp>
#include <wcpfnn/verify/tightening.hpp>
#include <wcpfnn/verify/worst_case.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace wcpfnn;
using namespace wcpfnn::testing;
using namespace wcpfnn::verify;

namespace {

InputBox box1(double lo, double hi) {
    InputBox b{Eigen::VectorXd(1), Eigen::VectorXd(1)};
    b.lower << lo;
    b.upper << hi;
    return b;
}

GenerationLimits limits1(double lo, double hi) {
    GenerationLimits l{Eigen::VectorXd(1), Eigen::VectorXd(1)};
    l.lower << lo;
    l.upper << hi;
    return l;
}

InputBox random_box(Rng& rng, Eigen::Index n) {
    InputBox b{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = rng.uniform(-1.5, 1.0);
        b.lower[i] = a;
        b.upper[i] = a + rng.uniform(0.2, 1.5);
    }
    return b;
}

}  // namespace

// ---- LP -------------------------------------------------------------------

TEST(Simplex, SingleBoundedVariable) {
    MilpModel m;
    const int x = m.add_variable(0.0, 5.0, "x");
    m.add_row({{x, 1.0}}, Sense::LessEqual, 3.0);
    m.objective = {{x, 1.0}};
    const auto r = solve_lp(m);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 3.0, 1e-12);
    EXPECT_NEAR(r.x[0], 3.0, 1e-12);
}

TEST(Simplex, InfeasiblePair) {
    MilpModel m;
    const int x = m.add_variable(-5.0, 5.0, "x");
    m.add_row({{x, 1.0}}, Sense::LessEqual, 0.0);
    m.add_row({{x, 1.0}}, Sense::GreaterEqual, 1.0);
    EXPECT_EQ(solve_lp(m).status, LpStatus::Infeasible);
}

TEST(Simplex, EqualityAndMinimization) {
    MilpModel m;
    const int x = m.add_variable(0.0, 10.0, "x");
    const int y = m.add_variable(0.0, 10.0, "y");
    m.add_row({{x, 1.0}, {y, 1.0}}, Sense::Equal, 4.0);
    m.add_row({{x, 1.0}, {y, -1.0}}, Sense::GreaterEqual, 1.0);
    m.objective = {{x, 2.0}, {y, 1.0}};
    m.objective_constant = 1.0;
    m.maximize = false;
    const auto r = solve_lp(m);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 1.0 + 2.0 * 2.5 + 1.5, 1e-10);
}

TEST(Simplex, MatchesVertexEnumeration) {
    Rng rng(5);
    int optimal = 0, infeasible = 0;
    for (int t = 0; t < 300; ++t) {
        MilpModel m;
        const int n = 1 + static_cast<int>(rng.below(3));
        for (int j = 0; j < n; ++j) {
            const double a = rng.uniform(-3.0, 1.0);
            m.add_variable(a, a + rng.uniform(0.0, 4.0), "x" + std::to_string(j));
        }
        const int rows = static_cast<int>(rng.below(6));
        for (int i = 0; i < rows; ++i) {
            LinearTerms terms;
            for (int j = 0; j < n; ++j) {
                if (rng.uniform() < 0.8) terms.emplace_back(j, rng.uniform(-2.0, 2.0));
            }
            const double u = rng.uniform();
            const Sense s = u < 0.45 ? Sense::LessEqual : (u < 0.9 ? Sense::GreaterEqual : Sense::Equal);
            m.add_row(terms, s, rng.uniform(-2.0, 2.0));
        }
        for (int j = 0; j < n; ++j) m.objective.emplace_back(j, rng.uniform(-1.0, 1.0));
        m.maximize = rng.uniform() < 0.5;
        const auto oracle = vertex_enumeration_lp(m);
        const auto r = solve_lp(m);
        if (!oracle) {
            EXPECT_EQ(r.status, LpStatus::Infeasible) << "trial " << t;
            ++infeasible;
            continue;
        }
        ASSERT_EQ(r.status, LpStatus::Optimal) << "trial " << t;
        EXPECT_NEAR(r.objective, *oracle, 1e-7) << "trial " << t;
        EXPECT_LE(m.max_violation(r.x), 1e-7);
        ++optimal;
    }
    EXPECT_GT(optimal, 100);
    EXPECT_GT(infeasible, 5);
}

TEST(Simplex, WarmStartAgreesWithColdStart) {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        MilpModel m;
        for (int j = 0; j < 6; ++j) m.add_variable(0.0, 1.0 + rng.uniform(), "x");
        for (int i = 0; i < 5; ++i) {
            LinearTerms terms;
            for (int j = 0; j < 6; ++j) terms.emplace_back(j, rng.uniform(-1.0, 1.0));
            m.add_row(terms, Sense::LessEqual, rng.uniform(0.0, 1.0));
        }
        for (int j = 0; j < 6; ++j) m.objective.emplace_back(j, rng.uniform(-1.0, 1.0));
        const LpSolver lp(m);
        const auto first = lp.solve();
        ASSERT_EQ(first.status, LpStatus::Optimal);
        Eigen::VectorXd lo = lp.model_lower(), up = lp.model_upper();
        up[t % 6] = 0.5 * up[t % 6];
        const auto warm = lp.solve(lo, up, &first.basis);
        const auto cold = lp.solve(lo, up);
        ASSERT_EQ(warm.status, cold.status);
        if (cold.status == LpStatus::Optimal) EXPECT_NEAR(warm.objective, cold.objective, 1e-9);
    }
}

TEST(Simplex, SingularWarmBasisIsRepaired) {
    // x and y have identical columns, so a basis holding both is singular.
    Rng rng(12);
    for (int t = 0; t < 30; ++t) {
        MilpModel m;
        const int x = m.add_variable(0.0, 2.0, "x");
        const int y = m.add_variable(0.0, 2.0, "y");
        const int z = m.add_variable(-1.0, 1.0, "z");
        const double a = rng.uniform(0.5, 2.0), b = rng.uniform(-1.0, 1.0);
        m.add_row({{x, a}, {y, a}, {z, b}}, Sense::LessEqual, rng.uniform(0.5, 2.0));
        m.add_row({{x, 1.0}, {y, 1.0}, {z, 1.0}}, Sense::GreaterEqual, rng.uniform(-1.0, 0.5));
        m.objective = {{x, rng.uniform(0.1, 1.0)}, {y, rng.uniform(0.1, 1.0)}, {z, rng.uniform(-1.0, 1.0)}};
        const LpSolver lp(m);
        LpBasis bad;
        bad.head = {x, y};
        bad.at_upper.assign(5, 0);
        const auto warm = lp.solve(&bad);
        const auto cold = lp.solve();
        ASSERT_EQ(warm.status, cold.status) << "trial " << t;
        if (cold.status == LpStatus::Optimal) {
            EXPECT_NEAR(warm.objective, cold.objective, 1e-9) << "trial " << t;
            EXPECT_LE(m.max_violation(warm.x), 1e-9);
        }
    }
}

// ---- Branch and bound -----------------------------------------------------

TEST(BranchAndBound, KnapsackMatchesEnumeration) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const int n = 8;
        MilpModel m;
        std::vector<double> w(n), v(n);
        LinearTerms cap;
        for (int j = 0; j < n; ++j) {
            m.add_variable(0.0, 1.0, "b", true);
            w[static_cast<std::size_t>(j)] = rng.uniform(0.1, 1.0);
            v[static_cast<std::size_t>(j)] = rng.uniform(0.1, 1.0);
            cap.emplace_back(j, w[static_cast<std::size_t>(j)]);
            m.objective.emplace_back(j, v[static_cast<std::size_t>(j)]);
        }
        const double capacity = 2.0;
        m.add_row(cap, Sense::LessEqual, capacity);
        double best = 0.0;
        for (int mask = 0; mask < (1 << n); ++mask) {
            double ww = 0.0, vv = 0.0;
            for (int j = 0; j < n; ++j) {
                if (mask >> j & 1) {
                    ww += w[static_cast<std::size_t>(j)];
                    vv += v[static_cast<std::size_t>(j)];
                }
            }
            if (ww <= capacity) best = std::max(best, vv);
        }
        const auto r = solve_milp_bnb(m);
        ASSERT_TRUE(r.found);
        EXPECT_NEAR(r.objective, best, 1e-7);
        EXPECT_LE(r.gap, 1e-6);
        EXPECT_LE(m.max_violation(r.x), 1e-6);
    }
}

TEST(BranchAndBound, NodeBudgetCarriesPartialResult) {
    MilpModel m;
    LinearTerms cap;
    for (int j = 0; j < 12; ++j) {
        m.add_variable(0.0, 1.0, "b", true);
        cap.emplace_back(j, 1.0 + 0.01 * j);
        m.objective.emplace_back(j, 1.0 + 0.013 * j);
    }
    m.add_row(cap, Sense::LessEqual, 5.5);
    MilpOptions opt;
    opt.node_limit = 3;
    try {
        solve_milp_bnb(m, opt);
        FAIL() << "expected a budget error";
    } catch (const MilpBudgetError& e) {
        EXPECT_EQ(e.partial().nodes, 3);
        EXPECT_GT(e.partial().bound, 0.0);
    }
}

TEST(BranchAndBound, InfeasibleModel) {
    MilpModel m;
    const int b = m.add_variable(0.0, 1.0, "b", true);
    m.add_row({{b, 1.0}}, Sense::GreaterEqual, 0.3);
    m.add_row({{b, 1.0}}, Sense::LessEqual, 0.7);
    m.objective = {{b, 1.0}};
    const auto r = solve_milp_bnb(m);
    EXPECT_FALSE(r.found);
}

// ---- Interval bounds ------------------------------------------------------

TEST(IntervalBounds, AbsoluteValueNet) {
    const auto b = interval_bounds(abs_net(), box1(-1.0, 2.0));
    ASSERT_EQ(b.lower.size(), 1u);
    EXPECT_DOUBLE_EQ(b.lower[0][0], -1.0);
    EXPECT_DOUBLE_EQ(b.upper[0][0], 2.0);
    EXPECT_DOUBLE_EQ(b.lower[0][1], -2.0);
    EXPECT_DOUBLE_EQ(b.upper[0][1], 1.0);
    EXPECT_DOUBLE_EQ(b.output_lower[0], 0.0);
    EXPECT_DOUBLE_EQ(b.output_upper[0], 3.0);
}

TEST(IntervalBounds, ZeroWeightsGiveBiases) {
    auto net = nn::init_mlp({2, 3, 1}, 3);
    net.layers[0].weights.setZero();
    const auto b = interval_bounds(net, random_box(*std::make_unique<Rng>(1), 2));
    EXPECT_EQ(b.lower[0], net.layers[0].biases);
    EXPECT_EQ(b.upper[0], net.layers[0].biases);
}

TEST(IntervalBounds, SoundOnSamples) {
    Rng rng(12);
    for (int t = 0; t < 10; ++t) {
        const auto net = random_mlp({3, 8, 8, 2}, 40 + static_cast<std::uint64_t>(t));
        const InputBox box = random_box(rng, 3);
        const auto b = interval_bounds(net, box);
        for (int s = 0; s < 1000; ++s) {
            Eigen::VectorXd d(3);
            for (Eigen::Index i = 0; i < 3; ++i) d[i] = rng.uniform(box.lower[i], box.upper[i]);
            const auto tr = nn::forward_with_preactivations(net, d);
            for (std::size_t k = 0; k < tr.preactivations.size(); ++k) {
                ASSERT_TRUE(((tr.preactivations[k] - b.lower[k]).array() >= -1e-12).all());
                ASSERT_TRUE(((b.upper[k] - tr.preactivations[k]).array() >= -1e-12).all());
            }
            ASSERT_TRUE(((tr.output - b.output_lower).array() >= -1e-12).all());
            ASSERT_TRUE(((b.output_upper - tr.output).array() >= -1e-12).all());
        }
    }
}

TEST(IntervalBounds, ShrinkingTheBoxNeverLoosens) {
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        const auto net = random_mlp({2, 6, 6, 1}, 60 + static_cast<std::uint64_t>(t));
        const InputBox outer = random_box(rng, 2);
        InputBox inner = outer;
        for (Eigen::Index i = 0; i < 2; ++i) {
            const double a = rng.uniform(outer.lower[i], outer.upper[i]);
            const double b = rng.uniform(outer.lower[i], outer.upper[i]);
            inner.lower[i] = std::min(a, b);
            inner.upper[i] = std::max(a, b);
        }
        const auto bo = interval_bounds(net, outer), bi = interval_bounds(net, inner);
        for (std::size_t k = 0; k < bo.lower.size(); ++k) {
            EXPECT_TRUE(((bi.lower[k] - bo.lower[k]).array() >= -1e-12).all());
            EXPECT_TRUE(((bo.upper[k] - bi.upper[k]).array() >= -1e-12).all());
        }
    }
}

// ---- Encoding -------------------------------------------------------------

TEST(Encoding, ForwardPassIsFeasibleWithTruePattern) {
    Rng rng(21);
    double worst = 0.0;
    for (int t = 0; t < 30; ++t) {
        const auto net = random_mlp({3, 8, 8, 2}, 200 + static_cast<std::uint64_t>(t));
        const InputBox box = random_box(rng, 3);
        const auto enc = encode_network(net, interval_bounds(net, box), box);
        for (int s = 0; s < 30; ++s) {
            Eigen::VectorXd d(3);
            for (Eigen::Index i = 0; i < 3; ++i) d[i] = rng.uniform(box.lower[i], box.upper[i]);
            const Eigen::VectorXd x = complete_assignment(net, enc, d);
            worst = std::max(worst, enc.model.max_violation(x));
            const Eigen::VectorXd out = nn::forward(net, d);
            for (Eigen::Index m = 0; m < 2; ++m) worst = std::max(worst, std::abs(evaluate(enc.output(net, m), x) - out[m]));
        }
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(Encoding, StableNeuronsHaveNoBinaries) {
    // Positive input box and positive weights: everything active.
    auto net = nn::init_mlp({2, 4, 1}, 1);
    net.layers[0].weights = net.layers[0].weights.cwiseAbs();
    net.layers[0].biases = net.layers[0].biases.cwiseAbs();
    InputBox box{Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.5, 0.9)};
    const auto enc = encode_network(net, interval_bounds(net, box), box);
    EXPECT_EQ(enc.model.num_binaries(), 0u);
    EXPECT_EQ(enc.stable_neurons, 4u);
}

TEST(Encoding, AbsoluteValueWorstCaseModel) {
    const auto net = abs_net();
    const auto box = box1(-1.0, 2.0);
    const auto enc = encode_worstcase(net, interval_bounds(net, box), box, 0, BoundSide::Upper, limits1(-10.0, 1.5));
    EXPECT_EQ(enc.model.num_binaries(), 2u);
    const auto r = solve_milp_bnb(enc.model);
    ASSERT_TRUE(r.found);
    EXPECT_NEAR(r.objective, 0.5, 1e-9);
    EXPECT_NEAR(input_of(enc, r.x)[0], 2.0, 1e-9);
}

TEST(Encoding, AllStableModelSolvesAtRoot) {
    auto net = nn::init_mlp({2, 4, 1}, 1);
    net.layers[0].weights = net.layers[0].weights.cwiseAbs();
    net.layers[0].biases = net.layers[0].biases.cwiseAbs();
    InputBox box{Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.5, 0.9)};
    const auto bounds = interval_bounds(net, box);
    const auto enc = encode_worstcase(net, bounds, box, 0, BoundSide::Upper, limits1(-10.0, 0.0));
    const auto r = solve_milp_bnb(enc.model);
    EXPECT_EQ(r.nodes, 1);
    // LP oracle: affine on the whole box, so the maximum sits at a corner.
    double best = -1e300;
    for (int c = 0; c < 4; ++c) {
        const Eigen::Vector2d d((c & 1) ? box.upper[0] : box.lower[0], (c & 2) ? box.upper[1] : box.lower[1]);
        best = std::max(best, nn::forward(net, d)[0]);
    }
    EXPECT_NEAR(r.objective, best, 1e-9);
}

TEST(Encoding, HeuristicFixedInactiveNeuronStaysInactive) {
    const auto net = abs_net();
    const auto box = box1(-1.0, 2.0);
    const auto bounds = interval_bounds(net, box);
    ReluStatusMap fixed;
    fixed.status.push_back(Eigen::Vector2i(1, 0));
    const auto enc = encode_network(net, bounds, box, &fixed);
    EXPECT_EQ(enc.status_fixed_neurons, 2u);
    EXPECT_EQ(enc.model.num_binaries(), 0u);
    MilpModel m = enc.model;
    const auto e = enc.output(net, 0);
    m.objective = e.terms;
    m.objective_constant = e.constant;
    m.maximize = false;
    // With the first neuron forced on and the second off, x is confined to [0, 2].
    const auto r = solve_lp(m);
    ASSERT_EQ(r.status, LpStatus::Optimal);
    EXPECT_NEAR(r.objective, 0.0, 1e-12);
    EXPECT_GE(input_of(enc, r.x)[0], -1e-12);
}

// ---- LP bound tightening ---------------------------------------------------

TEST(LpTightening, SoundAndNoLooserThanIntervals) {
    Rng rng(13);
    std::size_t gained = 0;
    for (int t = 0; t < 10; ++t) {
        const auto net = random_mlp({3, 8, 8, 8, 2}, 60 + static_cast<std::uint64_t>(t));
        const InputBox box = random_box(rng, 3);
        const auto ibp = interval_bounds(net, box);
        const auto lp = lp_tightened_bounds(net, box);
        for (std::size_t k = 0; k < ibp.lower.size(); ++k) {
            EXPECT_TRUE(((lp.lower[k] - ibp.lower[k]).array() >= 0.0).all());
            EXPECT_TRUE(((ibp.upper[k] - lp.upper[k]).array() >= 0.0).all());
        }
        EXPECT_GE(lp.stable_count(), ibp.stable_count());
        gained += lp.stable_count() - ibp.stable_count();
        for (int s = 0; s < 1000; ++s) {
            Eigen::VectorXd d(3);
            for (Eigen::Index i = 0; i < 3; ++i) d[i] = rng.uniform(box.lower[i], box.upper[i]);
            const auto tr = nn::forward_with_preactivations(net, d);
            for (std::size_t k = 0; k < tr.preactivations.size(); ++k) {
                ASSERT_TRUE(((tr.preactivations[k] - lp.lower[k]).array() >= -1e-9).all());
                ASSERT_TRUE(((lp.upper[k] - tr.preactivations[k]).array() >= -1e-9).all());
            }
            ASSERT_TRUE(((tr.output - lp.output_lower).array() >= -1e-9).all());
            ASSERT_TRUE(((lp.output_upper - tr.output).array() >= -1e-9).all());
        }
    }
    EXPECT_GT(gained, 0u);
}

TEST(LpTightening, FirstLayerKeepsIntervalBounds) {
    // The first layer is affine in the box, so intervals are already exact.
    const auto net = random_mlp({2, 6, 6, 1}, 9);
    InputBox box{Eigen::Vector2d(-0.5, 0.1), Eigen::Vector2d(0.4, 0.9)};
    EXPECT_EQ(lp_tightened_bounds(net, box).lower[0], interval_bounds(net, box).lower[0]);
}

TEST(LpTightening, WorstCaseUnchanged) {
    Rng rng(14);
    for (int t = 0; t < 6; ++t) {
        const auto net = random_mlp({2, 8, 8, 2}, 80 + static_cast<std::uint64_t>(t));
        const InputBox box = random_box(rng, 2);
        const auto b = interval_bounds(net, box);
        GenerationLimits lim{0.5 * (b.output_lower + b.output_upper) - 0.1 * (b.output_upper - b.output_lower),
                             0.5 * (b.output_lower + b.output_upper) + 0.1 * (b.output_upper - b.output_lower)};
        WorstCaseConfig plain;
        plain.tighten_bounds = false;
        const auto a = find_worst_case(net, box, lim, plain);
        const auto c = find_worst_case(net, box, lim);
        EXPECT_NEAR(a.v_g_max, c.v_g_max, 1e-7) << "net " << t;
        EXPECT_LE(c.nodes, a.nodes);
    }
}

// ---- Worst case -----------------------------------------------------------

TEST(WorstCase, AbsoluteValueFixture) {
    const auto wc = find_worst_case(abs_net(), box1(-1.0, 2.0), limits1(-10.0, 1.5), {{}, 100.0});
    EXPECT_NEAR(wc.v_g_max, 0.5, 1e-9);
    EXPECT_NEAR(wc.d_wc[0], 2.0, 1e-9);
    EXPECT_EQ(wc.side, BoundSide::Upper);
    EXPECT_EQ(wc.component, 0);
    EXPECT_TRUE(wc.certified);
    EXPECT_NEAR(wc.v_g_max_mva, 50.0, 1e-7);
    // Grid-search oracle at step 1e-3.
    double grid = 0.0, arg = 0.0;
    for (int i = 0; i <= 3000; ++i) {
        const double x = -1.0 + 1e-3 * i;
        const double v = std::max(std::abs(x) - 1.5, 0.0);
        if (v > grid) {
            grid = v;
            arg = x;
        }
    }
    EXPECT_NEAR(wc.v_g_max, grid, 1e-6);
    EXPECT_NEAR(wc.d_wc[0], arg, 1e-6);
}

TEST(WorstCase, LowerSideViolation) {
    // |x| >= 0.3 required; the minimum 0 at x = 0 violates by 0.3.
    const auto wc = find_worst_case(abs_net(), box1(-1.0, 2.0), limits1(0.3, 5.0));
    EXPECT_NEAR(wc.v_g_max, 0.3, 1e-9);
    EXPECT_NEAR(wc.d_wc[0], 0.0, 1e-9);
    EXPECT_EQ(wc.side, BoundSide::Lower);
}

TEST(WorstCase, NoViolationWhenOutputBoxInsideLimits) {
    const auto wc = find_worst_case(abs_net(), box1(-1.0, 2.0), limits1(-1.0, 3.5));
    EXPECT_EQ(wc.v_g_max, 0.0);
    EXPECT_TRUE(wc.certified);
    EXPECT_EQ(wc.nodes, 0);
}

TEST(WorstCase, MatchesPatternEnumeration) {
    Rng rng(31);
    for (int t = 0; t < 12; ++t) {
        const Eigen::Index inputs = 1 + static_cast<Eigen::Index>(rng.below(3));
        const auto net = small_random_net(500 + static_cast<std::uint64_t>(t), inputs, {5, 4}, 2);
        const InputBox box = random_box(rng, inputs);
        const auto b = interval_bounds(net, box);
        GenerationLimits lim{Eigen::VectorXd(2), Eigen::VectorXd(2)};
        for (Eigen::Index m = 0; m < 2; ++m) {
            lim.lower[m] = b.output_lower[m] + 0.3 * (b.output_upper[m] - b.output_lower[m]);
            lim.upper[m] = b.output_upper[m] - 0.3 * (b.output_upper[m] - b.output_lower[m]);
        }
        double oracle = 0.0;
        for (Eigen::Index m = 0; m < 2; ++m) {
            oracle = std::max(oracle, pattern_enumeration_max(net, box.lower, box.upper, m, 1.0, -lim.upper[m]).value());
            oracle = std::max(oracle, pattern_enumeration_max(net, box.lower, box.upper, m, -1.0, lim.lower[m]).value());
        }
        const auto wc = find_worst_case(net, box, lim);
        EXPECT_NEAR(wc.v_g_max, oracle, 1e-6) << "net " << t;
        EXPECT_TRUE(wc.certified);
        if (wc.v_g_max > 0.0) {
            const auto v = generation_violation(nn::forward(net, wc.d_wc), lim);
            EXPECT_GE(v.value, wc.v_g_max - wc.gap - 1e-9);
        }
    }
}

TEST(WorstCase, DominatesRandomSamples) {
    Rng rng(41);
    for (int t = 0; t < 5; ++t) {
        const auto net = random_mlp({3, 10, 10, 2}, 700 + static_cast<std::uint64_t>(t));
        const InputBox box = random_box(rng, 3);
        const auto b = interval_bounds(net, box);
        GenerationLimits lim{0.5 * (b.output_lower + b.output_upper) - 0.1 * (b.output_upper - b.output_lower),
                             0.5 * (b.output_lower + b.output_upper) + 0.1 * (b.output_upper - b.output_lower)};
        const auto wc = find_worst_case(net, box, lim);
        ASSERT_TRUE(wc.certified);
        for (int s = 0; s < 10000; ++s) {
            Eigen::VectorXd d(3);
            for (Eigen::Index i = 0; i < 3; ++i) d[i] = rng.uniform(box.lower[i], box.upper[i]);
            ASSERT_LE(generation_violation(nn::forward(net, d), lim).value, wc.v_g_max + 1e-6);
        }
    }
}

// ---- ReLU fixing and hypercube --------------------------------------------

TEST(FixStatuses, ThresholdExamples) {
    // One hidden neuron with Zhat = x; bounds [-1, 1].
    nn::MlpParams net;
    net.layers = {{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)}};
    net.input_map = nn::AffineMap::identity(1);
    net.output_map = nn::AffineMap::identity(1);
    const auto b = interval_bounds(net, box1(-1.0, 1.0));
    EXPECT_EQ(fix_relu_statuses(net, b, Eigen::VectorXd::Constant(1, 0.5)).status[0][0], 1);
    EXPECT_EQ(fix_relu_statuses(net, b, Eigen::VectorXd::Constant(1, 0.05)).status[0][0], -1);
    EXPECT_EQ(fix_relu_statuses(net, b, Eigen::VectorXd::Constant(1, -0.5)).status[0][0], 0);
    EXPECT_EQ(fix_relu_statuses(net, b, Eigen::VectorXd::Constant(1, -0.05)).status[0][0], -1);
}

TEST(Hypercube, AbsoluteValueFixture) {
    const auto box = box1(-1.0, 2.0);
    const auto lim = limits1(-10.0, 1.5);
    const auto wc = find_worst_case(abs_net(), box, lim);
    const auto hc = fit_hypercube(abs_net(), box, lim, wc);
    ASSERT_TRUE(hc.feasible);
    EXPECT_NEAR(hc.d_normalized, 0.1, 1e-6);
    EXPECT_NEAR(hc.witness[0], 1.9, 1e-6);
    EXPECT_GE(hc.violation_at_witness, 0.8 * wc.v_g_max - 1e-9);
    // Grid oracle: farthest grid point from 2 with |x| - 1.5 >= 0.4.
    double far = 0.0;
    for (int i = 0; i <= 3000; ++i) {
        const double x = -1.0 + 1e-3 * i;
        if (std::abs(x) - 1.5 >= 0.4 - 1e-12) far = std::max(far, std::abs(x - 2.0));
    }
    EXPECT_NEAR(hc.d_normalized, far, 1e-6);
}

TEST(Hypercube, AlphaNearOneShrinksToZero) {
    const auto box = box1(-1.0, 2.0);
    const auto lim = limits1(-10.0, 1.5);
    const auto wc = find_worst_case(abs_net(), box, lim);
    HypercubeOptions opt;
    opt.alpha = 0.999999;
    EXPECT_LE(fit_hypercube(abs_net(), box, lim, wc, opt).d_normalized, 1e-5);
    opt.alpha = 1.0;
    EXPECT_THROW(fit_hypercube(abs_net(), box, lim, wc, opt), ConfigError);
}

TEST(Hypercube, RequiresPositiveViolation) {
    const auto box = box1(-1.0, 2.0);
    const auto lim = limits1(-10.0, 5.0);
    const auto wc = find_worst_case(abs_net(), box, lim);
    EXPECT_THROW(fit_hypercube(abs_net(), box, lim, wc), ValidationError);
}

TEST(Hypercube, WitnessSatisfiesViolationOnRandomNets) {
    Rng rng(51);
    int checked = 0;
    for (int t = 0; t < 10; ++t) {
        const auto net = small_random_net(900 + static_cast<std::uint64_t>(t), 2, {6, 6}, 2);
        const InputBox box = random_box(rng, 2);
        const auto b = interval_bounds(net, box);
        GenerationLimits lim{b.output_lower + 0.3 * (b.output_upper - b.output_lower),
                             b.output_upper - 0.3 * (b.output_upper - b.output_lower)};
        const auto wc = find_worst_case(net, box, lim);
        if (wc.v_g_max <= 1e-6) continue;
        for (bool fix : {true, false}) {
            HypercubeOptions opt;
            opt.fix_statuses = fix;
            const auto hc = fit_hypercube(net, box, lim, wc, opt);
            ASSERT_TRUE(hc.feasible);
            const auto v = generation_violation(nn::forward(net, hc.witness), lim);
            EXPECT_GE(v.value, 0.8 * wc.v_g_max - 1e-7);
            const double dist = (net.input_map.apply(hc.witness) - net.input_map.apply(wc.d_wc)).cwiseAbs().maxCoeff();
            EXPECT_NEAR(dist, hc.d_normalized, 1e-9);
            ++checked;
        }
    }
    EXPECT_GT(checked, 6);
}

TEST(Hypercube, ExactModeMatchesSampledFarthestPoint) {
    // Without fixing, the MILP is exact on the local box: no sampled point that
    // still violates by alpha * v_max may lie farther from D_WC.
    Rng rng(61);
    for (int t = 0; t < 6; ++t) {
        const auto net = small_random_net(1100 + static_cast<std::uint64_t>(t), 2, {5, 5}, 1);
        const InputBox box = random_box(rng, 2);
        const auto b = interval_bounds(net, box);
        GenerationLimits lim{Eigen::VectorXd::Constant(1, -1e3), b.output_upper - 0.3 * (b.output_upper - b.output_lower)};
        const auto wc = find_worst_case(net, box, lim);
        if (wc.v_g_max <= 1e-6) continue;
        HypercubeOptions opt;
        opt.fix_statuses = false;
        const auto hc = fit_hypercube(net, box, lim, wc, opt);
        const InputBox local = local_box(net, box, wc.d_wc, opt.local_half_width);
        const Eigen::VectorXd xwc = net.input_map.apply(wc.d_wc);
        for (int s = 0; s < 20000; ++s) {
            Eigen::VectorXd d(2);
            for (Eigen::Index i = 0; i < 2; ++i) d[i] = rng.uniform(local.lower[i], local.upper[i]);
            if (generation_violation(nn::forward(net, d), lim).value >= 0.8 * wc.v_g_max) {
                ASSERT_LE((net.input_map.apply(d) - xwc).cwiseAbs().maxCoeff(), hc.d_normalized + 1e-6);
            }
        }
    }
}
