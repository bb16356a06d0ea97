#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "monobil/models.hpp"
#include "monobil/optimizer.hpp"
#include "oracles.hpp"

using namespace monobil;

namespace {

BilinearPositiveSystem scalar_plant(double rho) {
    BilinearPositiveSystem sys;
    sys.A = Matrix::Zero(1, 1);
    sys.B = Matrix::Ones(1, 1);
    sys.Q = Matrix::Ones(1, 1);
    sys.R = Matrix::Constant(1, 1, rho);
    sys.D_u = Matrix::Constant(1, 1, -1.0);
    return sys;
}

Vector scalar(double u) { return Vector::Constant(1, u); }

double J_of(const Objective& obj, const Vector& u) { return obj.evaluate(u).J; }

}  // namespace

TEST(Subgradient, ScalarPlantMatchesAnalyticDerivative) {
    for (const double rho : {0.5, 1.0, 3.0}) {
        const Objective obj(scalar_plant(rho));
        for (const double u : {0.4, 1.0, 2.5}) {
            const auto sg = subdifferential_element(obj, scalar(u));
            EXPECT_NEAR(sg.g(0), oracle::scalar_dJ(u, rho), 1e-10 * (1.0 + std::abs(oracle::scalar_dJ(u, rho))));
            const auto fd = oracle::central_difference([&](const Vector& x) { return J_of(obj, x); }, scalar(u));
            EXPECT_NEAR(sg.g(0), fd(0), 1e-5 * (1.0 + std::abs(fd(0))));
        }
    }
}

TEST(Subgradient, VanishesAtScalarOptimum) {
    // u^-3 = rho u  =>  u = rho^(-1/4)
    const double rho = 2.0;
    const double u = std::pow(rho, -0.25);
    EXPECT_NEAR(subdifferential_element(scalar_plant(rho), scalar(u)).g(0), 0.0, 1e-12);
}

TEST(Subgradient, SimpleTopSingularValueIgnoresWeights) {
    const auto sys = make_chain_system({5, 1.0, 0.0, 3.0});
    const auto a = subdifferential_element(sys, scalar(2.0));
    const auto b = subdifferential_element(sys, scalar(2.0), std::vector<double>{1.0});
    EXPECT_EQ(a.weights.size(), 1u);
    EXPECT_LE((a.g - b.g).norm(), 1e-15);
}

TEST(Subgradient, RejectsWeightsOutsideSimplex) {
    const auto sys = make_chain_system({5, 1.0, 0.0, 3.0});
    EXPECT_THROW(subdifferential_element(sys, scalar(2.0), std::vector<double>{0.7}), InvalidWeights);
    EXPECT_THROW(subdifferential_element(sys, scalar(2.0), std::vector<double>{0.5, 0.5}), InvalidWeights);
    EXPECT_THROW(subdifferential_element(sys, scalar(0.5)), UnstableClosedLoop);
}

TEST(Subgradient, DegenerateTopSingularValueUsesWeights) {
    // Decoupled states with different sensitivities to the two inputs; G = I/2 at u = (1, 1).
    BilinearPositiveSystem sys;
    sys.A = -Matrix::Identity(2, 2);
    sys.B = Matrix::Identity(2, 2);
    sys.Q = Matrix::Identity(2, 2);
    sys.R = Matrix::Identity(2, 2);
    sys.D_u = -Matrix::Identity(2, 2);
    const Vector u = Vector::Ones(2);
    const auto uniform = subdifferential_element(sys, u);
    ASSERT_EQ(uniform.weights.size(), 2u);
    const auto first = subdifferential_element(sys, u, std::vector<double>{1.0, 0.0});
    const auto second = subdifferential_element(sys, u, std::vector<double>{0.0, 1.0});
    EXPECT_LE((uniform.g - 0.5 * (first.g + second.g)).norm(), 1e-14);
    EXPECT_THROW(gradient(sys, u), DegenerateTopSingularValue);

    // Every weighting gives a valid subgradient.
    const Objective obj(sys);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.2, 3.0);
    for (const auto* sg : {&uniform, &first, &second}) {
        for (int i = 0; i < 50; ++i) {
            const Vector v = (Vector(2) << U(rng), U(rng)).finished();
            EXPECT_GE(J_of(obj, v), J_of(obj, u) + sg->g.dot(v - u) - 1e-8);
        }
    }
}

TEST(Subgradient, InequalityOnChainAndRandomSystems) {
    std::mt19937_64 rng(123);
    int pairs = 0;
    const Objective chain(make_chain_system({10, 1.0, 0.1, 3.0}));
    std::uniform_real_distribution<double> U(1.8, 5.0);
    for (int i = 0; i < 50; ++i, ++pairs) {
        const Vector u = scalar(U(rng)), v = scalar(U(rng));
        const auto g = subdifferential_element(chain, u).g;
        EXPECT_GE(J_of(chain, v), J_of(chain, u) + g.dot(v - u) - 1e-8);
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed, ++pairs) {
        const Objective obj(make_random_positive_system(5, 2, 2, 0.5, 700 + seed));
        const Vector u = oracle::dominant_input(2, rng), v = oracle::dominant_input(2, rng);
        const auto g = subdifferential_element(obj, u).g;
        EXPECT_GE(J_of(obj, v), J_of(obj, u) + g.dot(v - u) - 1e-8);
    }
    EXPECT_EQ(pairs, 100);
}

TEST(Gradient, MatchesFiniteDifferencesOnStronglyConnectedInstances) {
    const Objective chain(make_chain_system({10, 1.0, 0.1, 3.0}));
    const Vector u = scalar(1.9);
    const Vector g = gradient(chain, u);
    const Vector fd = oracle::central_difference([&](const Vector& x) { return J_of(chain, x); }, u);
    EXPECT_NEAR(g(0), fd(0), 1e-5 * std::abs(fd(0)));

    std::mt19937_64 rng(55);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Objective obj(make_random_positive_system(5, 3, 2, 1.0, 900 + seed));
        const Vector x = oracle::dominant_input(3, rng);
        const Vector grad = gradient(obj, x);
        const Vector diff = oracle::central_difference([&](const Vector& y) { return J_of(obj, y); }, x);
        for (Index k = 0; k < 3; ++k) EXPECT_NEAR(grad(k), diff(k), 1e-5 * (std::abs(diff(k)) + 1e-8)) << seed;
    }
}

TEST(Gradient, NearlyZeroAtRobustOptimum) {
    EXPECT_LE(gradient(make_chain_system({10, 1.0, 0.1, 3.0}), scalar(1.9413)).norm(), 1e-2);
    // Tighter at the unrounded optimum found by brute force on the closed form.
    const double u = oracle::brute_force_minimize(
        [](double x) { return closed_form_chain_J(x, 10, 1.0, 0.1, 3.0); }, 1.8, 3.0);
    EXPECT_LE(gradient(make_chain_system({10, 1.0, 0.1, 3.0}), scalar(u)).norm(), 1e-4);
}

TEST(StabilizeInitial, ChainDirectionIsPositive) {
    const auto sys = make_chain_system({10, 1.0, 0.0, 3.0});
    const Vector u = stabilize_initial(sys);
    EXPECT_GT(u(0), 1.0);
    EXPECT_TRUE(is_hurwitz(closed_loop(sys, u)).stable);
}

TEST(StabilizeInitial, StableAReturnsZero) {
    auto sys = make_chain_system({3, -1.0, 0.0, 1.0});
    EXPECT_EQ(stabilize_initial(sys), Vector::Zero(1));
}

TEST(StabilizeInitial, UselessInputFails) {
    auto sys = make_chain_system({3, 1.0, 0.0, 1.0});
    sys.D_u.setZero();
    EXPECT_THROW(stabilize_initial(sys), NoStabilizingInitialPoint);
    EXPECT_THROW(solve(sys, SolveOptions{}), NoStabilizingInitialPoint);
}

TEST(Quartic, ChainAndTrivialRoots) {
    const double u = quartic_nominal_optimum(1.0, 3.0);
    EXPECT_NEAR(u, 1.5936, 1e-4);
    EXPECT_LE(std::abs(std::pow(u - 1.0, -3.0) - 3.0 * u), 1e-12);
    EXPECT_NEAR(quartic_nominal_optimum(0.0, 1.0), 1.0, 1e-14);
    EXPECT_LE(gradient(make_chain_system({10, 1.0, 0.0, 3.0}), scalar(u)).norm(), 1e-8);
}

TEST(Quartic, SignOfGapMatchesMatrixMinimizer) {
    // Brute-force minimization of the matrix objective decides between the
    // (u - r) and (r + u) forms of the nominal optimality condition.
    const Objective chain(make_chain_system({10, 1.0, 0.0, 3.0}));
    const double brute = oracle::brute_force_minimize([&](double x) { return J_of(chain, scalar(x)); }, 1.01, 4.0);
    EXPECT_NEAR(brute, quartic_nominal_optimum(1.0, 3.0), 1e-6);
    // Root of (r + u)^-3 = rho u for comparison: far from 1.5936.
    const double plus_form = oracle::golden_minimize([](double x) { return std::pow(1.0 + x, -2.0) + 3.0 * x * x; }, 0.0, 2.0);
    EXPECT_GT(std::abs(plus_form - 1.5936), 0.5);
}

TEST(Solve, NominalChainDose) {
    SolveOptions opts;
    opts.u0 = scalar(3.0);
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = solve(make_chain_system({10, 1.0, 0.0, 3.0}), opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.mode_used, SolveMode::Subgradient);
    EXPECT_NEAR(res.u_star(0), 1.5936, 1e-3);
    EXPECT_LT(seconds, 1.0);
}

TEST(Solve, RobustifiedChainDose) {
    const auto res = solve(make_chain_system({10, 1.0, 0.1, 3.0}), SolveOptions{});
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.mode_used, SolveMode::Gradient);
    EXPECT_NEAR(res.u_star(0), 1.9413, 1e-3);
}

TEST(Solve, ScalarPlantUnitOptimum) {
    SolveOptions opts;
    opts.u0 = scalar(2.0);
    const auto res = solve(scalar_plant(1.0), opts);
    EXPECT_NEAR(res.u_star(0), 1.0, 1e-6);
}

TEST(Solve, HistoryInvariants) {
    std::mt19937_64 rng(9);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sys = make_random_positive_system(4, 2, 2, 0.5, 40 + seed);
        SolveOptions opts;
        opts.mode = SolveMode::Subgradient;
        opts.max_iters = 400;
        const auto res = solve(sys, opts);
        double prev = std::numeric_limits<double>::infinity();
        double min_best = prev;
        for (const auto& h : res.history) {
            EXPECT_LE(h.J_best, prev);
            prev = h.J_best;
            min_best = std::min(min_best, h.J_best);
            EXPECT_TRUE(is_hurwitz(closed_loop(sys, h.u)).stable);
        }
        EXPECT_EQ(res.J_star, min_best);
        EXPECT_TRUE(is_hurwitz(closed_loop(sys, res.u_star)).stable);
    }
}

TEST(Solve, GradientAndSubgradientModesAgree) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sys = make_random_positive_system(4, 2, 2, 1.0, 60 + seed);
        SolveOptions sub;
        sub.mode = SolveMode::Subgradient;
        SolveOptions grad;
        grad.mode = SolveMode::Gradient;
        const auto a = solve(sys, sub);
        const auto b = solve(sys, grad);
        EXPECT_NEAR(a.J_star, b.J_star, 1e-4) << "seed " << seed;
    }
    const auto chain = make_chain_system({10, 1.0, 0.1, 3.0});
    SolveOptions sub;
    sub.mode = SolveMode::Subgradient;
    EXPECT_NEAR(solve(chain, sub).J_star, solve(chain, SolveOptions{}).J_star, 1e-4);
}

TEST(Solve, UnstableInitialPointIsReplaced) {
    SolveOptions opts;
    opts.u0 = scalar(0.5);  // r = 1, unstable
    const auto res = solve(make_chain_system({10, 1.0, 0.0, 3.0}), opts);
    EXPECT_NEAR(res.u_star(0), 1.5936, 1e-3);
}

TEST(Solve, RejectsInvalidOptions) {
    const auto sys = make_chain_system({3, 1.0, 0.0, 3.0});
    SolveOptions opts;
    opts.max_iters = 0;
    EXPECT_THROW(solve(sys, opts), InvalidOptions);
    opts = {};
    opts.tol = 0.0;
    EXPECT_THROW(solve(sys, opts), InvalidOptions);
    opts = {};
    opts.backtrack_factor = 1.0;
    EXPECT_THROW(solve(sys, opts), InvalidOptions);
    opts = {};
    opts.u0 = Vector::Ones(2);
    EXPECT_THROW(solve(sys, opts), InvalidOptions);
}

TEST(Solve, NonConvergenceIsReported) {
    SolveOptions opts;
    opts.u0 = scalar(3.0);
    opts.max_iters = 3;
    const auto res = solve(make_chain_system({10, 1.0, 0.0, 3.0}), opts);
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.iterations, 3);
    EXPECT_TRUE(std::isfinite(res.J_star));
}
