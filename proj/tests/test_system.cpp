#include <gtest/gtest.h>

#include <random>

#include "monobil/models.hpp"
#include "monobil/system.hpp"

using namespace monobil;

namespace {

BilinearPositiveSystem two_state() {
    BilinearPositiveSystem sys;
    sys.A = (Matrix(2, 2) << -1.0, 0.5, 0.2, -1.0).finished();
    sys.B = Matrix::Ones(2, 1);
    sys.Q = Matrix::Identity(2, 2);
    sys.R = Matrix::Identity(1, 1);
    sys.D_u = Matrix::Constant(2, 1, -1.0);
    return sys;
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Validate, AcceptsValidSystem) { EXPECT_TRUE(validate(two_state()).empty()); }

TEST(Validate, FlagsNegativeOffDiagonal) {
    auto sys = two_state();
    sys.A(0, 1) = -0.1;
    const auto v = validate(sys);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_TRUE(mentions(v, "Metzler, entry (1,2)"));
}

TEST(Validate, FlagsNegativeQ) {
    auto sys = two_state();
    sys.Q(0, 1) = sys.Q(1, 0) = -0.5;
    EXPECT_TRUE(mentions(validate(sys), "nonnegative Q"));
}

TEST(Validate, FlagsOtherInvariants) {
    auto sys = two_state();
    sys.B(1, 0) = -1.0;
    EXPECT_TRUE(mentions(validate(sys), "nonnegative B, entry (2,1)"));

    sys = two_state();
    sys.R(0, 0) = 0.0;
    EXPECT_TRUE(mentions(validate(sys), "positive definite R"));

    sys = two_state();
    sys.Q(0, 1) = 0.3;
    EXPECT_TRUE(mentions(validate(sys), "symmetric Q"));

    sys = two_state();
    sys.Q = (Matrix(2, 2) << 1.0, 2.0, 2.0, 1.0).finished();  // eigenvalue -1
    EXPECT_TRUE(mentions(validate(sys), "positive semidefinite Q"));

    sys = two_state();
    sys.D_u = Matrix::Zero(3, 1);
    EXPECT_TRUE(mentions(validate(sys), "dimensions"));
}

TEST(ClosedLoop, ZeroInputGivesA) {
    const auto sys = two_state();
    EXPECT_EQ(closed_loop(sys, Vector::Zero(1)), sys.A);
}

TEST(ClosedLoop, ChainSubstitution) {
    const auto sys = make_chain_system({2, 1.0, 0.0, 3.0});
    const Matrix expected = (Matrix(2, 2) << -1.0, 0.0, 1.0, -1.0).finished();
    EXPECT_EQ(closed_loop(sys, Vector::Constant(1, 2.0)), expected);
}

TEST(ClosedLoop, IdentityInputMapShiftsDiagonal) {
    auto sys = two_state();
    sys.D_u = Matrix::Identity(2, 2);
    sys.R = Matrix::Identity(2, 2);
    const Vector u = (Vector(2) << 0.3, -0.7).finished();
    Matrix expected = sys.A;
    expected.diagonal() += u;
    EXPECT_EQ(closed_loop(sys, u), expected);
}

TEST(ClosedLoop, RejectsWrongInputLength) {
    EXPECT_THROW(closed_loop(two_state(), Vector::Zero(3)), DimensionMismatch);
}

TEST(ClosedLoop, AffineInInput) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N;
    for (int trial = 0; trial < 20; ++trial) {
        const auto sys = make_random_positive_system(5, 3, 2, 0.5, 100 + trial);
        Vector u1(3), u2(3);
        for (int k = 0; k < 3; ++k) {
            u1(k) = N(rng);
            u2(k) = N(rng);
        }
        const Matrix residual =
            closed_loop(sys, u1 + u2) - closed_loop(sys, u1) - closed_loop(sys, u2) + closed_loop(sys, Vector::Zero(3));
        EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Hurwitz, ScalarCase) {
    const auto cert = is_hurwitz(Matrix::Constant(1, 1, -1.0));
    EXPECT_TRUE(cert.stable);
    EXPECT_DOUBLE_EQ(cert.spectral_abscissa, -1.0);
    ASSERT_TRUE(cert.p.has_value());
    EXPECT_DOUBLE_EQ((*cert.p)(0), 1.0);
}

TEST(Hurwitz, ChainSpectralAbscissaIsDiagonal) {
    const auto sys = make_chain_system({10, 1.0, 0.0, 3.0});
    const auto cert = is_hurwitz(closed_loop(sys, Vector::Constant(1, 1.5936)));
    EXPECT_TRUE(cert.stable);
    // Triangular closed loop: every eigenvalue equals r - u.
    EXPECT_NEAR(cert.spectral_abscissa, 1.0 - 1.5936, 1e-14);
    ASSERT_TRUE(cert.p.has_value());
}

TEST(Hurwitz, ChainDestabilizedByBackEdge) {
    const auto sys = make_chain_system({10, 1.0, 0.006, 3.0});
    const auto cert = is_hurwitz(closed_loop(sys, Vector::Constant(1, 1.5936)));
    EXPECT_FALSE(cert.stable);
    EXPECT_GT(cert.spectral_abscissa, 0.0);
    EXPECT_FALSE(cert.p.has_value());
}

TEST(Hurwitz, WitnessForRandomIrreducibleHurwitzMetzler) {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto sys = make_random_positive_system(6, 1, 1, 1.0, 500 + trial);
        const Matrix Acl = closed_loop(sys, Vector::Constant(1, 3.0 * std::uniform_real_distribution<>(0, 1)(rng)));
        const auto cert = is_hurwitz(Acl);
        if (cert.spectral_abscissa >= 0.0) continue;
        ++checked;
        ASSERT_TRUE(cert.p.has_value());
        EXPECT_TRUE((cert.p->array() > 0.0).all());
        EXPECT_TRUE(((Acl * *cert.p).array() < 0.0).all());
        EXPECT_LE((Acl * *cert.p + Vector::Ones(6)).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_GT(checked, 10);
}

TEST(StrongConnectivity, ChainDependsOnBackEdge) {
    EXPECT_FALSE(is_strongly_connected(make_chain_system({10, 1.0, 0.0, 3.0}).A));
    EXPECT_TRUE(is_strongly_connected(make_chain_system({10, 1.0, 0.1, 3.0}).A));
    EXPECT_TRUE(is_strongly_connected(Matrix::Constant(1, 1, 5.0)));
    for (int n = 2; n <= 8; ++n) {
        EXPECT_FALSE(is_strongly_connected(make_chain_system({n, 1.0, 0.0, 1.0}).A)) << n;
        EXPECT_TRUE(is_strongly_connected(make_chain_system({n, 1.0, 1e-3, 1.0}).A)) << n;
    }
}

TEST(StrongConnectivity, ComponentCount) {
    // 1 <-> 2, 3 alone, 4 -> 1
    Matrix M = Matrix::Zero(4, 4);
    M(0, 1) = M(1, 0) = 1.0;
    M(0, 3) = 2.0;
    Index count = 0;
    const auto comp = strongly_connected_components(M, &count);
    EXPECT_EQ(count, 3);
    EXPECT_EQ(comp[0], comp[1]);
    EXPECT_NE(comp[0], comp[2]);
    EXPECT_NE(comp[0], comp[3]);
    EXPECT_NE(comp[2], comp[3]);
}

TEST(SpectralAbscissa, BlockwiseMatchesDenseOnRandomMatrices) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    std::bernoulli_distribution keep(0.25);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix M = Matrix::Zero(7, 7);
        for (Index i = 0; i < 7; ++i)
            for (Index j = 0; j < 7; ++j)
                if (i == j || keep(rng)) M(i, j) = N(rng);
        Eigen::EigenSolver<Matrix> es(M, false);
        EXPECT_NEAR(spectral_abscissa(M), es.eigenvalues().real().maxCoeff(), 1e-9);
    }
}

TEST(StrongConnectivity, DiagonalInputNeverAddsEdges) {
    const auto sys = make_chain_system({4, 1.0, 0.0, 1.0});
    EXPECT_EQ(is_strongly_connected(sys.A), is_strongly_connected(closed_loop(sys, Vector::Constant(1, 9.0))));
}

TEST(Adjoint, IdentityMapOnIdentity) {
    EXPECT_EQ(d_adjoint(Matrix::Identity(3, 3), Matrix::Identity(3, 3)), Vector::Ones(3));
}

TEST(Adjoint, UniformNegativeMapGivesMinusTrace) {
    const Matrix X = (Matrix(3, 3) << 1, 2, 3, 4, 5, 6, 7, 8, 9.5).finished();
    const Vector g = d_adjoint(Matrix::Constant(3, 1, -1.0), X);
    ASSERT_EQ(g.size(), 1);
    EXPECT_DOUBLE_EQ(g(0), -X.trace());
}

TEST(Adjoint, InnerProductIdentityOnRandomTriples) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> N;
    std::uniform_int_distribution<int> dim(1, 7);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dim(rng), m = dim(rng);
        Matrix D_u(n, m), X(n, n);
        Vector u(m);
        for (auto& x : D_u.reshaped()) x = N(rng);
        for (auto& x : X.reshaped()) x = N(rng);
        for (auto& x : u) x = N(rng);
        Matrix Du_op = Matrix::Zero(n, n);
        Du_op.diagonal() = D_u * u;
        const double lhs = (X.array() * Du_op.array()).sum();
        const double rhs = d_adjoint(D_u, X).dot(u);
        EXPECT_LE(std::abs(lhs - rhs), 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST(Adjoint, RejectsMismatchedShapes) {
    EXPECT_THROW(d_adjoint(Matrix::Ones(3, 1), Matrix::Identity(2, 2)), DimensionMismatch);
}
