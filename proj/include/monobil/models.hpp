#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "system.hpp"

namespace monobil {

// Path-graph mutation model: n mutants replicating at rate r, each mutating
// into the next, with an uncertain back edge of weight c from x_n to x_1.
struct ChainModelParams {
    int n = 10;
    double r = 1.0;
    double c = 0.0;
    double rho = 3.0;
};

inline BilinearPositiveSystem make_chain_system(const ChainModelParams& p) {
    if (p.n < 1) throw std::invalid_argument("chain model: n must be >= 1");
    if (!(p.rho > 0.0)) throw std::invalid_argument("chain model: rho must be > 0");
    if (!(p.c >= 0.0)) throw std::invalid_argument("chain model: c must be >= 0");

    const Index n = p.n;
    BilinearPositiveSystem sys;
    sys.A = Matrix::Zero(n, n);
    sys.A.diagonal().setConstant(p.r);
    for (Index i = 1; i < n; ++i) sys.A(i, i - 1) = 1.0;
    if (n > 1) sys.A(0, n - 1) = p.c;
    else sys.A(0, 0) += p.c;

    sys.B = Matrix::Zero(n, 1);
    sys.B(n - 1, 0) = 1.0;
    sys.Q = Matrix::Zero(n, n);
    sys.Q(n - 1, n - 1) = 1.0;
    sys.R = Matrix::Constant(1, 1, p.rho);
    sys.D_u = Matrix::Constant(n, 1, -1.0);
    return sys;
}

/**
 * Random positive-system instance for property tests.
 *
 * Off-diagonal entries of A are present with probability `density` and drawn
 * from U(0, 1).  Diagonal entries are chosen so that some instances are
 * open-loop unstable.  D_u is strictly negative, so any large enough positive
 * input stabilizes.  Deterministic for a given seed on a given standard library.
 */
inline BilinearPositiveSystem make_random_positive_system(Index n, Index m, Index q, double density,
                                                          std::uint64_t seed) {
    if (n < 1 || m < 1 || q < 1) throw std::invalid_argument("random system: dimensions must be >= 1");
    if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("random system: density must lie in (0, 1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    BilinearPositiveSystem sys;
    sys.A = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            // Always draw both numbers so the stream layout does not depend on density.
            const double keep = unit(rng);
            const double value = unit(rng);
            if (density >= 1.0 || keep < density) {
                sys.A(i, j) = value;
                row_sum += value;
            }
        }
        sys.A(i, i) = -row_sum + (unit(rng) - 0.5);
    }

    sys.B = Matrix::Zero(n, q);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < q; ++j) sys.B(i, j) = unit(rng);

    sys.Q = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) sys.Q(i, i) = 0.1 + 0.9 * unit(rng);

    sys.R = Matrix::Zero(m, m);
    for (Index k = 0; k < m; ++k) sys.R(k, k) = 0.1 + 0.9 * unit(rng);

    sys.D_u = Matrix::Zero(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < m; ++k) sys.D_u(i, k) = -(0.1 + 0.9 * unit(rng));
    return sys;
}

}  // namespace monobil
