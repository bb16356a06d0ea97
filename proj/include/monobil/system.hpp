#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace monobil {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Margin used by every Hurwitz test: a matrix counts as stable when its
/// spectral abscissa is below -kStabilityTolerance.
inline constexpr double kStabilityTolerance = 1e-9;

/**
 * Monotone bilinear positive system
 *
 *     dx/dt = (A + D(u)) x + B d,      z = [Q^{1/2} x; R^{1/2} u],
 *
 * with the diagonal input map D(u) = diag(D_u u).  Column k of D_u holds the
 * diagonal of D(e_k).
 */
struct BilinearPositiveSystem {
    Matrix A;    // n x n, Metzler
    Matrix B;    // n x q, nonnegative
    Matrix Q;    // n x n, nonnegative, symmetric PSD
    Matrix R;    // m x m, symmetric PD
    Matrix D_u;  // n x m

    [[nodiscard]] Index n() const { return A.rows(); }
    [[nodiscard]] Index m() const { return R.rows(); }
    [[nodiscard]] Index q() const { return B.cols(); }

    friend bool operator==(const BilinearPositiveSystem&, const BilinearPositiveSystem&) = default;
};

struct StabilityCertificate {
    double spectral_abscissa = 0.0;
    // Diagonal-dominance witness: p > 0 with A_cl p = -1 < 0.
    std::optional<Vector> p;
    bool stable = false;
};

namespace detail {

inline std::string entry_name(Index i, Index j) {
    std::ostringstream os;
    os << "entry (" << i + 1 << "," << j + 1 << ")";
    return os.str();
}

inline std::string shape(const Matrix& M) {
    std::ostringstream os;
    os << M.rows() << "x" << M.cols();
    return os.str();
}

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

}  // namespace detail

/// Returns a description of every violated invariant; empty when the system is valid.
inline std::vector<std::string> validate(const BilinearPositiveSystem& sys) {
    std::vector<std::string> out;
    const Index n = sys.A.rows();
    const Index m = sys.R.rows();
    const Index q = sys.B.cols();

    if (sys.A.cols() != n) out.push_back("dimensions: A must be square, got " + detail::shape(sys.A));
    if (sys.B.rows() != n) out.push_back("dimensions: B must have n rows, got " + detail::shape(sys.B));
    if (sys.Q.rows() != n || sys.Q.cols() != n) out.push_back("dimensions: Q must be n x n, got " + detail::shape(sys.Q));
    if (sys.R.cols() != m) out.push_back("dimensions: R must be square, got " + detail::shape(sys.R));
    if (sys.D_u.rows() != n || sys.D_u.cols() != m)
        out.push_back("dimensions: D_u must be n x m, got " + detail::shape(sys.D_u));
    if (n == 0) out.push_back("dimensions: state dimension n must be positive");
    if (!out.empty()) return out;

    for (const auto& [name, M] : {std::pair<const char*, const Matrix*>{"A", &sys.A}, {"B", &sys.B}, {"Q", &sys.Q},
                                  {"R", &sys.R}, {"D_u", &sys.D_u}}) {
        if (!detail::all_finite(*M)) out.push_back(std::string("finite entries: ") + name + " contains NaN or Inf");
    }
    if (!out.empty()) return out;

    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j && sys.A(i, j) < 0.0) out.push_back("Metzler, " + detail::entry_name(i, j) + " of A is negative");

    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < q; ++j)
            if (sys.B(i, j) < 0.0) out.push_back("nonnegative B, " + detail::entry_name(i, j) + " is negative");

    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (sys.Q(i, j) < 0.0) out.push_back("nonnegative Q, " + detail::entry_name(i, j) + " is negative");

    const double q_scale = 1.0 + sys.Q.cwiseAbs().maxCoeff();
    if ((sys.Q - sys.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * q_scale) {
        out.push_back("symmetric Q: Q differs from its transpose");
    } else if (Eigen::SelfAdjointEigenSolver<Matrix>(sys.Q, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < -1e-10) {
        out.push_back("positive semidefinite Q: Q has a negative eigenvalue");
    }

    if (m > 0) {
        const double r_scale = 1.0 + sys.R.cwiseAbs().maxCoeff();
        if ((sys.R - sys.R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * r_scale) {
            out.push_back("symmetric R: R differs from its transpose");
        } else if (Eigen::SelfAdjointEigenSolver<Matrix>(sys.R, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() <= 0.0) {
            out.push_back("positive definite R: R has a nonpositive eigenvalue");
        }
    }
    return out;
}

/// Throws InvariantViolation listing every problem found by validate().
inline void require_valid(const BilinearPositiveSystem& sys) {
    const auto problems = validate(sys);
    if (problems.empty()) return;
    std::string msg = "invalid system:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvariantViolation(msg);
}

/// A + diag(D_u u).
inline Matrix closed_loop(const BilinearPositiveSystem& sys, const Vector& u) {
    if (u.size() != sys.D_u.cols() || sys.D_u.rows() != sys.A.rows() || sys.A.rows() != sys.A.cols())
        throw DimensionMismatch("closed_loop: input of length " + std::to_string(u.size()) + " for D_u of shape " +
                                detail::shape(sys.D_u));
    Matrix Acl = sys.A;
    Acl.diagonal() += sys.D_u * u;
    return Acl;
}

/**
 * Strongly connected components of the graph with an edge j -> i for every
 * nonzero off-diagonal entry M(i, j).  Returns the component index of every
 * node (Tarjan's algorithm).
 */
inline std::vector<Index> strongly_connected_components(const Matrix& M, Index* count = nullptr) {
    const Index n = M.rows();
    constexpr Index kUnvisited = -1;
    std::vector<Index> index(static_cast<std::size_t>(n), kUnvisited), low(static_cast<std::size_t>(n), 0),
        comp(static_cast<std::size_t>(n), kUnvisited);
    std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
    std::vector<Index> stack;
    Index next_index = 0, next_comp = 0;

    // Explicit call stack of (node, next successor to scan).
    std::vector<std::pair<Index, Index>> calls;
    for (Index root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != kUnvisited) continue;
        calls.emplace_back(root, 0);
        while (!calls.empty()) {
            auto& [v, next] = calls.back();
            const auto sv = static_cast<std::size_t>(v);
            if (next == 0 && index[sv] == kUnvisited) {
                index[sv] = low[sv] = next_index++;
                stack.push_back(v);
                on_stack[sv] = 1;
            }
            bool descended = false;
            while (next < n) {
                const Index w = next++;
                if (w == v || M(w, v) == 0.0) continue;
                const auto sw = static_cast<std::size_t>(w);
                if (index[sw] == kUnvisited) {
                    calls.emplace_back(w, 0);
                    descended = true;
                    break;
                }
                if (on_stack[sw]) low[sv] = std::min(low[sv], index[sw]);
            }
            if (descended) continue;
            if (low[sv] == index[sv]) {
                Index w = kUnvisited;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = 0;
                    comp[static_cast<std::size_t>(w)] = next_comp;
                } while (w != v);
                ++next_comp;
            }
            const Index finished = v;
            calls.pop_back();
            if (!calls.empty()) {
                const auto sp = static_cast<std::size_t>(calls.back().first);
                low[sp] = std::min(low[sp], low[static_cast<std::size_t>(finished)]);
            }
        }
    }
    if (count) *count = next_comp;
    return comp;
}

/// Single strongly connected component (trivially true for n <= 1).
inline bool is_strongly_connected(const Matrix& M) {
    if (M.rows() <= 1) return true;
    Index count = 0;
    strongly_connected_components(M, &count);
    return count == 1;
}

/**
 * Largest real part over the eigenvalues of a square matrix.  The spectrum is
 * the union of the spectra of the diagonal blocks of the strongly connected
 * components, so each block is solved separately; singleton blocks contribute
 * their diagonal entry exactly.  This keeps reducible patterns such as
 * triangular Jordan-like chains free of the eps^(1/n) error a dense solver
 * incurs on defective eigenvalues.
 */
inline double spectral_abscissa(const Matrix& M) {
    const Index n = M.rows();
    if (n == 0) return -std::numeric_limits<double>::infinity();
    Index count = 0;
    const auto comp = strongly_connected_components(M, &count);
    if (count == 1) {
        Eigen::EigenSolver<Matrix> es(M, false);
        return es.eigenvalues().real().maxCoeff();
    }
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(count));
    for (Index i = 0; i < n; ++i) members[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])].push_back(i);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& idx : members) {
        if (idx.size() == 1) {
            best = std::max(best, M(idx[0], idx[0]));
            continue;
        }
        const auto k = static_cast<Index>(idx.size());
        Matrix block(k, k);
        for (Index a = 0; a < k; ++a)
            for (Index b = 0; b < k; ++b) block(a, b) = M(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        Eigen::EigenSolver<Matrix> es(block, false);
        best = std::max(best, es.eigenvalues().real().maxCoeff());
    }
    return best;
}

inline StabilityCertificate is_hurwitz(const Matrix& Acl, double tol_stab = kStabilityTolerance) {
    if (Acl.rows() != Acl.cols()) throw DimensionMismatch("is_hurwitz: matrix must be square, got " + detail::shape(Acl));
    StabilityCertificate cert;
    cert.spectral_abscissa = spectral_abscissa(Acl);
    cert.stable = cert.spectral_abscissa < -tol_stab;
    if (cert.spectral_abscissa < 0.0) {
        Eigen::FullPivLU<Matrix> lu(Acl);
        if (lu.isInvertible()) {
            Vector p = lu.solve(-Vector::Ones(Acl.rows()));
            if (p.allFinite() && (p.array() > 0.0).all() && ((Acl * p).array() < 0.0).all()) cert.p = std::move(p);
        }
    }
    return cert;
}

/// Adjoint of the diagonal input map: D_u^T diag(X).
inline Vector d_adjoint(const Matrix& D_u, const Matrix& X) {
    if (X.rows() != X.cols() || X.rows() != D_u.rows())
        throw DimensionMismatch("d_adjoint: X of shape " + detail::shape(X) + " incompatible with D_u of shape " +
                                detail::shape(D_u));
    return D_u.transpose() * X.diagonal();
}

}  // namespace monobil
