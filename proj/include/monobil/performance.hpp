#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "system.hpp"

namespace monobil {

/// Relative gap below the top singular value inside which a triplet still
/// counts as a maximizer.
inline constexpr double kMultiplicityTolerance = 1e-8;

struct SingularTriplet {
    double sigma = 0.0;
    Vector w;  // left singular vector, length n
    Vector v;  // right singular vector, length q
};

struct ObjectiveValue {
    double J = std::numeric_limits<double>::infinity();
    double sigma_cl = std::numeric_limits<double>::infinity();
    double control_cost = 0.0;
    std::vector<SingularTriplet> triplets;  // every triplet achieving sigma_cl
    bool stable = false;
    double spectral_abscissa = 0.0;
};

/// Symmetric PSD square root. Eigenvalues in [-1e-10, 0] are clamped to zero,
/// anything more negative is rejected.
inline Matrix psd_sqrt(const Matrix& Q) {
    const Matrix Qs = 0.5 * (Q + Q.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(Qs);
    Vector ev = es.eigenvalues();
    if (ev.size() > 0 && ev.minCoeff() < -1e-10)
        throw InvariantViolation("matrix square root: eigenvalue " + std::to_string(ev.minCoeff()) + " is negative");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

// Flip (w, v) jointly so the largest-magnitude entry of v is positive.
inline void normalize_sign(SingularTriplet& t) {
    if (t.v.size() == 0) return;
    Index k = 0;
    t.v.cwiseAbs().maxCoeff(&k);
    if (t.v(k) < 0.0) {
        t.v = -t.v;
        t.w = -t.w;
    }
}

inline std::vector<SingularTriplet> principal_triplets(const Matrix& G) {
    std::vector<SingularTriplet> out;
    if (G.rows() == 0 || G.cols() == 0) return out;
    Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double top = s(0);
    for (Index i = 0; i < s.size(); ++i) {
        if (i > 0 && s(i) < top * (1.0 - kMultiplicityTolerance)) break;
        if (i > 0 && top == 0.0) break;
        SingularTriplet t{s(i), svd.matrixU().col(i), svd.matrixV().col(i)};
        normalize_sign(t);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace detail

/**
 * Constant-input objective for one system.  Holds the square root of Q so
 * repeated evaluations (line searches, sampling) do not recompute it.
 */
class Objective {
public:
    explicit Objective(BilinearPositiveSystem sys) : sys_(std::move(sys)), q_half_(psd_sqrt(sys_.Q)) {}

    [[nodiscard]] const BilinearPositiveSystem& system() const noexcept { return sys_; }
    [[nodiscard]] const Matrix& q_sqrt() const noexcept { return q_half_; }

    /// -Q^{1/2} A_cl^{-1} B for an arbitrary Hurwitz closed-loop matrix.
    [[nodiscard]] Matrix dc_gain_of(const Matrix& Acl) const {
        const auto cert = is_hurwitz(Acl);
        if (!cert.stable) throw UnstableClosedLoop(cert.spectral_abscissa);
        return -q_half_ * Acl.partialPivLu().solve(sys_.B);
    }

    [[nodiscard]] Matrix dc_gain(const Vector& u) const { return dc_gain_of(closed_loop(sys_, u)); }

    /// J for the closed loop Acl with control cost u^T R u. Instability is
    /// reported through the result, never thrown.
    [[nodiscard]] ObjectiveValue evaluate_closed_loop(const Matrix& Acl, const Vector& u) const {
        ObjectiveValue out;
        out.control_cost = u.dot(sys_.R * u);
        out.spectral_abscissa = spectral_abscissa(Acl);
        out.stable = out.spectral_abscissa < -kStabilityTolerance;
        if (!out.stable) return out;

        const Matrix G = -q_half_ * Acl.partialPivLu().solve(sys_.B);
        out.triplets = detail::principal_triplets(G);
        out.sigma_cl = out.triplets.empty() ? 0.0 : out.triplets.front().sigma;
        out.J = out.sigma_cl * out.sigma_cl + out.control_cost;
        return out;
    }

    [[nodiscard]] ObjectiveValue evaluate(const Vector& u) const { return evaluate_closed_loop(closed_loop(sys_, u), u); }

private:
    BilinearPositiveSystem sys_;
    Matrix q_half_;
};

inline Matrix dc_gain(const BilinearPositiveSystem& sys, const Vector& u) { return Objective(sys).dc_gain(u); }

inline ObjectiveValue evaluate_J(const BilinearPositiveSystem& sys, const Vector& u) { return Objective(sys).evaluate(u); }

/// Right principal singular vector of the DC gain, sign-normalized to be nonnegative.
inline Vector worst_case_disturbance(const BilinearPositiveSystem& sys, const Vector& u) {
    const Objective obj(sys);
    const auto val = obj.evaluate(u);
    if (!val.stable) throw UnstableClosedLoop(val.spectral_abscissa);
    if (val.triplets.empty()) return Vector::Zero(sys.q());
    return val.triplets.front().v;
}

/// Closed-form objective of the path-graph chain model with back edge c,
/// D(u) = -uI, B = e_n, Q = e_n e_n^T, R = rho.
inline double closed_form_chain_J(double u, int n, double r, double c, double rho) {
    if (n < 1) throw std::invalid_argument("closed_form_chain_J: n must be >= 1");
    const double gap = u - r;
    const double gap_n = std::pow(gap, n);
    // Stable iff u > r and (u - r)^n > c.
    if (!(gap > 0.0) || !(gap_n > c))
        throw OutsideStabilityRegion("closed_form_chain_J: u = " + std::to_string(u) + " does not stabilize the chain");
    const double ratio = std::pow(gap, n - 1) / (gap_n - c);
    return ratio * ratio + rho * u * u;
}

/// Smallest back-edge weight c that destabilizes the chain at dose u.
inline double chain_instability_threshold(double u, int n, double r) { return std::abs(std::pow(r - u, n)); }

/// True when the frequency-response gain never exceeds the DC gain on the sampled grid.
inline bool dc_peak_check(const BilinearPositiveSystem& sys, const Vector& u, std::span<const double> omegas,
                          double tol = -1.0) {
    const Objective obj(sys);
    const Matrix Acl = closed_loop(sys, u);
    const auto val = obj.evaluate_closed_loop(Acl, u);
    if (!val.stable) throw UnstableClosedLoop(val.spectral_abscissa);
    const double bound = val.sigma_cl + (tol >= 0.0 ? tol : 1e-9 * (1.0 + val.sigma_cl));

    using CMatrix = Eigen::MatrixXcd;
    const CMatrix Acl_c = Acl.cast<std::complex<double>>();
    const CMatrix B_c = sys.B.cast<std::complex<double>>();
    const CMatrix Qh_c = obj.q_sqrt().cast<std::complex<double>>();
    const Index n = sys.n();
    for (const double w : omegas) {
        CMatrix resolvent = std::complex<double>(0.0, w) * CMatrix::Identity(n, n) - Acl_c;
        const CMatrix H = Qh_c * resolvent.partialPivLu().solve(B_c);
        if (H.size() == 0) continue;
        Eigen::JacobiSVD<CMatrix> svd(H);
        if (svd.singularValues()(0) > bound) return false;
    }
    return true;
}

}  // namespace monobil
