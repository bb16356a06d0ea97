#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "optimizer.hpp"
#include "performance.hpp"
#include "system.hpp"

namespace monobil {

// Elementwise interval bounds |Delta_A(i,j)| <= A_tilde(i,j), |delta_u(k)| <= beta(k).
struct UncertaintySpec {
    Matrix A_tilde;
    Vector beta;

    friend bool operator==(const UncertaintySpec&, const UncertaintySpec&) = default;
};

struct PerturbationSample {
    Matrix Delta_A;
    Vector delta_u;
};

inline std::vector<std::string> validate(const UncertaintySpec& unc, const BilinearPositiveSystem& sys) {
    std::vector<std::string> out;
    if (unc.A_tilde.rows() != sys.n() || unc.A_tilde.cols() != sys.n())
        out.push_back("dimensions: A_tilde must be n x n, got " + detail::shape(unc.A_tilde));
    if (unc.beta.size() != sys.m()) out.push_back("dimensions: beta must have length m");
    if (!out.empty()) return out;
    if (!unc.A_tilde.allFinite() || !unc.beta.allFinite()) out.push_back("finite entries: uncertainty bounds");
    if (unc.A_tilde.size() > 0 && unc.A_tilde.minCoeff() < 0.0) out.push_back("nonnegative A_tilde");
    if (unc.beta.size() > 0 && unc.beta.minCoeff() < 0.0) out.push_back("nonnegative beta");
    return out;
}

inline void require_monotone_input_map(const BilinearPositiveSystem& sys) {
    if (sys.D_u.size() > 0 && sys.D_u.maxCoeff() > 0.0)
        throw NonMonotoneInputMap(
            "robust control requires every entry of D_u to be <= 0, so that larger inputs never increase any "
            "diagonal entry of the dynamics");
}

/// Worst-case system: A replaced by A + A_tilde - diag(D_u beta).
inline BilinearPositiveSystem robustify(const BilinearPositiveSystem& sys, const UncertaintySpec& unc) {
    require_valid(sys);
    require_monotone_input_map(sys);
    if (const auto problems = validate(unc, sys); !problems.empty()) throw InvariantViolation("invalid uncertainty: " + problems.front());
    BilinearPositiveSystem out = sys;
    out.A += unc.A_tilde;
    out.A.diagonal() -= sys.D_u * unc.beta;
    return out;
}

inline Matrix perturbed_closed_loop(const BilinearPositiveSystem& sys, const Vector& u, const PerturbationSample& pert,
                                    const UncertaintySpec& unc) {
    if (pert.Delta_A.rows() != sys.n() || pert.Delta_A.cols() != sys.n() || pert.delta_u.size() != sys.m())
        throw DimensionMismatch("perturbed_closed_loop: perturbation has the wrong shape");
    if ((pert.Delta_A.cwiseAbs().array() > unc.A_tilde.array()).any() ||
        (pert.delta_u.cwiseAbs().array() > unc.beta.array()).any())
        throw BoundViolation("perturbed_closed_loop: perturbation exceeds the uncertainty bounds");
    Matrix Acl = sys.A + pert.Delta_A;
    Acl.diagonal() += sys.D_u * (u - pert.delta_u);
    return Acl;
}

/// Uniform in-bound perturbation; off-diagonal entries are clipped at -A(i,j)
/// so that A + Delta_A stays Metzler.
template <class Rng>
PerturbationSample sample_perturbation(const BilinearPositiveSystem& sys, const UncertaintySpec& unc, Rng& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    PerturbationSample p{Matrix::Zero(sys.n(), sys.n()), Vector::Zero(sys.m())};
    for (Index i = 0; i < sys.n(); ++i) {
        for (Index j = 0; j < sys.n(); ++j) {
            double d = unc.A_tilde(i, j) * unit(rng);
            if (i != j && d < -sys.A(i, j)) d = -sys.A(i, j);
            p.Delta_A(i, j) = d;
        }
    }
    for (Index k = 0; k < sys.m(); ++k) p.delta_u(k) = unc.beta(k) * unit(rng);
    return p;
}

struct MonotonicityViolation {
    int sample = 0;
    std::string kind;  // "unstable" or "cost"
    double J_sample = 0.0;
    double spectral_abscissa = 0.0;
};

struct MonotonicityReport {
    bool precondition_ok = false;
    std::string message;
    int samples = 0;
    double J_worst = 0.0;
    double max_J_sample = 0.0;
    std::vector<MonotonicityViolation> violations;
};

/**
 * Samples in-bound perturbations at a fixed input and checks that each
 * perturbed closed loop is Hurwitz and no costlier than the worst-case
 * system (A + A_tilde - D(beta)).
 */
inline MonotonicityReport worst_case_monotonicity_check(const BilinearPositiveSystem& sys, const UncertaintySpec& unc,
                                                        const Vector& u, int samples, std::uint64_t seed) {
    MonotonicityReport report;
    const Objective obj(robustify(sys, unc));
    const auto worst = obj.evaluate(u);
    if (!worst.stable) {
        report.message = "robustified closed loop is not Hurwitz at the given input (spectral abscissa " +
                         std::to_string(worst.spectral_abscissa) + ")";
        return report;
    }
    report.precondition_ok = true;
    report.J_worst = worst.J;

    // Perturbed systems share B, Q, R with the nominal one, so one Objective serves all samples.
    const Objective nominal(sys);
    std::mt19937_64 rng(seed);
    for (int s = 0; s < samples; ++s) {
        const auto pert = sample_perturbation(sys, unc, rng);
        const Matrix Acl = perturbed_closed_loop(sys, u, pert, unc);
        const auto val = nominal.evaluate_closed_loop(Acl, u);
        ++report.samples;
        if (!val.stable) {
            report.violations.push_back({s, "unstable", val.J, val.spectral_abscissa});
            continue;
        }
        report.max_J_sample = std::max(report.max_J_sample, val.J);
        if (val.J > worst.J + 1e-8) report.violations.push_back({s, "cost", val.J, val.spectral_abscissa});
    }
    return report;
}

inline SolveResult solve_robust(const BilinearPositiveSystem& sys, const UncertaintySpec& unc, const SolveOptions& opts) {
    return solve(robustify(sys, unc), opts);
}

}  // namespace monobil
