#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "performance.hpp"
#include "system.hpp"

namespace monobil {

struct SubgradientElement {
    Vector g;
    std::vector<double> weights;  // convex weights over the active triplets
};

enum class SolveMode { Auto, Subgradient, Gradient };

inline const char* to_string(SolveMode mode) {
    switch (mode) {
        case SolveMode::Auto: return "auto";
        case SolveMode::Subgradient: return "subgradient";
        case SolveMode::Gradient: return "gradient";
    }
    return "unknown";
}

struct SolveOptions {
    std::optional<Vector> u0;  // stabilize_initial() is used when absent or not stabilizing
    int max_iters = 10000;
    double step_a = 0.0;  // 0 selects 1 / (1 + |g0|)
    double tol = 1e-9;
    int window = 50;
    double backtrack_factor = 0.5;
    SolveMode mode = SolveMode::Auto;
};

struct IterationRecord {
    int k = 0;
    double J_best = 0.0;
    double grad_norm = 0.0;
    double J = 0.0;
    Vector u;
};

struct SolveResult {
    Vector u_star;
    double J_star = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::vector<IterationRecord> history;
    bool converged = false;
    SolveMode mode_used = SolveMode::Subgradient;
};

inline constexpr int kMaxBacktracks = 60;

namespace detail {

inline std::vector<double> resolve_weights(std::size_t active, const std::optional<std::vector<double>>& alpha) {
    if (!alpha) return std::vector<double>(active, 1.0 / static_cast<double>(active));
    if (alpha->size() != active)
        throw InvalidWeights("expected " + std::to_string(active) + " weights, got " + std::to_string(alpha->size()));
    double sum = 0.0;
    for (const double a : *alpha) {
        if (!(a >= 0.0)) throw InvalidWeights("weights must be nonnegative");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidWeights("weights must sum to 1, got " + std::to_string(sum));
    return *alpha;
}

// Subgradient at u from an already evaluated (stable) closed loop.
inline SubgradientElement subgradient_from(const Objective& obj, const Matrix& Acl, const ObjectiveValue& val,
                                           const Vector& u, const std::optional<std::vector<double>>& alpha) {
    const auto& sys = obj.system();
    SubgradientElement out;
    out.weights = resolve_weights(val.triplets.size(), alpha);
    out.g = 2.0 * sys.R * u;
    if (val.sigma_cl == 0.0) return out;

    const auto lu = Acl.partialPivLu();
    const Matrix Acl_inv_T_Qh = lu.transpose().solve(obj.q_sqrt());
    for (std::size_t i = 0; i < val.triplets.size(); ++i) {
        const auto& t = val.triplets[i];
        // A_cl^{-1} B v w^T Q^{1/2} A_cl^{-1}
        const Vector left = lu.solve(sys.B * t.v);
        const Vector right = Acl_inv_T_Qh * t.w;
        const Matrix X = left * right.transpose();
        out.g += 2.0 * val.sigma_cl * out.weights[i] * d_adjoint(sys.D_u, X);
    }
    return out;
}

inline void check_options(const BilinearPositiveSystem& sys, const SolveOptions& opts) {
    if (opts.max_iters < 1) throw InvalidOptions("max_iters must be >= 1");
    if (!(opts.tol > 0.0)) throw InvalidOptions("tol must be > 0");
    if (opts.window < 1) throw InvalidOptions("window must be >= 1");
    if (!(opts.backtrack_factor > 0.0 && opts.backtrack_factor < 1.0))
        throw InvalidOptions("backtrack_factor must lie in (0, 1)");
    if (!(opts.step_a >= 0.0) || !std::isfinite(opts.step_a)) throw InvalidOptions("step must be finite and >= 0");
    if (opts.u0 && (opts.u0->size() != sys.m() || !opts.u0->allFinite()))
        throw InvalidOptions("u0 must be a finite vector of length m = " + std::to_string(sys.m()));
}

}  // namespace detail

/**
 * One element of the subdifferential of J at u,
 *
 *     g = 2 sigma_cl sum_i alpha_i D^dagger(A_cl^{-1} B v_i w_i^T Q^{1/2} A_cl^{-1}) + 2 R u,
 *
 * where (sigma_cl, w_i, v_i) range over the maximizing singular triplets of the
 * DC gain.  Uniform weights are used when alpha is not given.
 */
inline SubgradientElement subdifferential_element(const Objective& obj, const Vector& u,
                                                  const std::optional<std::vector<double>>& alpha = std::nullopt) {
    const Matrix Acl = closed_loop(obj.system(), u);
    const auto val = obj.evaluate_closed_loop(Acl, u);
    if (!val.stable) throw UnstableClosedLoop(val.spectral_abscissa);
    return detail::subgradient_from(obj, Acl, val, u, alpha);
}

inline SubgradientElement subdifferential_element(const BilinearPositiveSystem& sys, const Vector& u,
                                                  const std::optional<std::vector<double>>& alpha = std::nullopt) {
    return subdifferential_element(Objective(sys), u, alpha);
}

/// Gradient of J; defined when the top singular value is simple or A is irreducible.
inline Vector gradient(const Objective& obj, const Vector& u) {
    const Matrix Acl = closed_loop(obj.system(), u);
    const auto val = obj.evaluate_closed_loop(Acl, u);
    if (!val.stable) throw UnstableClosedLoop(val.spectral_abscissa);
    if (val.triplets.size() > 1 && !is_strongly_connected(obj.system().A))
        throw DegenerateTopSingularValue("gradient: top singular value has multiplicity " +
                                         std::to_string(val.triplets.size()) + " and J is not differentiable here");
    return detail::subgradient_from(obj, Acl, val, u, std::nullopt).g;
}

inline Vector gradient(const BilinearPositiveSystem& sys, const Vector& u) { return gradient(Objective(sys), u); }

namespace detail {

// +1 for inputs whose D_u column sums negative, -1 for positive sums, 0 otherwise.
inline Vector damping_direction(const BilinearPositiveSystem& sys) {
    Vector dir(sys.m());
    for (Index k = 0; k < sys.m(); ++k) {
        const double s = sys.D_u.col(k).sum();
        dir(k) = s < 0.0 ? 1.0 : (s > 0.0 ? -1.0 : 0.0);
    }
    return dir;
}

// Moves a start point t * dir out along the ray (t -> 2t, starting at 1e-3)
// while J keeps decreasing.  Near the stability boundary the subgradient is
// huge and the default step constant 1 / (1 + |g0|) becomes uselessly small.
inline Vector push_along_ray(const Objective& obj, const Vector& start, const Vector& dir, double t) {
    Vector best = start;
    double best_J = obj.evaluate(best).J;
    for (int i = 0; i < 64; ++i) {
        t = t > 0.0 ? 2.0 * t : 1e-3;
        const double J = obj.evaluate(t * dir).J;
        if (!(J < best_J)) break;
        best_J = J;
        best = t * dir;
    }
    return best;
}

}  // namespace detail

/**
 * Finds a stabilizing constant input by scaling a direction.  The default
 * direction pushes every diagonal entry of the closed loop down: input k gets
 * +1 when column k of D_u sums negative and -1 when it sums positive.
 * Returns the first stabilizing scale among 1e-3, 2e-3, 4e-3, ...
 */
inline Vector stabilize_initial(const BilinearPositiveSystem& sys, const std::optional<Vector>& direction = std::nullopt) {
    const Index m = sys.m();
    if (is_hurwitz(sys.A).stable) return Vector::Zero(m);

    if (direction && direction->size() != m) throw DimensionMismatch("stabilize_initial: direction must have length m");
    const Vector dir = direction ? *direction : detail::damping_direction(sys);
    if ((sys.D_u * dir).cwiseAbs().maxCoeff() == 0.0)
        throw NoStabilizingInitialPoint("stabilize_initial: the input direction has no effect on the dynamics");

    double scale = 1e-3;
    for (int i = 0; i < 64; ++i, scale *= 2.0)
        if (is_hurwitz(closed_loop(sys, scale * dir)).stable) return scale * dir;
    throw NoStabilizingInitialPoint("stabilize_initial: no stabilizing input found along the search direction");
}

/**
 * Minimizes J over constant inputs.
 *
 * Subgradient mode takes steps step_a / sqrt(k + 1) along a subgradient and
 * backtracks only to stay inside the Hurwitz region; the best iterate is
 * reported.  Gradient mode additionally rejects steps that increase J.
 * Auto picks gradient mode when the graph of A is strongly connected.
 */
inline SolveResult solve(const BilinearPositiveSystem& sys, const SolveOptions& opts) {
    require_valid(sys);
    detail::check_options(sys, opts);
    const Objective obj(sys);

    Vector u = opts.u0 ? *opts.u0 : Vector::Zero(sys.m());
    if (!opts.u0 || !is_hurwitz(closed_loop(sys, u)).stable) {
        u = stabilize_initial(sys);
        const Vector dir = detail::damping_direction(sys);
        if (dir.squaredNorm() > 0.0) u = detail::push_along_ray(obj, u, dir, u.dot(dir) / dir.squaredNorm());
    }

    SolveResult result;
    result.mode_used = opts.mode;
    if (opts.mode == SolveMode::Auto)
        result.mode_used = is_strongly_connected(sys.A) ? SolveMode::Gradient : SolveMode::Subgradient;
    const bool gradient_mode = result.mode_used == SolveMode::Gradient;

    Matrix Acl = closed_loop(sys, u);
    ObjectiveValue val = obj.evaluate_closed_loop(Acl, u);
    Vector g = detail::subgradient_from(obj, Acl, val, u, std::nullopt).g;

    const double step_a = opts.step_a > 0.0 ? opts.step_a : 1.0 / (1.0 + g.norm());
    double step = step_a;

    result.u_star = u;
    result.J_star = val.J;
    result.history.push_back({0, val.J, g.norm(), val.J, u});

    for (int k = 0; k < opts.max_iters; ++k) {
        if (g.norm() == 0.0 || (gradient_mode && g.norm() <= opts.tol)) {
            result.converged = true;
            break;
        }

        double alpha = gradient_mode ? step : step_a / std::sqrt(static_cast<double>(k) + 1.0);
        bool accepted = false;
        Vector cand;
        Matrix cand_Acl;
        ObjectiveValue cand_val;
        for (int t = 0; t <= kMaxBacktracks; ++t, alpha *= opts.backtrack_factor) {
            cand = u - alpha * g;
            cand_Acl = closed_loop(sys, cand);
            cand_val = obj.evaluate_closed_loop(cand_Acl, cand);
            if (!cand_val.stable) continue;
            // Ties are accepted so gradient mode can move at the resolution limit of J.
            if (gradient_mode && cand_val.J > val.J * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) continue;
            accepted = true;
            break;
        }
        if (!accepted) break;

        u = std::move(cand);
        Acl = std::move(cand_Acl);
        val = std::move(cand_val);
        g = detail::subgradient_from(obj, Acl, val, u, std::nullopt).g;
        if (gradient_mode) step = alpha / opts.backtrack_factor;

        if (val.J < result.J_star) {
            result.J_star = val.J;
            result.u_star = u;
        }
        result.iterations = k + 1;
        result.history.push_back({k + 1, result.J_star, g.norm(), val.J, u});

        const auto h = result.history.size();
        if (h > static_cast<std::size_t>(opts.window)) {
            const double earlier = result.history[h - 1 - static_cast<std::size_t>(opts.window)].J_best;
            if (earlier - result.J_star <= opts.tol * std::abs(result.J_star)) {
                result.converged = true;
                break;
            }
        }
    }
    return result;
}

/// Root of (u - r)^{-3} = rho u with u > r: the stationary dose of the nominal chain model.
inline double quartic_nominal_optimum(double r, double rho) {
    if (!(r >= 0.0) || !(rho > 0.0)) throw std::invalid_argument("quartic_nominal_optimum: need r >= 0 and rho > 0");
    const auto f = [&](double u) { return std::pow(u - r, -3.0) - rho * u; };
    double lo = r;
    double hi = r + 1.0;
    while (f(hi) > 0.0) hi = r + 2.0 * (hi - r);
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return std::abs(f(lo)) < std::abs(f(hi)) && lo > r ? lo : hi;
}

}  // namespace monobil
