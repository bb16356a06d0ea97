#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"
#include "performance.hpp"
#include "system.hpp"

namespace monobil {

inline constexpr double kBlowupGuard = 1e12;

struct Sinusoid {
    Vector amplitude;
    double frequency = 1.0;  // rad / time
    double phase = 0.0;
};

/// Time signal for the control or disturbance channel.  An impulse acts only
/// through the initial state (x0 += B * weights for a disturbance impulse) and
/// is zero for t >= 0 otherwise.
struct SignalSpec {
    enum class Kind { Zero, Constant, SinusoidSum, Impulse };

    Kind kind = Kind::Zero;
    Vector mean;
    std::vector<Sinusoid> components;

    static SignalSpec zero(Index dim) { return {Kind::Zero, Vector::Zero(dim), {}}; }
    static SignalSpec constant(Vector value) { return {Kind::Constant, std::move(value), {}}; }
    static SignalSpec sinusoid_sum(Vector mean, std::vector<Sinusoid> components) {
        return {Kind::SinusoidSum, std::move(mean), std::move(components)};
    }
    static SignalSpec impulse(Vector weights) { return {Kind::Impulse, std::move(weights), {}}; }

    [[nodiscard]] Index dim() const { return mean.size(); }

    [[nodiscard]] Vector value(double t) const {
        switch (kind) {
            case Kind::Zero:
            case Kind::Impulse: return Vector::Zero(mean.size());
            case Kind::Constant: return mean;
            case Kind::SinusoidSum: {
                Vector v = mean;
                for (const auto& c : components) v += c.amplitude * std::sin(c.frequency * t + c.phase);
                return v;
            }
        }
        return mean;
    }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Trajectory {
    double dt = 0.0;
    std::vector<double> t;
    RowMatrix X;  // one row per time point, n columns
    RowMatrix Z;  // one row per time point, [Q^{1/2} x; R^{1/2} u]
    std::optional<double> blowup_time;
};

namespace detail {

inline void check_signal(const SignalSpec& s, Index dim, const char* name) {
    if (s.dim() != dim) throw DimensionMismatch(std::string(name) + " signal has dimension " + std::to_string(s.dim()));
    for (const auto& c : s.components)
        if (c.amplitude.size() != dim)
            throw DimensionMismatch(std::string(name) + " sinusoid amplitude has the wrong dimension");
}

// Fixed-step RK4; stops early at the first state whose magnitude passes the guard.
inline Trajectory integrate_guarded(const BilinearPositiveSystem& sys, const SignalSpec& u_sig, const SignalSpec& d_sig,
                                    const Vector& x0, double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrate: dt must be > 0");
    if (!(T >= dt) || !std::isfinite(T)) throw std::invalid_argument("integrate: T must be >= dt");
    if (x0.size() != sys.n() || !x0.allFinite()) throw std::invalid_argument("integrate: x0 must be finite with length n");
    check_signal(u_sig, sys.m(), "control");
    check_signal(d_sig, sys.q(), "disturbance");
    if (u_sig.kind == SignalSpec::Kind::Impulse) throw std::invalid_argument("integrate: control impulses are not supported");

    const Index n = sys.n();
    const Index m = sys.m();
    const Matrix Qh = psd_sqrt(sys.Q);
    const Matrix Rh = psd_sqrt(sys.R);
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));

    Vector x = x0;
    if (d_sig.kind == SignalSpec::Kind::Impulse) x += sys.B * d_sig.mean;

    const Vector a_diag = sys.A.diagonal();
    Matrix Acl = sys.A;
    auto rhs = [&](double t, const Vector& state) -> Vector {
        Acl.diagonal() = a_diag + sys.D_u * u_sig.value(t);
        return Acl * state + sys.B * d_sig.value(t);
    };

    Trajectory traj;
    traj.dt = dt;
    traj.t.reserve(steps + 1);
    traj.X.resize(static_cast<Index>(steps + 1), n);
    traj.Z.resize(static_cast<Index>(steps + 1), Qh.rows() + m);

    auto record = [&](std::size_t k, double t) {
        traj.t.push_back(t);
        const auto row = static_cast<Index>(k);
        traj.X.row(row) = x.transpose();
        traj.Z.row(row).head(Qh.rows()) = (Qh * x).transpose();
        traj.Z.row(row).tail(m) = (Rh * u_sig.value(t)).transpose();
    };

    record(0, 0.0);
    std::size_t k = 0;
    for (; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vector k1 = rhs(t, x);
        const Vector k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
        const Vector k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
        const Vector k4 = rhs(t + dt, x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t_next = static_cast<double>(k + 1) * dt;
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowupGuard) {
            traj.blowup_time = t_next;
            break;
        }
        record(k + 1, t_next);
    }
    const auto rows = static_cast<Index>(traj.t.size());
    traj.X.conservativeResize(rows, Eigen::NoChange);
    traj.Z.conservativeResize(rows, Eigen::NoChange);
    return traj;
}

}  // namespace detail

/// Integrates dx/dt = (A + D(u(t))) x + B d(t) with classical RK4.
/// Throws StateBlowup when some |x_i| exceeds 1e12.
inline Trajectory integrate(const BilinearPositiveSystem& sys, const SignalSpec& u_sig, const SignalSpec& d_sig,
                            const Vector& x0, double T, double dt) {
    auto traj = detail::integrate_guarded(sys, u_sig, d_sig, x0, T, dt);
    if (traj.blowup_time) throw StateBlowup(*traj.blowup_time);
    return traj;
}

/// min(1e-2, 0.05 / |spectral abscissa|)
inline double default_time_step(const Matrix& Acl) {
    const double a = std::abs(spectral_abscissa(Acl));
    return a > 0.0 ? std::min(1e-2, 0.05 / a) : 1e-2;
}

inline bool positivity_check(const Trajectory& traj) {
    if (traj.X.size() == 0) return true;
    return traj.X.minCoeff() >= -1e-9 * (1.0 + traj.X.maxCoeff());
}

/// Time average of z^T z over the trajectory tail (trapezoidal rule), skipping
/// the first burn_in_fraction of the grid.
inline double power_seminorm_estimate(const Trajectory& traj, double burn_in_fraction) {
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction <= 0.9))
        throw std::invalid_argument("power_seminorm_estimate: burn_in_fraction must lie in [0, 0.9]");
    const std::size_t N = traj.t.size();
    if (N < 2) throw std::invalid_argument("power_seminorm_estimate: trajectory needs at least two samples");
    const auto k0 = static_cast<std::size_t>(std::llround(burn_in_fraction * static_cast<double>(N - 1)));
    if (k0 + 1 >= N) throw std::invalid_argument("power_seminorm_estimate: averaging window is empty");

    double integral = 0.0;
    double prev = traj.Z.row(static_cast<Index>(k0)).squaredNorm();
    for (std::size_t k = k0 + 1; k < N; ++k) {
        const double cur = traj.Z.row(static_cast<Index>(k)).squaredNorm();
        integral += 0.5 * (traj.t[k] - traj.t[k - 1]) * (prev + cur);
        prev = cur;
    }
    return integral / (traj.t[N - 1] - traj.t[k0]);
}

struct PerturbationRow {
    double epsilon = 0.0;
    double delta_J = 0.0;       // power change at epsilon
    double delta_J_half = 0.0;  // power change at epsilon / 2
    double ratio = 0.0;         // delta_J / delta_J_half, NaN when epsilon = 0
};

struct PerturbationReport {
    double baseline_power = 0.0;
    double averaging_window = 0.0;
    std::vector<PerturbationRow> rows;
};

/**
 * Second-order perturbation experiment at a constant input.
 *
 * The disturbance is held at the worst-case constant direction and the state
 * starts at the matching equilibrium.  For each epsilon the input becomes
 * u_star + epsilon * u_tilde(t) and the change in estimated output power is
 * recorded, together with the same quantity at epsilon / 2.  Power is
 * averaged over the largest whole number of periods of the slowest sinusoid
 * that fits in the second half of the horizon; frequencies are assumed
 * commensurate with the slowest one.
 */
inline PerturbationReport second_order_experiment(const BilinearPositiveSystem& sys, const Vector& u_star,
                                            const SignalSpec& u_tilde, std::span<const double> epsilons, double T,
                                            double dt) {
    if (u_tilde.kind != SignalSpec::Kind::SinusoidSum || u_tilde.components.empty())
        throw std::invalid_argument("second_order_experiment: variation must be a sinusoid sum");
    if (u_tilde.dim() != sys.m() || u_tilde.mean.cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("second_order_experiment: variation must be zero-mean with dimension m");

    const Objective obj(sys);
    const Matrix Acl = closed_loop(sys, u_star);
    const auto val = obj.evaluate_closed_loop(Acl, u_star);
    if (!val.stable) throw UnstableClosedLoop(val.spectral_abscissa);
    const Vector d_bar = val.triplets.empty() ? Vector::Zero(sys.q()) : val.triplets.front().v;
    const Vector x_bar = -Acl.partialPivLu().solve(sys.B * d_bar);

    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& c : u_tilde.components) slowest = std::min(slowest, std::abs(c.frequency));
    const double period = 2.0 * std::numbers::pi / slowest;
    double window = 0.5 * T;
    if (std::isfinite(period) && period <= 0.5 * T) window = std::floor(0.5 * T / period) * period;
    const double burn_in = (T - window) / T;

    const SignalSpec d_sig = SignalSpec::constant(d_bar);
    auto power_at = [&](double eps) {
        SignalSpec u_sig = u_tilde;
        u_sig.mean = u_star;
        for (auto& c : u_sig.components) c.amplitude *= eps;
        return power_seminorm_estimate(integrate(sys, u_sig, d_sig, x_bar, T, dt), burn_in);
    };

    PerturbationReport report;
    report.averaging_window = window;
    report.baseline_power = power_seminorm_estimate(integrate(sys, SignalSpec::constant(u_star), d_sig, x_bar, T, dt), burn_in);

    std::map<double, double> cache;
    auto delta = [&](double eps) {
        if (eps == 0.0) return 0.0;
        auto it = cache.find(eps);
        if (it == cache.end()) it = cache.emplace(eps, power_at(eps) - report.baseline_power).first;
        return it->second;
    };
    for (const double eps : epsilons) {
        PerturbationRow row;
        row.epsilon = eps;
        row.delta_J = delta(eps);
        row.delta_J_half = delta(0.5 * eps);
        row.ratio = eps == 0.0 ? std::numeric_limits<double>::quiet_NaN() : row.delta_J / row.delta_J_half;
        report.rows.push_back(row);
    }
    return report;
}

struct ImpulseResponse {
    Trajectory trajectory;
    std::vector<double> norm1;
    double spectral_abscissa = 0.0;
    bool stable = false;   // verdict from the spectral abscissa
    bool growing = false;  // verdict from the trajectory: |x|_1 larger at T than at T/2, or blowup
};

/// Response from x0 = B * 1 with d = 0 under a constant input.  Blowups are
/// recorded, not thrown.
inline ImpulseResponse impulse_response(const BilinearPositiveSystem& sys, const Vector& u, double T, double dt) {
    ImpulseResponse out;
    const Matrix Acl = closed_loop(sys, u);
    const auto cert = is_hurwitz(Acl);
    out.spectral_abscissa = cert.spectral_abscissa;
    out.stable = cert.stable;
    out.trajectory = detail::integrate_guarded(sys, SignalSpec::constant(u), SignalSpec::zero(sys.q()),
                                               sys.B * Vector::Ones(sys.q()), T, dt);
    const auto& X = out.trajectory.X;
    out.norm1.reserve(static_cast<std::size_t>(X.rows()));
    for (Index k = 0; k < X.rows(); ++k) out.norm1.push_back(X.row(k).cwiseAbs().sum());
    if (out.trajectory.blowup_time) {
        out.growing = true;
    } else if (!out.norm1.empty()) {
        out.growing = out.norm1.back() > out.norm1[out.norm1.size() / 2];
    }
    return out;
}

/// CSV with a `# key=value` metadata line, then `t,x1,...,xn,norm1`.
inline void write_impulse_csv(std::ostream& os, const ImpulseResponse& resp) {
    const auto& traj = resp.trajectory;
    const auto old_precision = os.precision(12);
    os << "# stable=" << (resp.stable ? "true" : "false") << " spectral_abscissa=" << resp.spectral_abscissa
       << " growing=" << (resp.growing ? "true" : "false") << " blowup=";
    if (traj.blowup_time) os << *traj.blowup_time;
    else os << "none";
    os << '\n';

    os << 't';
    for (Index i = 0; i < traj.X.cols(); ++i) os << ",x" << i + 1;
    os << ",norm1\n";
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        os << traj.t[k];
        for (Index i = 0; i < traj.X.cols(); ++i) os << ',' << traj.X(static_cast<Index>(k), i);
        os << ',' << resp.norm1[k] << '\n';
    }
    os.precision(old_precision);
}

}  // namespace monobil
