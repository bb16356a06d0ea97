#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "errors.hpp"
#include "io.hpp"
#include "models.hpp"
#include "optimizer.hpp"
#include "performance.hpp"
#include "robust.hpp"
#include "simulate.hpp"
#include "system.hpp"

namespace monobil::cli {

inline constexpr int kSchemaVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

struct RunConfig {
    std::string command;
    std::string input_path;
    std::string output_path;

    // Control input: vector literal ("1.5", "1,2", "[1, 2]") or path to a result document.
    std::string u;
    std::string u0;

    int max_iters = 10000;
    double tol = 1e-9;
    double step = 0.0;
    std::string mode = "auto";
    int window = 50;

    double T = 100.0;
    std::optional<double> dt;

    int verify_samples = 0;
    std::uint64_t seed = 1;

    // example
    bool random = false;
    int n = 10;
    double r = 1.0;
    double c = 0.0;
    double rho = 3.0;
    std::optional<double> unc_c;
    double beta = 0.0;
    int m = 1;
    int q = 1;
    double density = 0.5;
    std::string emit;
};

namespace detail {

using json = nlohmann::json;

inline Vector parse_vector_literal(const std::string& text) {
    std::string cleaned;
    for (const char ch : text) cleaned += (ch == '[' || ch == ']' || ch == ',') ? ' ' : ch;
    std::istringstream in(cleaned);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            throw ParseError("'" + text + "' is not a numeric vector");
        }
        if (used != token.size()) throw ParseError("'" + text + "' is not a numeric vector");
        values.push_back(v);
    }
    if (values.empty()) throw ParseError("empty vector literal");
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

// Literal, or the u_star field of a result document when `text` names a file.
inline Vector resolve_input(const std::string& text, Index m) {
    Vector u;
    if (std::filesystem::is_regular_file(text)) {
        json doc;
        try {
            doc = json::parse(io::read_text(text));
        } catch (const json::parse_error& e) {
            throw ParseError(text + ": malformed JSON: " + e.what());
        }
        const auto& field = io::require_field(doc, "u_star");
        u = io::parse_vector(field, "u_star", field.is_array() ? static_cast<Index>(field.size()) : 0);
    } else {
        u = parse_vector_literal(text);
    }
    if (u.size() != m)
        throw ParseError("input vector has " + std::to_string(u.size()) + " entries, system has m = " + std::to_string(m));
    return u;
}

inline SolveMode parse_mode(const std::string& s) {
    if (s == "auto") return SolveMode::Auto;
    if (s == "subgradient") return SolveMode::Subgradient;
    if (s == "gradient") return SolveMode::Gradient;
    throw InvalidOptions("mode must be auto, subgradient or gradient");
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline SystemFile load_valid(const RunConfig& cfg) {
    if (cfg.input_path.empty()) throw ParseError("--input is required");
    auto file = io::read_system_file(cfg.input_path);
    require_valid(file.system);
    return file;
}

inline SolveOptions solve_options(const RunConfig& cfg, const BilinearPositiveSystem& sys) {
    SolveOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.tol = cfg.tol;
    opts.step_a = cfg.step;
    opts.window = cfg.window;
    opts.mode = parse_mode(cfg.mode);
    if (!cfg.u0.empty()) opts.u0 = resolve_input(cfg.u0, sys.m());
    return opts;
}

inline json result_document(const std::string& command, const BilinearPositiveSystem& sys, const SolveResult& res) {
    const Objective obj(sys);
    const auto val = obj.evaluate(res.u_star);
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = command;
    doc["u_star"] = io::vector_to_json(res.u_star);
    doc["J_star"] = number_or_null(res.J_star);
    doc["sigma_cl"] = number_or_null(val.sigma_cl);
    doc["control_cost"] = val.control_cost;
    doc["spectral_abscissa"] = val.spectral_abscissa;
    doc["worst_case_disturbance"] =
        val.triplets.empty() ? json::array() : io::vector_to_json(val.triplets.front().v);
    doc["converged"] = res.converged;
    doc["iterations"] = res.iterations;
    doc["mode"] = to_string(res.mode_used);
    json hist = json::array();
    for (const auto& h : res.history) {
        hist.push_back({{"k", h.k}, {"J_best", h.J_best}, {"grad_norm", h.grad_norm}, {"J", h.J},
                        {"u", io::vector_to_json(h.u)}});
    }
    doc["history"] = std::move(hist);
    return doc;
}

inline void emit_document(const RunConfig& cfg, const json& doc, std::ostream& out) {
    if (cfg.output_path.empty()) {
        out << doc.dump(2) << '\n';
        return;
    }
    std::ofstream f(cfg.output_path);
    if (!f) throw ParseError("cannot write '" + cfg.output_path + "'");
    f << doc.dump(2) << '\n';
}

inline std::string vector_text(const Vector& v) {
    std::ostringstream os;
    os.precision(10);
    os << '[';
    for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
    os << ']';
    return os.str();
}

}  // namespace detail

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto file = detail::load_valid(cfg);
    const auto opts = detail::solve_options(cfg, file.system);
    const auto res = solve(file.system, opts);
    detail::emit_document(cfg, detail::result_document("solve", file.system, res), out);
    if (!cfg.output_path.empty())
        out << "u_star = " << detail::vector_text(res.u_star) << "  J_star = " << res.J_star
            << (res.converged ? "" : "  (not converged)") << '\n';
    if (!res.converged) {
        err << "solver did not converge within " << opts.max_iters << " iterations; best iterate written\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

inline int cmd_solve_robust(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto file = detail::load_valid(cfg);
    if (!file.uncertainty) throw ParseError("robust solve requires uncertainty block in the system file");
    const auto opts = detail::solve_options(cfg, file.system);
    const auto robust_sys = robustify(file.system, *file.uncertainty);
    const auto res = solve(robust_sys, opts);

    auto doc = detail::result_document("solve-robust", robust_sys, res);
    doc["robustified_A"] = io::matrix_to_json(robust_sys.A);
    if (cfg.verify_samples > 0) {
        const auto rep =
            worst_case_monotonicity_check(file.system, *file.uncertainty, res.u_star, cfg.verify_samples, cfg.seed);
        nlohmann::json v;
        v["samples"] = rep.samples;
        v["seed"] = cfg.seed;
        v["precondition_ok"] = rep.precondition_ok;
        v["J_worst"] = rep.J_worst;
        v["max_J_sample"] = rep.max_J_sample;
        v["violations"] = rep.violations.size();
        doc["verification"] = std::move(v);
    }
    detail::emit_document(cfg, doc, out);
    if (!cfg.output_path.empty())
        out << "u_star = " << detail::vector_text(res.u_star) << "  J_star = " << res.J_star
            << (res.converged ? "" : "  (not converged)") << '\n';
    if (!res.converged) {
        err << "solver did not converge within " << opts.max_iters << " iterations; best iterate written\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
    const auto file = detail::load_valid(cfg);
    const auto& sys = file.system;
    if (cfg.u.empty()) throw ParseError("--u is required (vector literal or result document)");
    const Vector u = detail::resolve_input(cfg.u, sys.m());
    if (cfg.dt && !(*cfg.dt > 0.0)) throw InvalidOptions("--dt must be > 0");
    if (!(cfg.T > 0.0)) throw InvalidOptions("--T must be > 0");
    const double dt = cfg.dt ? *cfg.dt : default_time_step(closed_loop(sys, u));
    const auto resp = impulse_response(sys, u, cfg.T, dt);

    if (cfg.output_path.empty()) {
        write_impulse_csv(out, resp);
    } else {
        std::ofstream f(cfg.output_path);
        if (!f) throw ParseError("cannot write '" + cfg.output_path + "'");
        write_impulse_csv(f, resp);
        out << "stable=" << (resp.stable ? "true" : "false") << " spectral_abscissa=" << resp.spectral_abscissa
            << " growing=" << (resp.growing ? "true" : "false") << '\n';
    }
    return kExitOk;
}

inline int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
    if (cfg.input_path.empty()) throw ParseError("--input is required");
    const auto file = io::read_system_file(cfg.input_path);
    const auto& sys = file.system;
    const auto violations = validate(sys);
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = "analyze";
    doc["violations"] = violations;
    doc["valid"] = violations.empty();

    out << "valid: " << (violations.empty() ? "yes" : "no") << '\n';
    for (const auto& v : violations) out << "  " << v << '\n';
    if (violations.empty()) {
        const Vector u = cfg.u.empty() ? Vector::Zero(sys.m()) : detail::resolve_input(cfg.u, sys.m());
        const Matrix Acl = closed_loop(sys, u);
        const auto cert = is_hurwitz(Acl);
        const bool connected = is_strongly_connected(sys.A);
        const auto val = Objective(sys).evaluate_closed_loop(Acl, u);

        doc["u"] = io::vector_to_json(u);
        doc["strongly_connected"] = connected;
        doc["stable"] = cert.stable;
        doc["spectral_abscissa"] = cert.spectral_abscissa;
        doc["witness"] = cert.p ? io::vector_to_json(*cert.p) : nlohmann::json(nullptr);
        doc["J"] = detail::number_or_null(val.J);
        doc["sigma_cl"] = detail::number_or_null(val.sigma_cl);
        doc["control_cost"] = val.control_cost;

        out << "strongly_connected: " << (connected ? "true" : "false") << '\n'
            << "stable: " << (cert.stable ? "true" : "false") << '\n'
            << "spectral_abscissa: " << cert.spectral_abscissa << '\n';
        out.precision(10);
        out << "J: " << (val.stable ? val.J : std::numeric_limits<double>::infinity()) << '\n';
        if (val.stable) {
            std::vector<double> omegas;
            for (int i = 0; i < 30; ++i) omegas.push_back(std::pow(10.0, -3.0 + 6.0 * i / 29.0));
            const bool peak = dc_peak_check(sys, u, omegas);
            doc["dc_peak"] = peak;
            doc["worst_case_disturbance"] = io::vector_to_json(val.triplets.front().v);
            out << "sigma_cl: " << val.sigma_cl << '\n' << "dc_peak: " << (peak ? "true" : "false") << '\n';
        }
    }
    if (!cfg.output_path.empty()) {
        std::ofstream f(cfg.output_path);
        if (!f) throw ParseError("cannot write '" + cfg.output_path + "'");
        f << doc.dump(2) << '\n';
    }
    return violations.empty() ? kExitOk : kExitInputError;
}

inline int cmd_example(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
    SystemFile file;
    if (cfg.random) {
        file.system = make_random_positive_system(cfg.n, cfg.m, cfg.q, cfg.density, cfg.seed);
    } else {
        file.system = make_chain_system({cfg.n, cfg.r, cfg.c, cfg.rho});
    }
    if (cfg.unc_c || cfg.beta != 0.0) {
        UncertaintySpec unc{Matrix::Zero(file.system.n(), file.system.n()), Vector::Constant(file.system.m(), cfg.beta)};
        if (cfg.unc_c) unc.A_tilde(0, file.system.n() - 1) = *cfg.unc_c;
        file.uncertainty = std::move(unc);
    }
    if (cfg.emit.empty()) {
        out << io::to_json(file).dump(2) << '\n';
    } else {
        io::write_system_file(cfg.emit, file);
    }
    return kExitOk;
}

inline int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.command == "solve") return cmd_solve(cfg, out, err);
        if (cfg.command == "solve-robust") return cmd_solve_robust(cfg, out, err);
        if (cfg.command == "simulate") return cmd_simulate(cfg, out, err);
        if (cfg.command == "analyze") return cmd_analyze(cfg, out, err);
        if (cfg.command == "example") return cmd_example(cfg, out, err);
        err << "unknown command '" << cfg.command << "'\n";
        return kExitInputError;
    } catch (const InvariantViolation& e) {
        err << e.what() << '\n';
    } catch (const NonMonotoneInputMap& e) {
        err << "error: " << e.what() << '\n';
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitInputError;
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Optimal constant inputs for monotone bilinear positive systems", "monobil"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_io = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input_path, "System description (JSON)");
        sub->add_option("--output", cfg.output_path, "Output file (stdout when omitted)");
    };
    auto add_solver = [&](CLI::App* sub) {
        sub->add_option("--u0", cfg.u0, "Initial input (vector literal or result document)");
        sub->add_option("--max-iters", cfg.max_iters, "Iteration limit");
        sub->add_option("--tol", cfg.tol, "Relative stall tolerance (gradient norm in gradient mode)");
        sub->add_option("--step", cfg.step, "Step scale; 0 picks 1/(1+|g0|)");
        sub->add_option("--mode", cfg.mode, "auto | subgradient | gradient");
        sub->add_option("--window", cfg.window, "Stall window length");
    };

    auto* solve_cmd = app.add_subcommand("solve", "Optimal constant input for the nominal system");
    add_io(solve_cmd);
    add_solver(solve_cmd);

    auto* robust_cmd = app.add_subcommand("solve-robust", "Optimal constant input under interval uncertainty");
    add_io(robust_cmd);
    add_solver(robust_cmd);
    robust_cmd->add_option("--verify-samples", cfg.verify_samples, "Sampled worst-case ordering check");
    robust_cmd->add_option("--seed", cfg.seed, "Sampling seed");

    auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop impulse response as CSV");
    add_io(sim_cmd);
    sim_cmd->add_option("--u", cfg.u, "Input (vector literal or result document)");
    sim_cmd->add_option("--T", cfg.T, "Horizon");
    sim_cmd->add_option("--dt", cfg.dt, "Time step");

    auto* analyze_cmd = app.add_subcommand("analyze", "Structural report and J at a given input");
    add_io(analyze_cmd);
    analyze_cmd->add_option("--u", cfg.u, "Input (vector literal or result document)");

    auto* example_cmd = app.add_subcommand("example", "Emit a model system description");
    example_cmd->add_flag("--chain", "Path-graph mutation model (default)");
    example_cmd->add_flag("--random", cfg.random, "Random positive system");
    example_cmd->add_option("--n", cfg.n, "State dimension");
    example_cmd->add_option("--r", cfg.r, "Replication rate");
    example_cmd->add_option("--c", cfg.c, "Back-edge weight");
    example_cmd->add_option("--rho", cfg.rho, "Control penalty");
    example_cmd->add_option("--unc-c", cfg.unc_c, "Uncertainty bound on the back edge");
    example_cmd->add_option("--beta", cfg.beta, "Input uncertainty bound for every input");
    example_cmd->add_option("--m", cfg.m, "Inputs (random model)");
    example_cmd->add_option("--q", cfg.q, "Disturbances (random model)");
    example_cmd->add_option("--density", cfg.density, "Off-diagonal density (random model)");
    example_cmd->add_option("--seed", cfg.seed, "Seed (random model)");
    example_cmd->add_option("--emit", cfg.emit, "Write the description to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }
    for (const auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
    return dispatch(cfg, out, err);
}

}  // namespace monobil::cli
