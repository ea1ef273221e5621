#pragma once

#include <numbers>
#include <optional>

#include "nlb/config.hpp"
#include "nlb/heat.hpp"
#include "nlb/ledger.hpp"
#include "nlb/momentum.hpp"

namespace nlb {

/// Concrete initial and boundary data for one run, materialized from a
/// scenario preset or from snapshot files.
struct Scenario {
    ScalarField theta0;
    ScalarField theta0_pair;  // second member for twin experiments
    BoundaryTrace theta_b;
    std::optional<ScalarField> g;
    std::vector<double> c0;   // padded to basis size
    int declared_level = 1;   // compatibility level the data is built to satisfy

    explicit Scenario(const Mesh& m) : theta0(m), theta0_pair(m), theta_b(m) {}
};

inline Scenario materialize_scenario(const RunConfig& cfg, const Mesh& m) {
    Scenario sc(m);
    const double lam = cfg.physics.lambda;
    const double tb = cfg.scenario_t_b;
    const double amp = cfg.scenario_amplitude;
    constexpr double pi = std::numbers::pi;

    if (cfg.scenario_potential != "none") {
        ScalarField g = make_potential(m, potential_from_name(cfg.scenario_potential));
        PotentialReport rep = validate_potential(g);
        if (!rep.pass)
            throw ConfigError("scenario.potential", "preset fails the admissibility check");
        sc.g = std::move(g);
    }

    auto decay_like = [&](bool with_bump) {
        sc.theta_b = BoundaryTrace::sample(m, [&](double x, double y) {
            return tb + amp * (x - y);
        });
        ScalarField e = harmonic_extension(m, sc.theta_b);
        sc.theta0 = e;
        if (with_bump) {
            ScalarField bump(m, [&](double x, double y) {
                return amp * std::sin(pi * x) * std::sin(pi * y);
            });
            sc.theta0 += bump;
        }
        // constant shift solving s(1+lambda) + lambda*avg = 0, which zeroes the
        // trace residual of the non-local condition exactly
        sc.theta0.shift(-lam * avint(sc.theta0) / (1.0 + lam));
    };

    if (cfg.scenario_id == "equilibrium") {
        sc.theta_b = BoundaryTrace::constant(m, tb);
        sc.theta0 = ScalarField::constant(m, tb / (1.0 + lam));
    } else if (cfg.scenario_id == "thermal-decay") {
        decay_like(true);
    } else if (cfg.scenario_id == "buoyant-cell") {
        sc.theta_b = BoundaryTrace::sample(m, [&](double x, double y) {
            return tb + amp * (x * x - y * y);
        });
        sc.theta0 = harmonic_extension(m, sc.theta_b);
        sc.theta0.shift(-lam * avint(sc.theta0) / (1.0 + lam));
    } else if (cfg.scenario_id == "uniqueness-pair") {
        decay_like(true);
        sc.theta0_pair = sc.theta0;
        ScalarField pert(m, [&](double x, double y) {
            return cfg.scenario_epsilon * std::sin(2.0 * pi * x) * std::sin(pi * y);
        });
        sc.theta0_pair += pert;
    } else if (cfg.scenario_id == "from-files") {
        ScalarField t0 = read_scalar_snapshot(cfg.theta0_file);
        if (!(t0.mesh() == m)) throw ConfigError("scenario.theta0_file", "mesh mismatch");
        ScalarField tbf = read_scalar_snapshot(cfg.theta_b_file);
        if (!(tbf.mesh() == m)) throw ConfigError("scenario.theta_b_file", "mesh mismatch");
        sc.theta0 = std::move(t0);
        sc.theta_b = tbf.trace();
    } else {
        throw ConfigError("scenario.id", "unknown scenario '" + cfg.scenario_id + "'");
    }

    if (cfg.scenario_id != "uniqueness-pair") sc.theta0_pair = sc.theta0;
    sc.c0 = cfg.c0;
    sc.c0.resize(static_cast<std::size_t>(cfg.basis_n), 0.0);
    return sc;
}

// ---------------------------------------------------------------------------
// Compatibility checks of the initial data against the admissibility levels
// of the well-posedness theory: level 1 (weak), level 2 (strong, adds
// no-slip), level 3 (classical, adds the boundary balance of the heat
// equation and the gradient-compatibility of the initial force).

struct CompatCheck {
    std::string name;
    double residual = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct CompatReport {
    int level = 1;
    std::vector<CompatCheck> checks;
    bool all_pass = true;

    void add(const std::string& name, double residual, double tol) {
        CompatCheck c{name, residual, tol, residual <= tol};
        all_pass = all_pass && c.pass;
        checks.push_back(std::move(c));
    }
};

/// Circulation of a face field along the closed cell-center loop adjacent to
/// the boundary. Exactly zero (telescoping) for discrete gradients, which is
/// the discrete reading of "the trace is compatible with some -grad Pi".
inline double boundary_circulation(const VectorField& w, double* scale = nullptr) {
    const Mesh& m = w.mesh();
    const int n = m.nx();
    KahanSum s;
    double mag = 0.0;
    for (int i = 1; i < n; ++i) {
        s.add(w.u(i, 0));
        s.add(-w.u(i, n - 1));
        mag += std::abs(w.u(i, 0)) + std::abs(w.u(i, n - 1));
    }
    for (int j = 1; j < n; ++j) {
        s.add(w.v(n - 1, j));
        s.add(-w.v(0, j));
        mag += std::abs(w.v(n - 1, j)) + std::abs(w.v(0, j));
    }
    if (scale) *scale = mag * m.h();
    return s.value() * m.h();
}

inline CompatReport compat_report(const ScalarField& theta0, const BoundaryTrace& theta_b,
                                  const VectorField& v0, const ScalarField* g, const Params& p,
                                  int level, const StokesBasis* basis = nullptr) {
    const Mesh& m = theta0.mesh();
    CompatReport rep;
    rep.level = level;

    double vmax = v0.max_abs();
    rep.add("theta trace residual", boundary_residual(theta0, theta_b, p.lambda),
            1e-10 * (1.0 + theta_b.max_abs()));
    rep.add("velocity divergence", max_abs_div(v0), 1e-9 * (1.0 + vmax / m.h()));
    rep.add("velocity normal trace", v0.max_normal_trace(), 1e-12 * (1.0 + vmax));
    if (level < 2) return rep;

    double span = 0.0;
    if (vmax > 0.0) {
        if (!basis) throw StructuralError("compat_report: nonzero velocity needs a basis");
        GalerkinState s = project(v0, *basis);
        VectorField d = v0;
        d.add_scaled(reconstruct(s, *basis), -1.0);
        span = std::sqrt(inner(d, d)) / std::max(std::sqrt(inner(v0, v0)), 1e-300);
    }
    rep.add("no-slip span residual", span, 1e-10);
    if (level < 3) return rep;

    // boundary heat balance: kappa * lap theta0 + (lambda kappa / |Omega|) *
    // (outward flux of theta0) evaluated on the boundary ring of cells
    ScalarField lap = laplace_dirichlet(theta0);
    KahanSum fs;
    const auto& tr = theta0.trace();
    const int n = m.nx();
    for (int i = 0; i < n; ++i) {
        fs.add(2.0 * (tr.bottom[static_cast<std::size_t>(i)] - theta0(i, 0)));
        fs.add(2.0 * (tr.top[static_cast<std::size_t>(i)] - theta0(i, n - 1)));
    }
    for (int j = 0; j < n; ++j) {
        fs.add(2.0 * (tr.left[static_cast<std::size_t>(j)] - theta0(0, j)));
        fs.add(2.0 * (tr.right[static_cast<std::size_t>(j)] - theta0(n - 1, j)));
    }
    double flux = fs.value();  // (h/2)-difference quotients times face length h
    double worst = 0.0, ring_scale = 0.0;
    auto visit = [&](int i, int j) {
        double r = p.kappa * lap(i, j) + p.lambda * p.kappa * flux;
        worst = std::max(worst, std::abs(r));
        ring_scale = std::max(ring_scale, std::abs(lap(i, j)));
    };
    for (int i = 0; i < n; ++i) {
        visit(i, 0);
        visit(i, n - 1);
    }
    for (int j = 1; j < n - 1; ++j) {
        visit(0, j);
        visit(n - 1, j);
    }
    rep.add("boundary heat balance", worst, 1e-8 * p.kappa * (1.0 + ring_scale));

    // gradient compatibility of the initial force -mu lap v0 + theta0 grad G:
    // its circulation along the boundary-adjacent loop must vanish
    VectorField w(m);
    if (g) w = buoyancy_field(theta0, grad(*g));
    if (vmax > 0.0) w.add_scaled(laplace_noslip(v0), -p.mu);
    double cscale = 0.0;
    double circ = std::abs(boundary_circulation(w, &cscale));
    rep.add("force circulation", circ, 1e-10 * (1.0 + cscale));
    return rep;
}

// ---------------------------------------------------------------------------
// Coupled orchestration: Lie splitting between the temperature and the
// Galerkin velocity, with per-step module ledgers and the coupled energy
// ledger sampled at the output cadence.

struct RunResult {
    std::vector<LedgerRow> ledger;
    std::vector<HeatRow> heat_rows;                  // per step, row 0 at t = 0
    std::vector<std::vector<double>> momentum_rows;  // per step: t, c..., KE, dissipation
    std::optional<HeatState> heat;
    MomentumState momentum;
    std::optional<ScalarField> final_theta;
    std::optional<VectorField> final_v;
    std::optional<CompatReport> compat;
    std::vector<double> snap_times;
    std::vector<ScalarField> theta_snaps;
    std::vector<VectorField> v_snaps;
    double boundary_residual_max = 0.0;
    std::string error;
};

/// Advances the coupled system to t_end, filling `out` progressively so that
/// a sub-solver abort leaves every completed row in place for flushing.
inline void run_coupled(const RunConfig& cfg, RunResult& out, bool keep_fields = false) {
    validate_config(cfg);
    Mesh m(cfg.nx);
    const Params& p = cfg.physics;
    Scenario sc = materialize_scenario(cfg, m);
    const bool heat_first = cfg.splitting == "heat-first";

    std::optional<StokesBasis> basis;
    std::optional<ConvectionTensor> tensor;
    std::optional<VectorField> grad_g;
    if (sc.g) grad_g = grad(*sc.g);
    if (cfg.basis_n > 0) {
        basis.emplace(build_basis(m, cfg.basis_n,
                                  cfg.basis_cache.empty() ? std::filesystem::path{}
                                                          : std::filesystem::path(cfg.basis_cache)));
        tensor.emplace(build_tensor(*basis));
    }

    out.heat.emplace(init_heat(sc.theta0, sc.theta_b, p, sc.g ? &*sc.g : nullptr));
    HeatState& heat = *out.heat;
    MomentumState& mom = out.momentum;
    mom.s.c = sc.c0;
    VectorField v = basis ? reconstruct(mom.s, *basis) : VectorField(m);

    out.compat = compat_report(sc.theta0, sc.theta_b, v, sc.g ? &*sc.g : nullptr, p, 3,
                               basis ? &*basis : nullptr);

    const long steps = cfg.steps();
    const double dt = cfg.dt;
    const int n_coef = cfg.basis_n;

    auto momentum_row = [&]() {
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(n_coef) + 3);
        row.push_back(mom.s.t);
        for (double c : mom.s.c) row.push_back(c);
        row.push_back(kinetic_energy(mom.s));
        row.push_back(mom.dissipation_cum);
        return row;
    };

    auto ledger_row = [&]() {
        LedgerRow r;
        r.t = heat.t;
        r.kinetic_energy = kinetic_energy(mom.s);
        r.viscous_dissipation = mom.dissipation_cum;
        r.buoyancy_work = mom.buoyancy_work_cum;
        r.heat_quadratic = 0.5 / (1.0 + p.lambda) * inner(heat.z, heat.z);
        r.thermal_dissipation = heat.dissipation_cum;
        r.boundary_work = heat.boundary_work_cum;
        r.mean_theta = (avint(heat.z) + avint(heat.problem->lift_bc)) / (1.0 + p.lambda);
        if (!out.ledger.empty()) {
            const LedgerRow& prev = out.ledger.back();
            r.mean_theta_dq = (r.mean_theta - prev.mean_theta) / (r.t - prev.t);
        }
        return r;
    };

    auto record_output = [&]() {
        out.ledger.push_back(ledger_row());
        if (keep_fields) {
            out.snap_times.push_back(heat.t);
            out.theta_snaps.push_back(reconstruct_theta(heat));
            out.v_snaps.push_back(v);
        }
    };

    HeatRow hr = monitor_row(heat);
    out.heat_rows.push_back(hr);
    out.boundary_residual_max = hr.boundary_residual;
    if (n_coef > 0) out.momentum_rows.push_back(momentum_row());
    record_output();

    auto substep_momentum = [&]() {
        std::vector<double> load(static_cast<std::size_t>(n_coef), 0.0);
        if (grad_g) load = buoyancy_load(reconstruct_theta(heat), *grad_g, *basis);
        momentum_step(mom, *tensor, basis->eigenvalues, load, p.mu, dt);
        v = reconstruct(mom.s, *basis);
    };

    for (long k = 1; k <= steps; ++k) {
        if (heat_first) {
            heat_step(heat, v, dt);
            if (n_coef > 0) substep_momentum();
        } else {
            if (n_coef > 0) substep_momentum();
            heat_step(heat, v, dt);
        }
        hr = monitor_row(heat);
        out.heat_rows.push_back(hr);
        out.boundary_residual_max = std::max(out.boundary_residual_max, hr.boundary_residual);
        if (n_coef > 0) out.momentum_rows.push_back(momentum_row());
        if (k % cfg.output_every == 0 || k == steps) record_output();
    }

    out.final_theta = reconstruct_theta(heat);
    out.final_v = v;
}

inline std::string heat_rows_to_csv(const std::vector<HeatRow>& rows) {
    std::string s = "t,q,boundary_residual,min_theta,max_theta,dissipation,advection_work\n";
    for (const HeatRow& r : rows) {
        s += csv_line({r.t, r.q, r.boundary_residual, r.min_theta, r.max_theta, r.dissipation,
                       r.advection_work});
        s += '\n';
    }
    return s;
}

inline std::string momentum_rows_to_csv(const std::vector<std::vector<double>>& rows, int n) {
    std::string s = "t";
    for (int k = 1; k <= n; ++k) s += ",c_" + std::to_string(k);
    s += ",kinetic_energy,dissipation\n";
    for (const auto& r : rows) {
        s += csv_line(r);
        s += '\n';
    }
    return s;
}

inline nlohmann::json compat_to_json(const CompatReport& rep) {
    nlohmann::json j;
    j["level"] = rep.level;
    j["all_pass"] = rep.all_pass;
    j["checks"] = nlohmann::json::array();
    for (const CompatCheck& c : rep.checks) {
        nlohmann::json e;
        e["name"] = c.name;
        e["residual"] = c.residual;
        e["tol"] = c.tol;
        e["status"] = c.pass ? "pass" : "warn";
        j["checks"].push_back(e);
    }
    return j;
}

inline void write_artifacts(const RunConfig& cfg, const RunResult& res,
                            const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file_bytes(dir / "config.json", echo_config(cfg));
    write_file_bytes(dir / "ledger.csv", ledger_to_csv(res.ledger));
    write_file_bytes(dir / "heat.csv", heat_rows_to_csv(res.heat_rows));
    if (cfg.basis_n > 0)
        write_file_bytes(dir / "momentum.csv",
                         momentum_rows_to_csv(res.momentum_rows, cfg.basis_n));

    if (!res.theta_snaps.empty()) {
        fs::create_directories(dir / "fields");
        char name[64];
        for (std::size_t k = 0; k < res.theta_snaps.size(); ++k) {
            std::snprintf(name, sizeof name, "theta_%06zu.field", k);
            write_scalar_snapshot(dir / "fields" / name, res.theta_snaps[k], res.snap_times[k],
                                  Encoding::Raw64le, "theta");
            if (k < res.v_snaps.size()) {
                std::snprintf(name, sizeof name, "velocity_%06zu.field", k);
                write_vector_snapshot(dir / "fields" / name, res.v_snaps[k], res.snap_times[k],
                                      Encoding::Raw64le, "velocity");
            }
        }
    }

    nlohmann::json rep;
    rep["status"] = res.error.empty() ? "ok" : "aborted";
    rep["error"] = res.error;
    rep["scenario"] = cfg.scenario_id;
    rep["steps_completed"] =
        res.heat_rows.empty() ? 0 : static_cast<long>(res.heat_rows.size()) - 1;
    rep["boundary_residual_max"] = res.boundary_residual_max;
    if (!res.ledger.empty()) {
        const LedgerRow& last = res.ledger.back();
        rep["final"]["t"] = last.t;
        rep["final"]["kinetic_energy"] = last.kinetic_energy;
        rep["final"]["mean_theta"] = last.mean_theta;
        rep["final"]["heat_quadratic"] = last.heat_quadratic;
        LedgerAudit audit = audit_ledger(res.ledger, cfg.physics.lambda, cfg.dt);
        rep["ledger_audit"]["rhs0"] = audit.rhs0;
        rep["ledger_audit"]["mech_defect_max"] = audit.mech_defect_max;
        rep["ledger_audit"]["thermal_defect_max"] = audit.thermal_defect_max;
        rep["ledger_audit"]["mech_c"] = audit.mech_c;
        rep["ledger_audit"]["thermal_c"] = audit.thermal_c;
    }
    if (res.compat) rep["compatibility"] = compat_to_json(*res.compat);
    write_file_bytes(dir / "report.json", rep.dump(2) + "\n");
}

/// Runs and, when an output directory is configured, writes the artifact set.
/// A numerical abort flushes everything recorded so far before rethrowing.
inline RunResult execute_run(const RunConfig& cfg) {
    RunResult res;
    bool keep_fields = !cfg.out_dir.empty() && cfg.out_fields;
    try {
        run_coupled(cfg, res, keep_fields);
    } catch (const std::exception& e) {
        res.error = e.what();
        if (!cfg.out_dir.empty()) write_artifacts(cfg, res, cfg.out_dir);
        throw;
    }
    if (!cfg.out_dir.empty()) write_artifacts(cfg, res, cfg.out_dir);
    return res;
}

// ---------------------------------------------------------------------------
// Time-regularity diagnostic: difference quotients of the mean temperature
// and of Theta itself along the output grid, and their stability under dt
// halving (the discrete shadow of the W^{1,infinity} bound on the mean).

struct DtDiagnostic {
    double sup_mean_quotient = 0.0;
    double sup_l2_quotient = 0.0;
    std::size_t rows = 0;
};

inline DtDiagnostic dt_theta_diagnostic(const std::vector<LedgerRow>& rows,
                                        const std::vector<ScalarField>* snaps = nullptr) {
    if (rows.size() < 3)
        throw ArtifactError("dt diagnostic needs at least 3 output times, got " +
                            std::to_string(rows.size()));
    double spacing = rows[1].t - rows[0].t;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        double d = rows[k].t - rows[k - 1].t;
        if (std::abs(d - spacing) > 1e-9 * std::max(spacing, 1.0))
            throw ArtifactError("dt diagnostic needs uniform output spacing");
    }
    DtDiagnostic out;
    out.rows = rows.size();
    for (std::size_t k = 1; k < rows.size(); ++k)
        out.sup_mean_quotient = std::max(out.sup_mean_quotient, std::abs(rows[k].mean_theta_dq));
    if (snaps && snaps->size() == rows.size()) {
        for (std::size_t k = 1; k < snaps->size(); ++k) {
            ScalarField d = (*snaps)[k];
            d.add_scaled((*snaps)[k - 1], -1.0);
            out.sup_l2_quotient =
                std::max(out.sup_l2_quotient, std::sqrt(inner(d, d)) / spacing);
        }
    }
    return out;
}

struct DtStudyLevel {
    double dt = 0.0;
    double sup_mean_quotient = 0.0;
    double sup_l2_quotient = 0.0;
};

struct DtStudyReport {
    std::vector<DtStudyLevel> levels;
    bool stable_20 = false;  // last two sup mean quotients agree within 20%
};

inline DtStudyReport dt_study(const RunConfig& base, int halvings) {
    if (halvings < 1) throw ConfigError("dt-study", "needs at least one halving");
    DtStudyReport rep;
    for (int j = 0; j <= halvings; ++j) {
        RunConfig cfg = base;
        cfg.out_dir.clear();
        cfg.dt = base.dt / static_cast<double>(1L << j);
        cfg.output_every = base.output_every * (1L << j);
        RunResult res;
        run_coupled(cfg, res, true);
        DtDiagnostic d = dt_theta_diagnostic(res.ledger, &res.theta_snaps);
        rep.levels.push_back({cfg.dt, d.sup_mean_quotient, d.sup_l2_quotient});
    }
    double a = rep.levels[rep.levels.size() - 2].sup_mean_quotient;
    double b = rep.levels.back().sup_mean_quotient;
    rep.stable_20 = std::abs(a - b) <= 0.2 * std::abs(b) + 1e-12;
    return rep;
}

// ---------------------------------------------------------------------------
// Galerkin refinement study: the same scenario at increasing mode counts,
// compared pairwise at the final time.

struct ConvergenceReport {
    std::vector<int> n_list;
    std::vector<double> v_diff;      // ||v_{N_i} - v_{N_{i+1}}|| at t_end
    std::vector<double> theta_diff;  // same for the temperature
    bool monotone = true;
};

inline ConvergenceReport galerkin_convergence(const RunConfig& base,
                                              const std::vector<int>& n_list) {
    if (n_list.size() < 2) throw ConfigError("converge", "needs at least two mode counts");
    for (std::size_t k = 1; k < n_list.size(); ++k)
        if (n_list[k] < n_list[k - 1]) throw ConfigError("converge", "mode counts must not decrease");

    ConvergenceReport rep;
    rep.n_list = n_list;
    std::vector<ScalarField> thetas;
    std::vector<VectorField> vs;
    for (int n : n_list) {
        RunConfig cfg = base;
        cfg.out_dir.clear();
        cfg.basis_n = n;
        RunResult res;
        run_coupled(cfg, res);
        thetas.push_back(*res.final_theta);
        vs.push_back(*res.final_v);
    }
    for (std::size_t k = 1; k < vs.size(); ++k) {
        VectorField dv = vs[k];
        dv.add_scaled(vs[k - 1], -1.0);
        ScalarField dth = thetas[k];
        dth.add_scaled(thetas[k - 1], -1.0);
        rep.v_diff.push_back(std::sqrt(inner(dv, dv)));
        rep.theta_diff.push_back(std::sqrt(inner(dth, dth)));
    }
    for (std::size_t k = 1; k < rep.v_diff.size(); ++k) {
        if (rep.v_diff[k] > rep.v_diff[k - 1]) rep.monotone = false;
        if (rep.theta_diff[k] > rep.theta_diff[k - 1]) rep.monotone = false;
    }
    return rep;
}

/// Twin-trajectory dissipation experiment wired to a config: the velocity is
/// frozen at the initial coefficients, matching the sub-problem whose
/// uniqueness the weighted norm certifies.
inline UniquenessReport run_uniqueness(const RunConfig& cfg) {
    validate_config(cfg);
    Mesh m(cfg.nx);
    Scenario sc = materialize_scenario(cfg, m);
    VectorField v(m);
    if (cfg.basis_n > 0) {
        StokesBasis basis = build_basis(m, cfg.basis_n,
                                        cfg.basis_cache.empty()
                                            ? std::filesystem::path{}
                                            : std::filesystem::path(cfg.basis_cache));
        GalerkinState s{sc.c0, 0.0};
        v = reconstruct(s, basis);
    }
    return uniqueness_experiment(sc.theta0, sc.theta0_pair, sc.theta_b, v, cfg.t_end, cfg.dt,
                                 cfg.physics, sc.g ? &*sc.g : nullptr);
}

}  // namespace nlb
