#pragma once

#include <map>
#include <memory>
#include <optional>

#include <Eigen/SparseLU>

#include "nlb/nonlocal.hpp"
#include "nlb/poisson.hpp"

namespace nlb {

/// Crank-Nicolson Helmholtz solve H = I/dt + (kappa/2) * (-lap_h) wrapped by
/// the rank-one mass correction: the stepped operator is H - c * 1 q^T with
/// c = lambda / ((1+lambda) dt) and q^T x = avint(x). Sherman-Morrison keeps
/// the factorized core symmetric positive definite.
class MassHelmholtz {
public:
    MassHelmholtz(const Mesh& m, double kappa, double lambda, double dt)
        : mesh_(m), dt_(dt), c_(lambda / ((1.0 + lambda) * dt)) {
        Eigen::SparseMatrix<double> L = neg_laplacian_matrix(m);
        Eigen::SparseMatrix<double> I(L.rows(), L.cols());
        I.setIdentity();
        Eigen::SparseMatrix<double> H = I * (1.0 / dt) + L * (0.5 * kappa);
        llt_.compute(H);
        if (llt_.info() != Eigen::Success)
            throw NumericalError("heat step factorization failed");
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(L.rows());
        s_ = llt_.solve(ones);
        double avs = s_.sum() * m.cell_weight();
        denom_ = 1.0 - c_ * avs;
        // provably >= 1/(1+lambda); anything near zero means a broken setup
        if (!(denom_ > 1e-12))
            throw NumericalError("rank-one correction degenerate, denominator " +
                                 std::to_string(denom_));
    }

    /// Solves (H - c 1 q^T) x = rhs.
    ScalarField solve(const ScalarField& rhs) const {
        require_same_mesh(mesh_, rhs.mesh(), "MassHelmholtz::solve");
        Eigen::VectorXd b(static_cast<Eigen::Index>(rhs.values().size()));
        for (std::size_t k = 0; k < rhs.values().size(); ++k)
            b[static_cast<Eigen::Index>(k)] = rhs.values()[k];
        Eigen::VectorXd y = llt_.solve(b);
        double avy = y.sum() * mesh_.cell_weight();
        double beta = c_ * avy / denom_;
        ScalarField out(mesh_);
        for (std::size_t k = 0; k < out.values().size(); ++k)
            out.values()[k] = y[static_cast<Eigen::Index>(k)] + beta * s_[static_cast<Eigen::Index>(k)];
        return out;
    }

    double dt() const { return dt_; }

private:
    Mesh mesh_;
    double dt_;
    double c_;
    double denom_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    Eigen::VectorXd s_;
};

/// Immutable problem data for one temperature trajectory plus a per-dt solver
/// cache. A problem instance is owned by a single trajectory; concurrent
/// trajectories each build their own (construction is cheap next to stepping).
struct HeatProblem {
    Mesh mesh;
    Params params;
    BoundaryTrace theta_b;
    ScalarField lift_bc;   // harmonic extension of theta_b
    ScalarField lift_adv;  // lift_bc + a * G: the advected lift
    double compat_residual = 0.0;

    HeatProblem(const Mesh& m, const Params& p, const BoundaryTrace& tb)
        : mesh(m), params(p), theta_b(tb), lift_bc(m), lift_adv(m) {}

    const MassHelmholtz& solver_for(double dt) {
        auto it = solvers_.find(dt);
        if (it == solvers_.end())
            it = solvers_.emplace(dt, std::make_unique<MassHelmholtz>(mesh, params.kappa,
                                                                      params.lambda, dt)).first;
        return *it->second;
    }

private:
    std::map<double, std::unique_ptr<MassHelmholtz>> solvers_;
};

/// Running extrema of the reconstructed temperature along a trajectory.
struct ExtremumMonitor {
    double min_theta = std::numeric_limits<double>::infinity();
    double max_theta = -std::numeric_limits<double>::infinity();

    void update(const ScalarField& theta) {
        double mn, mx;
        theta.min_max(mn, mx);
        min_theta = std::min(min_theta, mn);
        max_theta = std::max(max_theta, mx);
    }
};

/// Temperature trajectory state in the lifted variable Z = Theta +
/// lambda*avint(Theta) - lift_bc, which carries homogeneous Dirichlet data.
struct HeatState {
    std::shared_ptr<HeatProblem> problem;
    ScalarField z;
    double t = 0.0;
    long step_index = 0;

    // AB-2 history of the advection term and of the lift flux
    std::optional<ScalarField> adv_prev;
    std::optional<VectorField> liftflux_prev;

    // scheme-flux accumulators feeding the energy ledger
    double dissipation_cum = 0.0;    // kappa * integral of |grad Z|^2
    double boundary_work_cum = 0.0;  // integral of (lift flux) . grad Z

    ExtremumMonitor extrema;

    explicit HeatState(std::shared_ptr<HeatProblem> pb)
        : problem(std::move(pb)), z(problem->mesh) {}
};

/// Theta = V - (lambda/(1+lambda)) avint(V) with V = Z + lift_bc; the wall
/// trace then satisfies the non-local condition by construction.
inline ScalarField reconstruct_theta(const HeatState& s) {
    ScalarField v = s.z;
    v += s.problem->lift_bc;
    return apply_mass(v, s.problem->params.lambda);
}

/// Largest wall residual of theta + lambda*avint(theta) - theta_B.
inline double boundary_residual(const ScalarField& theta, const BoundaryTrace& theta_b,
                                double lambda) {
    double m = lambda * avint(theta);
    double r = 0.0;
    const auto& tr = theta.trace();
    for (std::size_t k = 0; k < tr.bottom.size(); ++k) {
        r = std::max(r, std::abs(tr.bottom[k] + m - theta_b.bottom[k]));
        r = std::max(r, std::abs(tr.top[k] + m - theta_b.top[k]));
    }
    for (std::size_t k = 0; k < tr.left.size(); ++k) {
        r = std::max(r, std::abs(tr.left[k] + m - theta_b.left[k]));
        r = std::max(r, std::abs(tr.right[k] + m - theta_b.right[k]));
    }
    return r;
}

/// Sets up a trajectory: harmonic lift of theta_B, initial Z, compatibility
/// residual of the initial data (recorded, never fatal: the weak theory
/// tolerates incompatible data). G enters only through the advected lift
/// lift_bc + a*G and may be omitted when a = 0.
inline HeatState init_heat(const ScalarField& theta_0, const BoundaryTrace& theta_b,
                           const Params& params, const ScalarField* g = nullptr) {
    params.validate();
    const Mesh& m = theta_0.mesh();
    if (!theta_0.all_finite()) throw NumericalError("init_heat: non-finite initial data");
    auto pb = std::make_shared<HeatProblem>(m, params, theta_b);
    pb->lift_bc = harmonic_extension(m, theta_b);
    pb->lift_adv = pb->lift_bc;
    if (params.a != 0.0) {
        if (!g) throw StructuralError("init_heat: a != 0 requires the potential G");
        require_same_mesh(m, g->mesh(), "init_heat");
        pb->lift_adv.add_scaled(*g, params.a);
    }
    pb->compat_residual = boundary_residual(theta_0, theta_b, params.lambda);

    HeatState s(pb);
    double m0 = avint(theta_0);
    s.z = theta_0;
    s.z.shift(params.lambda * m0);
    s.z.add_scaled(pb->lift_bc, -1.0);
    // Z carries homogeneous data by definition; the compatibility defect of
    // the supplied trace is recorded in compat_residual above.
    s.z.trace() = BoundaryTrace(m);
    s.extrema.update(reconstruct_theta(s));
    return s;
}

/// One IMEX step: Adams-Bashforth-2 advection of Z + lift_adv (forward-Euler
/// bootstrap), Crank-Nicolson diffusion, rank-one mass handled in closed form.
/// Advances the state in place.
inline void heat_step(HeatState& s, const VectorField& v, double dt) {
    HeatProblem& pb = *s.problem;
    require_same_mesh(pb.mesh, v.mesh(), "heat_step");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
    const double kappa = pb.params.kappa;
    const double lambda = pb.params.lambda;

    double vmax = v.max_abs();
    if (vmax * dt / pb.mesh.h() > 1.0 + 1e-12)
        throw NumericalError("advective CFL violated: max|v| dt / h = " +
                             std::to_string(vmax * dt / pb.mesh.h()) +
                             ", admissible dt <= " + std::to_string(pb.mesh.h() / vmax));

    ScalarField w = s.z;
    w += pb.lift_adv;
    VectorField flux = scalar_flux(v, w);
    ScalarField adv = div(flux);
    VectorField liftflux = scalar_flux(v, pb.lift_adv);

    ScalarField adv_eff = adv;
    VectorField liftflux_eff = liftflux;
    if (s.adv_prev) {
        adv_eff.scale(1.5);
        adv_eff.add_scaled(*s.adv_prev, -0.5);
        liftflux_eff.scale(1.5);
        liftflux_eff.add_scaled(*s.liftflux_prev, -0.5);
    }

    // rhs = M Z / dt + (kappa/2) lap Z - advection
    ScalarField rhs = apply_mass(s.z, lambda);
    rhs.scale(1.0 / dt);
    rhs.add_scaled(laplace_dirichlet_hom(s.z), 0.5 * kappa);
    rhs.add_scaled(adv_eff, -1.0);

    const MassHelmholtz& hs = pb.solver_for(dt);
    ScalarField znew = hs.solve(rhs);
    if (!znew.all_finite()) throw NumericalError("heat_step: non-finite solution");

    ScalarField zmid = s.z;
    zmid += znew;
    zmid.scale(0.5);
    s.dissipation_cum += dt * kappa * grad_energy_hom(zmid);
    s.boundary_work_cum += dt * flux_gradient_pairing(liftflux_eff, zmid);

    s.adv_prev = std::move(adv);
    s.liftflux_prev = std::move(liftflux);
    s.z = std::move(znew);
    s.t += dt;
    s.step_index += 1;
    s.extrema.update(reconstruct_theta(s));
}

/// Weighted norm of the lifted variable, Q = <M Z, Z>: the quantity that
/// contracts along the difference of two trajectories sharing a velocity.
inline double q_of_state(const HeatState& s) { return q_form(s.z, s.problem->params.lambda); }

struct HeatRow {
    double t;
    double q;
    double boundary_residual;
    double min_theta;
    double max_theta;
    double dissipation;
    double advection_work;
};

inline HeatRow monitor_row(const HeatState& s) {
    ScalarField theta = reconstruct_theta(s);
    HeatRow r;
    r.t = s.t;
    r.q = q_of_state(s);
    r.boundary_residual = boundary_residual(theta, s.problem->theta_b, s.problem->params.lambda);
    double mn, mx;
    theta.min_max(mn, mx);
    r.min_theta = mn;
    r.max_theta = mx;
    r.dissipation = s.dissipation_cum;
    r.advection_work = s.boundary_work_cum;
    return r;
}

/// Linear implicit-midpoint stepper for a fixed advecting velocity: both the
/// advection and the diffusion of Z sit at the half step, so the weighted norm
/// of a trajectory difference dissipates with a definite sign at every step
/// (the skew advection term cancels exactly at matched time levels).
class MidpointHeatStepper {
public:
    MidpointHeatStepper(const Mesh& m, const Params& p, const VectorField& v,
                        const ScalarField& lift_adv, double dt)
        : mesh_(m), dt_(dt), lambda_(p.lambda), c_(p.lambda / ((1.0 + p.lambda) * dt)) {
        require_same_mesh(m, v.mesh(), "MidpointHeatStepper");
        const int n = m.nx();
        const double ih = 1.0 / m.h();
        std::vector<Eigen::Triplet<double>> trip;
        auto idx = [&](int i, int j) { return static_cast<int>(m.cell_index(i, j)); };
        // advection half: 0.5 * div(v zbar) at interior faces (walls carry v=0)
        for (int j = 0; j < n; ++j)
            for (int i = 1; i < n; ++i) {
                double a = 0.5 * v.u(i, j) * 0.5 * ih;
                trip.emplace_back(idx(i - 1, j), idx(i - 1, j), a);
                trip.emplace_back(idx(i - 1, j), idx(i, j), a);
                trip.emplace_back(idx(i, j), idx(i - 1, j), -a);
                trip.emplace_back(idx(i, j), idx(i, j), -a);
            }
        for (int i = 0; i < n; ++i)
            for (int j = 1; j < n; ++j) {
                double a = 0.5 * v.v(i, j) * 0.5 * ih;
                trip.emplace_back(idx(i, j - 1), idx(i, j - 1), a);
                trip.emplace_back(idx(i, j - 1), idx(i, j), a);
                trip.emplace_back(idx(i, j), idx(i, j - 1), -a);
                trip.emplace_back(idx(i, j), idx(i, j), -a);
            }
        Eigen::SparseMatrix<double> adv(n * n, n * n);
        adv.setFromTriplets(trip.begin(), trip.end());
        adv_half_ = adv;
        Eigen::SparseMatrix<double> L = neg_laplacian_matrix(m);
        Eigen::SparseMatrix<double> I(L.rows(), L.cols());
        I.setIdentity();
        Eigen::SparseMatrix<double> B = I * (1.0 / dt) + adv_half_ + L * (0.5 * p.kappa);
        lu_.compute(B);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("midpoint heat factorization failed");
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(L.rows());
        s_ = lu_.solve(ones);
        denom_ = 1.0 - c_ * s_.sum() * m.cell_weight();
        if (!(std::abs(denom_) > 1e-12))
            throw NumericalError("midpoint rank-one correction degenerate");
        neg_half_ = I * (1.0 / dt) - adv_half_ - L * (0.5 * p.kappa);
        div_lift_ = advect_scalar(v, lift_adv).values();
    }

    /// Z <- solution of M (Z' - Z)/dt + Adv((Z'+Z)/2) + div(v Lbar) =
    /// kappa lap (Z'+Z)/2, via Sherman-Morrison on the nonsymmetric core.
    /// The -c 1 q^T rank-one part of the mass appears on both sides: on the
    /// left it is folded into the solve, on the right it is added explicitly.
    void step(ScalarField& z) const {
        require_same_mesh(mesh_, z.mesh(), "MidpointHeatStepper::step");
        Eigen::Index n = static_cast<Eigen::Index>(z.values().size());
        Eigen::VectorXd zv(n);
        for (Eigen::Index k = 0; k < n; ++k) zv[k] = z.values()[static_cast<std::size_t>(k)];
        Eigen::VectorXd rhs = neg_half_ * zv;
        rhs.array() -= c_ * (zv.sum() * mesh_.cell_weight());
        for (Eigen::Index k = 0; k < n; ++k) rhs[k] -= div_lift_[static_cast<std::size_t>(k)];
        Eigen::VectorXd y = lu_.solve(rhs);
        double beta = c_ * (y.sum() * mesh_.cell_weight()) / denom_;
        for (Eigen::Index k = 0; k < n; ++k)
            z.values()[static_cast<std::size_t>(k)] = y[k] + beta * s_[k];
    }

private:
    Mesh mesh_;
    double dt_;
    double lambda_;
    double c_;
    double denom_;
    Eigen::SparseMatrix<double> adv_half_;
    Eigen::SparseMatrix<double> neg_half_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    Eigen::VectorXd s_;
    std::vector<double> div_lift_;
};

struct UniquenessReport {
    std::vector<double> t;
    std::vector<double> q;          // weighted norm of the trajectory difference
    double scale = 0.0;             // q[0], the natural per-step tolerance scale
    double max_increase = 0.0;      // worst positive per-step jump
    bool monotone = false;
    double q_identical_max = 0.0;   // max |Q| of the identical-data control pair
};

/// Twin-trajectory dissipation experiment: advances both initial data with
/// the same fixed velocity and boundary data using the implicit-midpoint
/// stepper and records the weighted norm of the difference at every step.
/// Also runs an identical-data control pair to pin the determinism floor.
inline UniquenessReport uniqueness_experiment(const ScalarField& theta_0_a,
                                              const ScalarField& theta_0_b,
                                              const BoundaryTrace& theta_b,
                                              const VectorField& v, double T, double dt,
                                              const Params& params,
                                              const ScalarField* g = nullptr) {
    params.validate();
    const Mesh& m = theta_0_a.mesh();
    require_same_mesh(m, theta_0_b.mesh(), "uniqueness_experiment");
    require_same_mesh(m, v.mesh(), "uniqueness_experiment");
    if (!(dt > 0.0) || !(T >= dt)) throw ConfigError("time", "need 0 < dt <= T");
    double vmax = v.max_abs();
    if (vmax * dt / m.h() > 1.0 + 1e-12)
        throw NumericalError("advective CFL violated in uniqueness experiment, admissible dt <= " +
                             std::to_string(m.h() / vmax));

    ScalarField bc_lift = harmonic_extension(m, theta_b);
    ScalarField adv_lift = bc_lift;
    if (params.a != 0.0) {
        if (!g) throw StructuralError("uniqueness_experiment: a != 0 requires G");
        adv_lift.add_scaled(*g, params.a);
    }
    MidpointHeatStepper stepper(m, params, v, adv_lift, dt);

    auto z_init = [&](const ScalarField& theta0) {
        ScalarField z = theta0;
        z.shift(params.lambda * avint(theta0));
        z.add_scaled(bc_lift, -1.0);
        z.trace() = BoundaryTrace(m);
        return z;
    };
    ScalarField za = z_init(theta_0_a);
    ScalarField zb = z_init(theta_0_b);

    const long steps = static_cast<long>(std::llround(T / dt));
    UniquenessReport rep;
    rep.t.reserve(static_cast<std::size_t>(steps) + 1);
    rep.q.reserve(static_cast<std::size_t>(steps) + 1);

    ScalarField zc = za;  // identical-data control twin

    auto qdiff = [&](const ScalarField& x, const ScalarField& y) {
        ScalarField d = x;
        d.add_scaled(y, -1.0);
        return q_form(d, params.lambda);
    };

    rep.t.push_back(0.0);
    rep.q.push_back(qdiff(za, zb));
    rep.scale = std::max(rep.q.front(), 1e-300);
    rep.q_identical_max = std::abs(qdiff(za, zc));
    for (long k = 1; k <= steps; ++k) {
        stepper.step(za);
        stepper.step(zb);
        stepper.step(zc);
        rep.t.push_back(static_cast<double>(k) * dt);
        rep.q.push_back(qdiff(za, zb));
        rep.q_identical_max = std::max(rep.q_identical_max, std::abs(qdiff(za, zc)));
    }
    rep.monotone = true;
    for (std::size_t k = 1; k < rep.q.size(); ++k) {
        double jump = rep.q[k] - rep.q[k - 1];
        rep.max_increase = std::max(rep.max_increase, jump);
        if (jump > 1e-12 * rep.scale) rep.monotone = false;
    }
    return rep;
}

}  // namespace nlb
