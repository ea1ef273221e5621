#pragma once

#include <vector>

#include "nlb/stokes.hpp"

namespace nlb {

/// Galerkin convection coefficients b[i][j][k] = <div(w_i (x) w_j), w_k>,
/// skew-symmetric in (j,k) because the modes are solenoidal and no-slip.
struct ConvectionTensor {
    int N = 0;
    std::vector<double> b;  // index ((i*N)+j)*N + k
    double scale = 0.0;     // max |b|
    double worst_skew = 0.0;

    double at(int i, int j, int k) const {
        return b[(static_cast<std::size_t>(i) * N + j) * N + k];
    }
};

/// Evaluates all N^3 tensor entries by quadrature and enforces the skew
/// pair-sum check; a violation beyond 1e-6 * scale signals a broken discrete
/// adjointness and aborts construction.
inline ConvectionTensor build_tensor(const StokesBasis& basis) {
    const int N = basis.N;
    ConvectionTensor t;
    t.N = N;
    t.b.assign(static_cast<std::size_t>(N) * N * N, 0.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            VectorField adv = advect_vector(basis.modes[static_cast<std::size_t>(i)],
                                            basis.modes[static_cast<std::size_t>(j)]);
            for (int k = 0; k < N; ++k) {
                double val = inner(adv, basis.modes[static_cast<std::size_t>(k)]);
                t.b[(static_cast<std::size_t>(i) * N + j) * N + k] = val;
                t.scale = std::max(t.scale, std::abs(val));
            }
        }
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k <= j; ++k)
                t.worst_skew = std::max(t.worst_skew, std::abs(t.at(i, j, k) + t.at(i, k, j)));
    // absolute floor: for tiny retained blocks (N = 1) every entry is itself a
    // rounding residual and the relative bound would be vacuous
    if (t.worst_skew > 1e-6 * t.scale + 1e-9)
        throw NumericalError("convection tensor skew defect " + std::to_string(t.worst_skew) +
                             " exceeds 1e-6 * " + std::to_string(t.scale));
    return t;
}

/// conv_k = sum_{ij} c_i c_j b[i][j][k].
inline std::vector<double> contract_tensor(const ConvectionTensor& t,
                                           const std::vector<double>& c) {
    const int N = t.N;
    std::vector<double> out(static_cast<std::size_t>(N), 0.0);
    for (int i = 0; i < N; ++i) {
        if (c[static_cast<std::size_t>(i)] == 0.0) continue;
        for (int j = 0; j < N; ++j) {
            double cij = c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)];
            if (cij == 0.0) continue;
            const double* row = &t.b[(static_cast<std::size_t>(i) * N + j) * N];
            for (int k = 0; k < N; ++k) out[static_cast<std::size_t>(k)] += cij * row[k];
        }
    }
    return out;
}

/// Buoyancy load f_k = -<Theta grad G, w_k>, with Theta interpolated to faces
/// by two-cell averages (wall faces use the trace; the modes vanish there).
inline VectorField buoyancy_field(const ScalarField& theta, const VectorField& grad_g) {
    require_same_mesh(theta.mesh(), grad_g.mesh(), "buoyancy_field");
    return scalar_flux(grad_g, theta);
}

inline std::vector<double> buoyancy_load(const ScalarField& theta, const VectorField& grad_g,
                                         const StokesBasis& basis, int N = -1) {
    require_same_mesh(theta.mesh(), basis.mesh, "buoyancy_load");
    if (N < 0) N = basis.N;
    if (N > basis.N) throw StructuralError("buoyancy_load: N exceeds basis size");
    VectorField f = buoyancy_field(theta, grad_g);
    std::vector<double> load(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k)
        load[static_cast<std::size_t>(k)] = -inner(f, basis.modes[static_cast<std::size_t>(k)]);
    return load;
}

inline std::vector<double> buoyancy_load(const ScalarField& theta, const ScalarField& g,
                                         const StokesBasis& basis, int N = -1) {
    return buoyancy_load(theta, grad(g), basis, N);
}

/// Velocity coefficient trajectory with AB-2 history and the scheme-flux
/// energy accumulators used by the ledger.
struct MomentumState {
    GalerkinState s;
    std::vector<double> prev_conv;
    std::vector<double> prev_load;
    bool has_prev = false;
    double dissipation_cum = 0.0;    // mu * integral of the Galerkin gradient energy
    double buoyancy_work_cum = 0.0;  // integral of Theta grad G . v (note the sign)
};

/// One IMEX step of the Galerkin ODE: Crank-Nicolson on the diagonal
/// diffusion -mu lambda_k c_k, AB-2 (forward-Euler bootstrap) on convection
/// and load. Advances in place.
inline void momentum_step(MomentumState& st, const ConvectionTensor& tensor,
                          const std::vector<double>& eigenvalues,
                          const std::vector<double>& load, double mu, double dt) {
    const int N = static_cast<int>(st.s.c.size());
    if (tensor.N != N || static_cast<int>(eigenvalues.size()) < N ||
        static_cast<int>(load.size()) != N)
        throw StructuralError("momentum_step: size mismatch");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");

    std::vector<double> conv = contract_tensor(tensor, st.s.c);
    std::vector<double> cnew(static_cast<std::size_t>(N));
    std::vector<double> cmid(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        std::size_t q = static_cast<std::size_t>(k);
        double expl = -conv[q] + load[q];
        if (st.has_prev) expl = 1.5 * expl - 0.5 * (-st.prev_conv[q] + st.prev_load[q]);
        double lam = eigenvalues[q];
        cnew[q] = (st.s.c[q] * (1.0 / dt - 0.5 * mu * lam) + expl) / (1.0 / dt + 0.5 * mu * lam);
        cmid[q] = 0.5 * (st.s.c[q] + cnew[q]);
        if (!std::isfinite(cnew[q])) throw NumericalError("momentum_step: non-finite coefficient");
    }

    KahanSum diss, work;
    for (int k = 0; k < N; ++k) {
        std::size_t q = static_cast<std::size_t>(k);
        diss.add(eigenvalues[q] * cmid[q] * cmid[q]);
        double f_eff = load[q];
        if (st.has_prev) f_eff = 1.5 * load[q] - 0.5 * st.prev_load[q];
        work.add(cmid[q] * f_eff);
    }
    st.dissipation_cum += dt * mu * diss.value();
    st.buoyancy_work_cum -= dt * work.value();

    st.prev_conv = std::move(conv);
    st.prev_load = load;
    st.has_prev = true;
    st.s.c = std::move(cnew);
    st.s.t += dt;
}

}  // namespace nlb
