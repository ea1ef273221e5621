#pragma once

#include "nlb/mesh.hpp"

namespace nlb {

/// Physical parameters of the coupled system. lambda scales the non-local
/// boundary feedback, a the advected-potential coupling.
struct Params {
    double kappa = 1.0;   // thermal diffusivity, > 0
    double mu = 1.0;      // kinematic viscosity, > 0
    double lambda = 1.0;  // boundary feedback strength, > 0
    double a = 0.0;       // potential coupling

    void validate() const {
        if (!(kappa > 0.0)) throw ConfigError("params.kappa", "must be positive");
        if (!(mu > 0.0)) throw ConfigError("params.mu", "must be positive");
        if (!(lambda > 0.0)) throw ConfigError("params.lambda", "must be positive");
        if (!std::isfinite(a)) throw ConfigError("params.a", "must be finite");
    }
};

/// Mass-like operator of the non-local boundary condition:
/// (M f) = f - (lambda / (1 + lambda)) * mean(f). Symmetric positive definite
/// with spectrum {1} on mean-free fields and 1/(1+lambda) on constants.
inline ScalarField apply_mass(const ScalarField& f, double lambda) {
    ScalarField out = f;
    out.shift(-(lambda / (1.0 + lambda)) * avint(f));
    return out;
}

/// Closed-form inverse of apply_mass: M^{-1} f = f + lambda * mean(f)
/// (rank-one update; exact because mean(M f) = mean(f)/(1+lambda)).
inline ScalarField invert_mass(const ScalarField& f, double lambda) {
    ScalarField out = f;
    out.shift(lambda * avint(f));
    return out;
}

/// Lifted variable V = theta + lambda * mean(theta). Its wall trace equals the
/// boundary data when theta satisfies the non-local condition, and
/// mean(V) = (1 + lambda) mean(theta).
inline ScalarField theta_to_v(const ScalarField& theta, double lambda) {
    ScalarField out = theta;
    out.shift(lambda * avint(theta));
    return out;
}

/// Inverse lift: theta = V - (lambda / (1 + lambda)) * mean(V).
inline ScalarField v_to_theta(const ScalarField& v, double lambda) {
    ScalarField out = v;
    out.shift(-(lambda / (1.0 + lambda)) * avint(v));
    return out;
}

/// Weighted quadratic form of the lifted variable,
///   Q(V) = mean(V^2) - (lambda / (1 + lambda)) mean(V)^2 = <M V, V>.
/// Satisfies mean(V^2)/(1+lambda) <= Q(V) <= mean(V^2).
inline double q_form(const ScalarField& v, double lambda) {
    double m2 = inner(v, v);
    double m1 = avint(v);
    return m2 - (lambda / (1.0 + lambda)) * m1 * m1;
}

/// Removes the potential coupling by shifting: given (theta, theta_B, G) for
/// coupling strength a, returns data (theta + aG, trace(theta_B + aG)) whose
/// dynamics match the a = 0 system. mean(G) = 0 keeps the non-local term
/// unchanged.
struct ShiftedData {
    ScalarField theta;
    BoundaryTrace theta_b;
};

inline ShiftedData shift_reduce(const ScalarField& theta, const BoundaryTrace& theta_b,
                                const ScalarField& g, double a) {
    require_same_mesh(theta.mesh(), g.mesh(), "shift_reduce");
    ShiftedData out{theta, theta_b};
    out.theta.add_scaled(g, a);
    BoundaryTrace gt = g.trace();
    gt.scale(a);
    out.theta_b += gt;
    return out;
}

inline ScalarField shift_restore(const ScalarField& theta_shifted, const ScalarField& g, double a) {
    require_same_mesh(theta_shifted.mesh(), g.mesh(), "shift_restore");
    ScalarField out = theta_shifted;
    out.add_scaled(g, -a);
    return out;
}

}  // namespace nlb
