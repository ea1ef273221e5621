#pragma once

#include <random>

#include "nlb/mesh.hpp"

namespace testutil {

inline std::mt19937 rng(unsigned seed = 12345) { return std::mt19937(seed); }

inline nlb::ScalarField random_scalar(const nlb::Mesh& m, std::mt19937& eng,
                                      bool random_trace = true) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    nlb::ScalarField f(m);
    for (double& x : f.values()) x = d(eng);
    if (random_trace) {
        for (auto* side : {&f.trace().bottom, &f.trace().top, &f.trace().left, &f.trace().right})
            for (double& x : *side) x = d(eng);
    }
    return f;
}

/// Random MAC field with exactly zero normal trace (wall-normal faces zeroed);
/// interior faces and wall-tangential values free.
inline nlb::VectorField random_no_normal_flux(const nlb::Mesh& m, std::mt19937& eng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    nlb::VectorField w(m);
    for (int j = 0; j < m.ny(); ++j)
        for (int i = 1; i < m.nx(); ++i) w.u(i, j) = d(eng);
    for (int i = 0; i < m.nx(); ++i)
        for (int j = 1; j < m.ny(); ++j) w.v(i, j) = d(eng);
    return w;
}

/// Discretely solenoidal no-slip field from a random stream function on
/// interior nodes: u = d_y psi / h, v = -d_x psi / h.
inline nlb::VectorField random_solenoidal(const nlb::Mesh& m, std::mt19937& eng,
                                          double amp = 1.0) {
    std::uniform_real_distribution<double> d(-amp, amp);
    const int n = m.nx();
    std::vector<double> psi(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) psi[static_cast<std::size_t>(j) * (n + 1) + i] = d(eng);
    nlb::VectorField w(m);
    const double ih = 1.0 / m.h();
    auto p = [&](int i, int j) { return psi[static_cast<std::size_t>(j) * (n + 1) + i]; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= n; ++i) w.u(i, j) = (p(i, j + 1) - p(i, j)) * ih;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i < n; ++i) w.v(i, j) = -(p(i + 1, j) - p(i, j)) * ih;
    return w;
}

}  // namespace testutil
