#include <catch_amalgamated.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <filesystem>

#include "nlb/stokes.hpp"
#include "testutil.hpp"

using namespace nlb;

namespace {

// Independent stencil application of the no-slip vector Laplacian (negated):
// ghost reflection across tangential walls, stored zeros at normal walls.
VectorField neg_vector_laplace(const VectorField& w) {
    const Mesh& m = w.mesh();
    const int n = m.nx();
    const double ih2 = 1.0 / (m.h() * m.h());
    VectorField out(m);
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            double c = w.u(i, j);
            double uw = w.u(i - 1, j);
            double ue = w.u(i + 1, j);
            double us = (j > 0) ? w.u(i, j - 1) : -c;
            double un = (j < n - 1) ? w.u(i, j + 1) : -c;
            out.u(i, j) = -(uw + ue + us + un - 4.0 * c) * ih2;
        }
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double c = w.v(i, j);
            double vs = w.v(i, j - 1);
            double vn = w.v(i, j + 1);
            double vw = (i > 0) ? w.v(i - 1, j) : -c;
            double ve = (i < n - 1) ? w.v(i + 1, j) : -c;
            out.v(i, j) = -(vs + vn + vw + ve - 4.0 * c) * ih2;
        }
    return out;
}

// Discrete Leray projection oracle: subtract the Neumann-harmonic gradient
// part of a zero-normal-trace field via a pressure Poisson solve.
VectorField leray_project(const VectorField& u) {
    const Mesh& m = u.mesh();
    const int n = m.nx();
    const int cells = n * n;
    ScalarField rhs = div(u);
    std::vector<Eigen::Triplet<double>> trip;
    const double ih2 = 1.0 / (m.h() * m.h());
    auto idx = [&](int i, int j) { return j * n + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (i == 0 && j == 0) continue;  // row replaced by the mean constraint
            double diag = 0.0;
            auto couple = [&](int ii, int jj) {
                trip.emplace_back(idx(i, j), idx(ii, jj), -ih2);
                diag += ih2;
            };
            if (i > 0) couple(i - 1, j);
            if (i < n - 1) couple(i + 1, j);
            if (j > 0) couple(i, j - 1);
            if (j < n - 1) couple(i, j + 1);
            trip.emplace_back(idx(i, j), idx(i, j), diag);
        }
    for (int k = 0; k < cells; ++k) trip.emplace_back(0, k, m.cell_weight());
    Eigen::SparseMatrix<double> L(cells, cells);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(L);
    REQUIRE(lu.info() == Eigen::Success);
    Eigen::VectorXd b(cells);
    for (int k = 0; k < cells; ++k) b[k] = -rhs.values()[static_cast<std::size_t>(k)];
    b[0] = 0.0;
    Eigen::VectorXd phi = lu.solve(b);

    VectorField out = u;
    const double ih = 1.0 / m.h();
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i)
            out.u(i, j) -= (phi[idx(i, j)] - phi[idx(i - 1, j)]) * ih;
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i)
            out.v(i, j) -= (phi[idx(i, j)] - phi[idx(i, j - 1)]) * ih;
    return out;
}

}  // namespace

TEST_CASE("single mode is unit and solenoidal", "[stokes]") {
    Mesh m(16);
    StokesBasis b = build_basis(m, 1);
    REQUIRE(b.N == 1);
    REQUIRE(std::abs(inner(b.modes[0], b.modes[0]) - 1.0) <= 1e-10);
    REQUIRE(max_abs_div(b.modes[0]) <= 1e-10 * b.modes[0].max_abs());
    REQUIRE(b.modes[0].max_normal_trace() == 0.0);
    REQUIRE(b.eigenvalues[0] > 0.0);
}

TEST_CASE("Rayleigh quotients match eigenvalues", "[stokes]") {
    Mesh m(32);
    StokesBasis b = build_basis(m, 8);
    for (int k = 0; k < 8; ++k) {
        const VectorField& w = b.modes[static_cast<std::size_t>(k)];
        double q = inner(neg_vector_laplace(w), w);
        REQUIRE(std::abs(q - b.eigenvalues[static_cast<std::size_t>(k)]) <=
                1e-8 * b.eigenvalues[static_cast<std::size_t>(k)]);
    }
}

TEST_CASE("Galerkin diffusion is diagonal", "[stokes]") {
    Mesh m(32);
    StokesBasis b = build_basis(m, 8);
    for (int i = 0; i < 8; ++i) {
        VectorField lw = neg_vector_laplace(b.modes[static_cast<std::size_t>(i)]);
        for (int j = 0; j < 8; ++j) {
            double want = (i == j) ? b.eigenvalues[static_cast<std::size_t>(i)] : 0.0;
            REQUIRE(std::abs(inner(lw, b.modes[static_cast<std::size_t>(j)]) - want) <=
                    1e-8 * std::max(1.0, b.eigenvalues[static_cast<std::size_t>(i)]));
        }
    }
}

TEST_CASE("lowest eigenvalue stabilizes under refinement", "[stokes]") {
    double l16 = build_basis(Mesh(16), 1).eigenvalues[0];
    double l24 = build_basis(Mesh(24), 1).eigenvalues[0];
    double l32 = build_basis(Mesh(32), 1).eigenvalues[0];
    // second-order convergence: defects shrink like h^2, ratio (h16^2-h24^2)/(h24^2-h32^2)
    double r = (l16 - l24) / (l24 - l32);
    REQUIRE(r >= 2.2);
    REQUIRE(r <= 3.6);
    REQUIRE(std::abs(l24 - l32) / l32 <= 5e-3);
    // h^2 Richardson limit from the 16/32 pair agrees with the fine value to 3 digits
    double h16sq = 1.0 / 256.0, h32sq = 1.0 / 1024.0;
    double star = (l32 * h16sq - l16 * h32sq) / (h16sq - h32sq);
    REQUIRE(std::abs(l32 - star) / star <= 5e-3);
}

TEST_CASE("capacity errors", "[stokes]") {
    Mesh m(16);
    REQUIRE_THROWS_AS(build_basis(m, solenoidal_dimension(m) + 1), StructuralError);
    REQUIRE_THROWS_AS(build_basis(m, 0), StructuralError);
}

TEST_CASE("projection round trips", "[stokes]") {
    Mesh m(16);
    StokesBasis b = build_basis(m, 6);

    GalerkinState e3 = project(b.modes[2], b);
    for (int k = 0; k < 6; ++k)
        REQUIRE(std::abs(e3.c[static_cast<std::size_t>(k)] - (k == 2 ? 1.0 : 0.0)) <= 1e-10);

    auto eng = testutil::rng(31);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    GalerkinState c0;
    for (int k = 0; k < 6; ++k) c0.c.push_back(d(eng));
    GalerkinState c1 = project(reconstruct(c0, b), b);
    for (int k = 0; k < 6; ++k) REQUIRE(std::abs(c1.c[static_cast<std::size_t>(k)] - c0.c[static_cast<std::size_t>(k)]) <= 1e-12);

    VectorField once = reconstruct(c1, b);
    VectorField twice = reconstruct(project(once, b), b);
    double worst = 0.0;
    for (std::size_t k = 0; k < once.u_values().size(); ++k)
        worst = std::max(worst, std::abs(once.u_values()[k] - twice.u_values()[k]));
    for (std::size_t k = 0; k < once.v_values().size(); ++k)
        worst = std::max(worst, std::abs(once.v_values()[k] - twice.v_values()[k]));
    REQUIRE(worst <= 1e-12);
}

TEST_CASE("projection ignores the gradient part", "[stokes]") {
    Mesh m(16);
    StokesBasis b = build_basis(m, 6);
    auto eng = testutil::rng(32);
    VectorField u = testutil::random_no_normal_flux(m, eng);
    REQUIRE(max_abs_div(u) > 1e-3 * u.max_abs());  // generic field, genuinely not solenoidal
    VectorField pu = leray_project(u);
    REQUIRE(max_abs_div(pu) <= 1e-9 * std::max(1.0, pu.max_abs()));
    GalerkinState cu = project(u, b);
    GalerkinState cp = project(pu, b);
    for (int k = 0; k < 6; ++k)
        REQUIRE(std::abs(cu.c[static_cast<std::size_t>(k)] - cp.c[static_cast<std::size_t>(k)]) <= 1e-11);
}

TEST_CASE("projector is symmetric and idempotent as a matrix", "[stokes]") {
    Mesh m(16);
    const int N = 5;
    StokesBasis b = build_basis(m, N);
    const int nf = static_cast<int>(m.uface_count() + m.vface_count());
    Eigen::MatrixXd P(nf, nf);
    // columns: projector applied to coordinate fields
    for (int col = 0; col < nf; ++col) {
        VectorField e(m);
        if (col < static_cast<int>(m.uface_count()))
            e.u_values()[static_cast<std::size_t>(col)] = 1.0;
        else
            e.v_values()[static_cast<std::size_t>(col - m.uface_count())] = 1.0;
        VectorField pe = reconstruct(project(e, b), b);
        for (int r = 0; r < static_cast<int>(m.uface_count()); ++r)
            P(r, col) = pe.u_values()[static_cast<std::size_t>(r)];
        for (int r = 0; r < static_cast<int>(m.vface_count()); ++r)
            P(static_cast<int>(m.uface_count()) + r, col) = pe.v_values()[static_cast<std::size_t>(r)];
    }
    REQUIRE((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    REQUIRE((P * P - P).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("basis cache round trips bitwise", "[stokes]") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "nlb_basis_cache_test";
    fs::remove_all(dir);
    Mesh m(16);
    StokesBasis built = build_basis(m, 8, dir);
    REQUIRE(fs::exists(dir / "stokes_nx16.json"));
    StokesBasis loaded = build_basis(m, 8, dir);
    REQUIRE(loaded.N == built.N);
    for (int k = 0; k < 8; ++k) {
        REQUIRE(loaded.eigenvalues[static_cast<std::size_t>(k)] == built.eigenvalues[static_cast<std::size_t>(k)]);
        REQUIRE(loaded.modes[static_cast<std::size_t>(k)].u_values() == built.modes[static_cast<std::size_t>(k)].u_values());
        REQUIRE(loaded.modes[static_cast<std::size_t>(k)].v_values() == built.modes[static_cast<std::size_t>(k)].v_values());
    }
    // truncated request loads from the same cache
    StokesBasis trunc = build_basis(m, 3, dir);
    REQUIRE(trunc.N == 3);
    REQUIRE(trunc.eigenvalues[2] == built.eigenvalues[2]);
    fs::remove_all(dir);
}
