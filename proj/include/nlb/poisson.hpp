#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "nlb/mesh.hpp"

namespace nlb {

/// Sparse matrix of the negated cell-centered Dirichlet Laplacian -lap_h with
/// homogeneous ghost-reflection walls. Symmetric positive definite.
inline Eigen::SparseMatrix<double> neg_laplacian_matrix(const Mesh& m) {
    const int n = m.nx();
    const double ih2 = 1.0 / (m.h() * m.h());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * n * 5);
    auto idx = [&](int i, int j) { return static_cast<int>(m.cell_index(i, j)); };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double diag = 0.0;
            auto couple = [&](int ii, int jj) {
                trip.emplace_back(idx(i, j), idx(ii, jj), -ih2);
                diag += ih2;
            };
            if (i > 0) couple(i - 1, j); else diag += 2.0 * ih2;
            if (i < n - 1) couple(i + 1, j); else diag += 2.0 * ih2;
            if (j > 0) couple(i, j - 1); else diag += 2.0 * ih2;
            if (j < n - 1) couple(i, j + 1); else diag += 2.0 * ih2;
            trip.emplace_back(idx(i, j), idx(i, j), diag);
        }
    }
    Eigen::SparseMatrix<double> a(n * n, n * n);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

/// Right-hand-side contribution of inhomogeneous Dirichlet data g under the
/// ghost-reflection stencil: each wall cell receives 2 g / h^2.
inline Eigen::VectorXd dirichlet_load(const Mesh& m, const BoundaryTrace& g) {
    const int n = m.nx();
    const double c = 2.0 / (m.h() * m.h());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.cell_count()));
    for (int j = 0; j < n; ++j) {
        b[static_cast<Eigen::Index>(m.cell_index(0, j))] += c * g.left[j];
        b[static_cast<Eigen::Index>(m.cell_index(n - 1, j))] += c * g.right[j];
    }
    for (int i = 0; i < n; ++i) {
        b[static_cast<Eigen::Index>(m.cell_index(i, 0))] += c * g.bottom[i];
        b[static_cast<Eigen::Index>(m.cell_index(i, n - 1))] += c * g.top[i];
    }
    return b;
}

/// Cached Cholesky factorization of -lap_h for Dirichlet Poisson problems.
class DirichletPoisson {
public:
    explicit DirichletPoisson(const Mesh& m) : mesh_(m) {
        Eigen::SparseMatrix<double> a = neg_laplacian_matrix(m);
        llt_.compute(a);
        if (llt_.info() != Eigen::Success)
            throw NumericalError("Dirichlet Poisson factorization failed");
    }

    const Mesh& mesh() const { return mesh_; }

    /// Solves -lap_h x = rhs with boundary data g, one step of iterative
    /// refinement included.
    ScalarField solve(const ScalarField& rhs, const BoundaryTrace& g) const {
        require_same_mesh(mesh_, rhs.mesh(), "DirichletPoisson::solve");
        Eigen::VectorXd b = dirichlet_load(mesh_, g);
        const auto& rv = rhs.values();
        for (std::size_t k = 0; k < rv.size(); ++k) b[static_cast<Eigen::Index>(k)] += rv[k];
        Eigen::VectorXd x = llt_.solve(b);

        ScalarField out(mesh_);
        auto pack = [&](const Eigen::VectorXd& v) {
            for (std::size_t k = 0; k < out.values().size(); ++k)
                out.values()[k] = v[static_cast<Eigen::Index>(k)];
        };
        pack(x);
        out.trace() = g;
        // One refinement pass keeps the interior residual near rounding even
        // though the condition number scales like 1/h^2.
        ScalarField lap = laplace_dirichlet(out);
        Eigen::VectorXd r = b;
        // residual r = b - (-lap_h x + boundary load) = rhs + lap_h(out with g)
        for (std::size_t k = 0; k < rv.size(); ++k)
            r[static_cast<Eigen::Index>(k)] = rv[k] + lap.values()[k];
        Eigen::VectorXd dx = llt_.solve(r);
        x += dx;
        pack(x);
        return out;
    }

private:
    Mesh mesh_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

/// Max |lap_h f| over cells whose full stencil stays off the walls.
inline double interior_laplacian_residual(const ScalarField& f) {
    const Mesh& m = f.mesh();
    const int n = m.nx();
    const double ih2 = 1.0 / (m.h() * m.h());
    double r = 0.0;
    for (int j = 1; j < n - 1; ++j)
        for (int i = 1; i < n - 1; ++i) {
            double lap = (f(i - 1, j) + f(i + 1, j) + f(i, j - 1) + f(i, j + 1) - 4.0 * f(i, j)) * ih2;
            r = std::max(r, std::abs(lap));
        }
    return r;
}

/// Discretely harmonic extension of boundary data: lap_h E = 0 with E = g on
/// the walls. Throws NumericalError when the interior residual is not at
/// rounding level relative to the data.
inline ScalarField harmonic_extension(const Mesh& m, const BoundaryTrace& g,
                                      const DirichletPoisson* solver = nullptr,
                                      double rel_tol = 1e-10) {
    ScalarField zero(m);
    ScalarField e(m);
    if (solver) {
        require_same_mesh(m, solver->mesh(), "harmonic_extension");
        e = solver->solve(zero, g);
    } else {
        DirichletPoisson local(m);
        e = local.solve(zero, g);
    }
    double scale = std::max(g.max_abs(), 1e-300);
    double res = interior_laplacian_residual(e);
    if (res > rel_tol * scale)
        throw NumericalError("harmonic extension interior residual " + std::to_string(res) +
                                 " exceeds " + std::to_string(rel_tol * scale),
                             res);
    return e;
}

}  // namespace nlb
