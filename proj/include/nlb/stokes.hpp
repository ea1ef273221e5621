#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <filesystem>
#include <optional>
#include <vector>

#if defined(NLB_HAVE_LAPACKE)
#include <lapacke.h>
#endif

#include "nlb/fieldio.hpp"
#include "nlb/mesh.hpp"

namespace nlb {

/// Coefficient vector of a velocity expanded in a Stokes basis.
struct GalerkinState {
    std::vector<double> c;
    double t = 0.0;
};

/// Dimension of the discrete divergence-free no-slip subspace: one stream
/// function value per interior node.
inline int solenoidal_dimension(const Mesh& m) { return (m.nx() - 1) * (m.ny() - 1); }

/// Largest mesh accepted by the dense eigensolve; keeps the desk-scale
/// problem under a minute and under a gigabyte.
inline constexpr int kMaxBasisMeshNx = 64;

/// Orthonormal modes of the discrete Stokes operator on the divergence-free
/// no-slip subspace, with eigenvalues in non-decreasing order. Modes have unit
/// discrete L2 norm and exactly zero wall trace.
struct StokesBasis {
    Mesh mesh;
    int N = 0;
    std::vector<double> eigenvalues;
    std::vector<VectorField> modes;
    double gram_defect = 0.0;  // max |<w_i, w_j> - delta_ij| measured after construction

    explicit StokesBasis(const Mesh& m) : mesh(m) {}
};

namespace detail {

/// Maps a stream function on interior nodes to the MAC field
/// u = d_y psi / h, v = -d_x psi / h (exactly solenoidal, zero normal trace).
inline VectorField stream_to_field(const Mesh& m, const double* psi_interior) {
    const int n = m.nx();
    auto p = [&](int i, int j) -> double {
        if (i <= 0 || i >= n || j <= 0 || j >= n) return 0.0;
        return psi_interior[static_cast<std::size_t>(j - 1) * (n - 1) + (i - 1)];
    };
    VectorField w(m);
    const double ih = 1.0 / m.h();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= n; ++i) w.u(i, j) = (p(i, j + 1) - p(i, j)) * ih;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i < n; ++i) w.v(i, j) = -(p(i + 1, j) - p(i, j)) * ih;
    return w;
}

/// Quadratic form of the no-slip vector Laplacian on face values: interior
/// face differences squared plus ghost-reflection wall terms (weight 2) for
/// the tangential components.
inline Eigen::SparseMatrix<double> face_form_matrix(const Mesh& m) {
    const int n = m.nx();
    const std::size_t nu = m.uface_count();
    const auto uidx = [&](int i, int j) { return static_cast<int>(static_cast<std::size_t>(j) * (n + 1) + i); };
    const auto vidx = [&](int i, int j) { return static_cast<int>(nu + static_cast<std::size_t>(j) * n + i); };
    std::vector<Eigen::Triplet<double>> trip;
    auto pair_term = [&](int p, int q) {
        trip.emplace_back(p, p, 1.0);
        trip.emplace_back(q, q, 1.0);
        trip.emplace_back(p, q, -1.0);
        trip.emplace_back(q, p, -1.0);
    };
    // u component: x-neighbors, y-neighbors, ghost terms at bottom/top walls
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) pair_term(uidx(i, j), uidx(i + 1, j));
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i <= n; ++i) pair_term(uidx(i, j), uidx(i, j + 1));
    for (int i = 0; i <= n; ++i) {
        trip.emplace_back(uidx(i, 0), uidx(i, 0), 2.0);
        trip.emplace_back(uidx(i, n - 1), uidx(i, n - 1), 2.0);
    }
    // v component: y-neighbors, x-neighbors, ghost terms at left/right walls
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) pair_term(vidx(i, j), vidx(i, j + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i + 1 < n; ++i) pair_term(vidx(i, j), vidx(i + 1, j));
    for (int j = 0; j <= n; ++j) {
        trip.emplace_back(vidx(0, j), vidx(0, j), 2.0);
        trip.emplace_back(vidx(n - 1, j), vidx(n - 1, j), 2.0);
    }
    const int total = static_cast<int>(nu + m.vface_count());
    Eigen::SparseMatrix<double> a(total, total);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

/// Sparse map from interior-node stream values to stacked face values.
inline Eigen::SparseMatrix<double> stream_map_matrix(const Mesh& m) {
    const int n = m.nx();
    const std::size_t nu = m.uface_count();
    const double ih = 1.0 / m.h();
    auto node = [&](int i, int j) { return (j - 1) * (n - 1) + (i - 1); };
    auto interior = [&](int i, int j) { return i >= 1 && i <= n - 1 && j >= 1 && j <= n - 1; };
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= n; ++i) {
            int row = static_cast<int>(static_cast<std::size_t>(j) * (n + 1) + i);
            if (interior(i, j + 1)) trip.emplace_back(row, node(i, j + 1), ih);
            if (interior(i, j)) trip.emplace_back(row, node(i, j), -ih);
        }
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i < n; ++i) {
            int row = static_cast<int>(nu + static_cast<std::size_t>(j) * n + i);
            if (interior(i + 1, j)) trip.emplace_back(row, node(i + 1, j), -ih);
            if (interior(i, j)) trip.emplace_back(row, node(i, j), ih);
        }
    Eigen::SparseMatrix<double> c(static_cast<int>(nu + m.vface_count()), solenoidal_dimension(m));
    c.setFromTriplets(trip.begin(), trip.end());
    return c;
}

/// Generalized symmetric eigensolve K x = lambda M x with K, M SPD; returns
/// all eigenpairs, eigenvectors M-orthonormal, ascending eigenvalues.
inline void dense_generalized_eig(Eigen::MatrixXd& K, Eigen::MatrixXd& M,
                                  std::vector<double>& evals) {
    const int n = static_cast<int>(K.rows());
    evals.assign(static_cast<std::size_t>(n), 0.0);
#if defined(NLB_HAVE_LAPACKE)
    int info = LAPACKE_dsygvd(LAPACK_COL_MAJOR, 1, 'V', 'L', n, K.data(), n, M.data(), n,
                              evals.data());
    if (info != 0)
        throw NumericalError("generalized eigensolve failed, info=" + std::to_string(info));
#else
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M,
                                                                 Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw NumericalError("generalized eigensolve failed");
    K = es.eigenvectors();
    for (int k = 0; k < n; ++k) evals[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
#endif
}

/// Fixes the overall sign of a mode deterministically: the entry of largest
/// magnitude (first such, u block before v block) is made positive.
inline void canonical_sign(VectorField& w) {
    double best = 0.0;
    int sign = 1;
    auto scan = [&](const std::vector<double>& vals) {
        for (double x : vals)
            if (std::abs(x) > best) {
                best = std::abs(x);
                sign = (x >= 0.0) ? 1 : -1;
            }
    };
    scan(w.u_values());
    scan(w.v_values());
    if (sign < 0) w.scale(-1.0);
}

inline double basis_gram_defect(const StokesBasis& b) {
    double worst = 0.0;
    for (int i = 0; i < b.N; ++i)
        for (int j = i; j < b.N; ++j) {
            double g = inner(b.modes[static_cast<std::size_t>(i)], b.modes[static_cast<std::size_t>(j)]);
            worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

inline void validate_basis(StokesBasis& b) {
    if (static_cast<int>(b.modes.size()) != b.N || static_cast<int>(b.eigenvalues.size()) != b.N)
        throw ArtifactError("stokes basis: inconsistent mode count");
    double prev = 0.0;
    for (double ev : b.eigenvalues) {
        if (!(ev > 0.0) || ev < prev) throw ArtifactError("stokes basis: eigenvalues not positive ascending");
        prev = ev;
    }
    for (const auto& w : b.modes) {
        if (max_abs_div(w) > 1e-10 * std::max(1.0, w.max_abs()))
            throw ArtifactError("stokes basis: mode not solenoidal");
        if (w.max_normal_trace() != 0.0) throw ArtifactError("stokes basis: nonzero normal trace");
    }
    b.gram_defect = basis_gram_defect(b);
    if (b.gram_defect > 1e-10) throw ArtifactError("stokes basis: orthonormality defect " +
                                                   std::to_string(b.gram_defect));
}

inline std::filesystem::path cache_header_path(const std::filesystem::path& dir, int nx) {
    return dir / ("stokes_nx" + std::to_string(nx) + ".json");
}
inline std::filesystem::path cache_data_path(const std::filesystem::path& dir, int nx) {
    return dir / ("stokes_nx" + std::to_string(nx) + ".f64");
}

inline void save_basis_cache(const StokesBasis& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json hdr;
    hdr["kind"] = "stokes-basis";
    hdr["nx"] = b.mesh.nx();
    hdr["count"] = b.N;
    hdr["layout"] = "per mode: u row-major, then v row-major, le64";
    hdr["eigenvalues"] = b.eigenvalues;
    write_file_bytes(cache_header_path(dir, b.mesh.nx()), hdr.dump(2) + "\n");
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(b.N) * (b.mesh.uface_count() + b.mesh.vface_count()) * 8);
    for (const auto& w : b.modes) {
        for (double x : w.u_values()) append_le64(bytes, x);
        for (double x : w.v_values()) append_le64(bytes, x);
    }
    write_file_bytes(cache_data_path(dir, b.mesh.nx()), bytes);
}

/// Loads at least N modes from the cache when present and consistent.
inline std::optional<StokesBasis> load_basis_cache(const Mesh& m, int N,
                                                   const std::filesystem::path& dir) {
    auto hp = cache_header_path(dir, m.nx());
    auto dp = cache_data_path(dir, m.nx());
    std::error_code ec;
    if (!std::filesystem::exists(hp, ec) || !std::filesystem::exists(dp, ec)) return {};
    json hdr;
    try {
        hdr = json::parse(read_file_bytes(hp));
    } catch (const json::exception&) {
        return {};
    }
    if (hdr.value("kind", "") != "stokes-basis" || hdr.value("nx", -1) != m.nx()) return {};
    int count = hdr.value("count", 0);
    if (count < N) return {};
    std::vector<double> evals;
    try {
        evals = hdr.at("eigenvalues").get<std::vector<double>>();
    } catch (const json::exception&) {
        return {};
    }
    if (static_cast<int>(evals.size()) < N) return {};
    std::string bytes = read_file_bytes(dp);
    const std::size_t per_mode = m.uface_count() + m.vface_count();
    if (bytes.size() < static_cast<std::size_t>(count) * per_mode * 8) return {};
    StokesBasis out(m);
    out.N = N;
    out.eigenvalues.assign(evals.begin(), evals.begin() + N);
    out.modes.reserve(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        VectorField w(m);
        const char* base = bytes.data() + static_cast<std::size_t>(k) * per_mode * 8;
        for (std::size_t q = 0; q < m.uface_count(); ++q) w.u_values()[q] = take_le64(base + 8 * q);
        base += m.uface_count() * 8;
        for (std::size_t q = 0; q < m.vface_count(); ++q) w.v_values()[q] = take_le64(base + 8 * q);
        out.modes.push_back(std::move(w));
    }
    return out;
}

}  // namespace detail

/// Builds the N lowest Stokes modes on the given mesh. The divergence-free
/// no-slip subspace is parameterized by stream functions on interior nodes;
/// the dense generalized eigenproblem (vector-Laplacian form vs. velocity
/// mass) is solved once and optionally cached under cache_dir.
inline StokesBasis build_basis(const Mesh& m, int N, const std::filesystem::path& cache_dir = {}) {
    const int dim = solenoidal_dimension(m);
    if (N < 1 || N > dim)
        throw StructuralError("build_basis: N = " + std::to_string(N) +
                              " outside [1, " + std::to_string(dim) +
                              "] (discrete solenoidal subspace dimension)");
    if (m.nx() > kMaxBasisMeshNx)
        throw StructuralError("build_basis: mesh " + std::to_string(m.nx()) +
                              " exceeds the desk-scale cap " + std::to_string(kMaxBasisMeshNx));

    if (!cache_dir.empty()) {
        try {
            if (auto cached = detail::load_basis_cache(m, N, cache_dir)) {
                detail::validate_basis(*cached);
                return *std::move(cached);
            }
        } catch (const ArtifactError&) {
            // fall through and rebuild; the cache is disposable
        }
    }

    Eigen::SparseMatrix<double> A = detail::face_form_matrix(m);
    Eigen::SparseMatrix<double> C = detail::stream_map_matrix(m);
    Eigen::SparseMatrix<double> Ks = C.transpose() * A * C;
    Eigen::SparseMatrix<double> Ms = (C.transpose() * C) * m.cell_weight();
    Eigen::MatrixXd K = Eigen::MatrixXd(Ks);
    Eigen::MatrixXd M = Eigen::MatrixXd(Ms);
    std::vector<double> evals;
    detail::dense_generalized_eig(K, M, evals);

    // keep a few spare modes in the cache so nearby requests reuse the solve
    const int keep = std::min(dim, std::max(N, 64));
    StokesBasis full(m);
    full.N = keep;
    full.eigenvalues.assign(evals.begin(), evals.begin() + keep);
    full.modes.reserve(static_cast<std::size_t>(keep));
    for (int k = 0; k < keep; ++k) {
        VectorField w = detail::stream_to_field(m, K.col(k).data());
        detail::canonical_sign(w);
        full.modes.push_back(std::move(w));
    }
    detail::validate_basis(full);
    if (!cache_dir.empty()) detail::save_basis_cache(full, cache_dir);

    if (keep == N) return full;
    StokesBasis out(m);
    out.N = N;
    out.eigenvalues.assign(full.eigenvalues.begin(), full.eigenvalues.begin() + N);
    out.modes.assign(std::make_move_iterator(full.modes.begin()),
                     std::make_move_iterator(full.modes.begin() + N));
    out.gram_defect = full.gram_defect;
    return out;
}

/// Coefficients of u in the basis: c_n = <u, w_n>.
inline GalerkinState project(const VectorField& u, const StokesBasis& b, int N = -1) {
    require_same_mesh(u.mesh(), b.mesh, "project");
    if (N < 0) N = b.N;
    if (N > b.N) throw StructuralError("project: N exceeds basis size");
    GalerkinState s;
    s.c.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) s.c[static_cast<std::size_t>(k)] = inner(u, b.modes[static_cast<std::size_t>(k)]);
    return s;
}

/// Velocity field of a coefficient vector: sum c_n w_n.
inline VectorField reconstruct(const GalerkinState& s, const StokesBasis& b) {
    if (static_cast<int>(s.c.size()) > b.N)
        throw StructuralError("reconstruct: coefficient count exceeds basis size");
    VectorField u(b.mesh);
    for (std::size_t k = 0; k < s.c.size(); ++k) u.add_scaled(b.modes[k], s.c[k]);
    return u;
}

inline double kinetic_energy(const GalerkinState& s) {
    KahanSum e;
    for (double c : s.c) e.add(c * c);
    return 0.5 * e.value();
}

}  // namespace nlb
