#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nlb/errors.hpp"

namespace nlb {

/// Compensated (Kahan) accumulator. Summation order is fixed by the call
/// sequence, so results are bit-reproducible for a given traversal.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

/// Uniform square MAC mesh on the unit square.
///
/// Scalars live at cell centers ((i+1/2)h, (j+1/2)h), i,j in [0,nx).
/// Horizontal velocity u lives at vertical faces (ih, (j+1/2)h), i in [0,nx].
/// Vertical velocity v lives at horizontal faces ((i+1/2)h, jh), j in [0,nx].
/// Quadrature is the midpoint rule with uniform weight h^2 per cell.
class Mesh {
public:
    explicit Mesh(int nx) : nx_(nx), h_(1.0 / nx) {
        if (nx < 8)
            throw StructuralError("mesh resolution must be at least 8, got " + std::to_string(nx));
        if (h_ * static_cast<double>(nx) != 1.0)
            throw StructuralError("mesh resolution " + std::to_string(nx) +
                                  " does not satisfy h*nx == 1 exactly in double arithmetic");
    }

    int nx() const { return nx_; }
    int ny() const { return nx_; }
    double h() const { return h_; }
    double cell_weight() const { return h_ * h_; }

    double xc(int i) const { return (i + 0.5) * h_; }
    double yc(int j) const { return (j + 0.5) * h_; }
    /// Coordinate of vertical face i (u locations), i in [0,nx].
    double xf(int i) const { return i * h_; }
    double yf(int j) const { return j * h_; }

    std::size_t cell_count() const { return static_cast<std::size_t>(nx_) * nx_; }
    std::size_t uface_count() const { return static_cast<std::size_t>(nx_ + 1) * nx_; }
    std::size_t vface_count() const { return static_cast<std::size_t>(nx_) * (nx_ + 1); }

    std::size_t cell_index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

    bool operator==(const Mesh& o) const { return nx_ == o.nx_; }
    bool operator!=(const Mesh& o) const { return !(*this == o); }

private:
    int nx_;
    double h_;
};

inline void require_same_mesh(const Mesh& a, const Mesh& b, const char* where) {
    if (a != b)
        throw StructuralError(std::string(where) + ": mesh mismatch (" +
                              std::to_string(a.nx()) + " vs " + std::to_string(b.nx()) + ")");
}

/// Boundary values at wall-face midpoints: bottom/top indexed by i, left/right by j.
struct BoundaryTrace {
    std::vector<double> bottom, top, left, right;

    BoundaryTrace() = default;
    explicit BoundaryTrace(const Mesh& m)
        : bottom(m.nx(), 0.0), top(m.nx(), 0.0), left(m.ny(), 0.0), right(m.ny(), 0.0) {}

    static BoundaryTrace constant(const Mesh& m, double c) {
        BoundaryTrace t(m);
        std::fill(t.bottom.begin(), t.bottom.end(), c);
        std::fill(t.top.begin(), t.top.end(), c);
        std::fill(t.left.begin(), t.left.end(), c);
        std::fill(t.right.begin(), t.right.end(), c);
        return t;
    }

    static BoundaryTrace sample(const Mesh& m, const std::function<double(double, double)>& f) {
        BoundaryTrace t(m);
        for (int i = 0; i < m.nx(); ++i) {
            t.bottom[i] = f(m.xc(i), 0.0);
            t.top[i] = f(m.xc(i), 1.0);
        }
        for (int j = 0; j < m.ny(); ++j) {
            t.left[j] = f(0.0, m.yc(j));
            t.right[j] = f(1.0, m.yc(j));
        }
        return t;
    }

    double max_abs() const {
        double r = 0.0;
        for (const auto* side : {&bottom, &top, &left, &right})
            for (double x : *side) r = std::max(r, std::abs(x));
        return r;
    }

    BoundaryTrace& operator+=(const BoundaryTrace& o) {
        auto axpy = [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        };
        axpy(bottom, o.bottom);
        axpy(top, o.top);
        axpy(left, o.left);
        axpy(right, o.right);
        return *this;
    }

    BoundaryTrace& shift(double c) {
        for (auto* side : {&bottom, &top, &left, &right})
            for (double& x : *side) x += c;
        return *this;
    }

    BoundaryTrace& scale(double c) {
        for (auto* side : {&bottom, &top, &left, &right})
            for (double& x : *side) x *= c;
        return *this;
    }
};

/// Cell-centered scalar field with an attached boundary trace.
class ScalarField {
public:
    explicit ScalarField(const Mesh& m) : mesh_(m), v_(m.cell_count(), 0.0), trace_(m) {}

    ScalarField(const Mesh& m, const std::function<double(double, double)>& f)
        : mesh_(m), v_(m.cell_count()), trace_(BoundaryTrace::sample(m, f)) {
        for (int j = 0; j < m.ny(); ++j)
            for (int i = 0; i < m.nx(); ++i) v_[m.cell_index(i, j)] = f(m.xc(i), m.yc(j));
    }

    static ScalarField constant(const Mesh& m, double c) {
        ScalarField f(m);
        std::fill(f.v_.begin(), f.v_.end(), c);
        f.trace_ = BoundaryTrace::constant(m, c);
        return f;
    }

    const Mesh& mesh() const { return mesh_; }
    double operator()(int i, int j) const { return v_[mesh_.cell_index(i, j)]; }
    double& at(int i, int j) { return v_[mesh_.cell_index(i, j)]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }
    const BoundaryTrace& trace() const { return trace_; }
    BoundaryTrace& trace() { return trace_; }

    double max_abs() const {
        double r = 0.0;
        for (double x : v_) r = std::max(r, std::abs(x));
        return r;
    }

    void min_max(double& mn, double& mx) const {
        mn = std::numeric_limits<double>::infinity();
        mx = -mn;
        for (double x : v_) {
            mn = std::min(mn, x);
            mx = std::max(mx, x);
        }
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        for (const auto* side : {&trace_.bottom, &trace_.top, &trace_.left, &trace_.right})
            for (double x : *side)
                if (!std::isfinite(x)) return false;
        return true;
    }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_mesh(mesh_, o.mesh_, "ScalarField +=");
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        trace_ += o.trace_;
        return *this;
    }

    ScalarField& add_scaled(const ScalarField& o, double c) {
        require_same_mesh(mesh_, o.mesh_, "ScalarField add_scaled");
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += c * o.v_[k];
        BoundaryTrace t = o.trace_;
        t.scale(c);
        trace_ += t;
        return *this;
    }

    ScalarField& shift(double c) {
        for (double& x : v_) x += c;
        trace_.shift(c);
        return *this;
    }

    ScalarField& scale(double c) {
        for (double& x : v_) x *= c;
        trace_.scale(c);
        return *this;
    }

private:
    Mesh mesh_;
    std::vector<double> v_;
    BoundaryTrace trace_;
};

/// MAC velocity field: u on vertical faces, v on horizontal faces.
class VectorField {
public:
    explicit VectorField(const Mesh& m)
        : mesh_(m), u_(m.uface_count(), 0.0), v_(m.vface_count(), 0.0) {}

    const Mesh& mesh() const { return mesh_; }

    double u(int i, int j) const { return u_[uidx(i, j)]; }
    double v(int i, int j) const { return v_[vidx(i, j)]; }
    double& u(int i, int j) { return u_[uidx(i, j)]; }
    double& v(int i, int j) { return v_[vidx(i, j)]; }

    std::size_t uidx(int i, int j) const { return static_cast<std::size_t>(j) * (mesh_.nx() + 1) + i; }
    std::size_t vidx(int i, int j) const { return static_cast<std::size_t>(j) * mesh_.nx() + i; }

    const std::vector<double>& u_values() const { return u_; }
    const std::vector<double>& v_values() const { return v_; }
    std::vector<double>& u_values() { return u_; }
    std::vector<double>& v_values() { return v_; }

    double max_abs() const {
        double r = 0.0;
        for (double x : u_) r = std::max(r, std::abs(x));
        for (double x : v_) r = std::max(r, std::abs(x));
        return r;
    }

    bool all_finite() const {
        for (double x : u_)
            if (!std::isfinite(x)) return false;
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    /// Largest |normal component| over wall faces.
    double max_normal_trace() const {
        double r = 0.0;
        for (int j = 0; j < mesh_.ny(); ++j) {
            r = std::max(r, std::abs(u(0, j)));
            r = std::max(r, std::abs(u(mesh_.nx(), j)));
        }
        for (int i = 0; i < mesh_.nx(); ++i) {
            r = std::max(r, std::abs(v(i, 0)));
            r = std::max(r, std::abs(v(i, mesh_.ny())));
        }
        return r;
    }

    VectorField& add_scaled(const VectorField& o, double c) {
        require_same_mesh(mesh_, o.mesh_, "VectorField add_scaled");
        for (std::size_t k = 0; k < u_.size(); ++k) u_[k] += c * o.u_[k];
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += c * o.v_[k];
        return *this;
    }

    VectorField& scale(double c) {
        for (double& x : u_) x *= c;
        for (double& x : v_) x *= c;
        return *this;
    }

private:
    Mesh mesh_;
    std::vector<double> u_;
    std::vector<double> v_;
};

/// Integral over the unit square by the midpoint rule (compensated sum).
/// The domain has measure one, so this is also the mean value.
inline double avint(const ScalarField& f) {
    KahanSum s;
    for (double x : f.values()) s.add(x);
    return s.value() * f.mesh().cell_weight();
}

/// Sum of all quadrature weights; equals the measure of the unit square.
inline double quadrature_weight_sum(const Mesh& m) {
    KahanSum s;
    for (std::size_t k = 0; k < m.cell_count(); ++k) s.add(m.cell_weight());
    return s.value();
}

/// L2 inner product of cell fields.
inline double inner(const ScalarField& f, const ScalarField& g) {
    require_same_mesh(f.mesh(), g.mesh(), "inner");
    KahanSum s;
    const auto& a = f.values();
    const auto& b = g.values();
    for (std::size_t k = 0; k < a.size(); ++k) s.add(a[k] * b[k]);
    return s.value() * f.mesh().cell_weight();
}

/// L2 inner product of MAC velocity fields (uniform weight h^2 per face value).
inline double inner(const VectorField& a, const VectorField& b) {
    require_same_mesh(a.mesh(), b.mesh(), "inner");
    KahanSum s;
    const auto& au = a.u_values();
    const auto& bu = b.u_values();
    for (std::size_t k = 0; k < au.size(); ++k) s.add(au[k] * bu[k]);
    const auto& av = a.v_values();
    const auto& bv = b.v_values();
    for (std::size_t k = 0; k < av.size(); ++k) s.add(av[k] * bv[k]);
    return s.value() * a.mesh().cell_weight();
}

inline double norm2(const VectorField& a) { return inner(a, a); }

/// Face-centered gradient of a cell field. Boundary faces use the attached
/// trace over the half-spacing h/2, so the gradient of a constant field with
/// matching trace vanishes identically.
inline VectorField grad(const ScalarField& f) {
    const Mesh& m = f.mesh();
    VectorField g(m);
    const double ih = 1.0 / m.h();
    const double ih2 = 2.0 / m.h();
    for (int j = 0; j < m.ny(); ++j) {
        g.u(0, j) = (f(0, j) - f.trace().left[j]) * ih2;
        for (int i = 1; i < m.nx(); ++i) g.u(i, j) = (f(i, j) - f(i - 1, j)) * ih;
        g.u(m.nx(), j) = (f.trace().right[j] - f(m.nx() - 1, j)) * ih2;
    }
    for (int i = 0; i < m.nx(); ++i) {
        g.v(i, 0) = (f(i, 0) - f.trace().bottom[i]) * ih2;
        for (int j = 1; j < m.ny(); ++j) g.v(i, j) = (f(i, j) - f(i, j - 1)) * ih;
        g.v(i, m.ny()) = (f.trace().top[i] - f(i, m.ny() - 1)) * ih2;
    }
    return g;
}

/// Cell-centered divergence of a MAC field.
inline ScalarField div(const VectorField& w) {
    const Mesh& m = w.mesh();
    ScalarField d(m);
    const double ih = 1.0 / m.h();
    for (int j = 0; j < m.ny(); ++j)
        for (int i = 0; i < m.nx(); ++i)
            d.at(i, j) = (w.u(i + 1, j) - w.u(i, j) + w.v(i, j + 1) - w.v(i, j)) * ih;
    return d;
}

inline double max_abs_div(const VectorField& w) { return div(w).max_abs(); }

/// Five-point Laplacian of a cell field with Dirichlet data taken from the
/// attached trace by ghost reflection: the ghost value across a wall is
/// 2*g - f, which places the boundary value at the wall-face midpoint.
inline ScalarField laplace_dirichlet(const ScalarField& f) {
    const Mesh& m = f.mesh();
    ScalarField out(m);
    const double ih2 = 1.0 / (m.h() * m.h());
    const int n = m.nx();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double c = f(i, j);
            double fw = (i > 0) ? f(i - 1, j) : (2.0 * f.trace().left[j] - c);
            double fe = (i < n - 1) ? f(i + 1, j) : (2.0 * f.trace().right[j] - c);
            double fs = (j > 0) ? f(i, j - 1) : (2.0 * f.trace().bottom[i] - c);
            double fn = (j < n - 1) ? f(i, j + 1) : (2.0 * f.trace().top[i] - c);
            out.at(i, j) = (fw + fe + fs + fn - 4.0 * c) * ih2;
        }
    }
    return out;
}

/// Same stencil with homogeneous Dirichlet data (trace ignored).
inline ScalarField laplace_dirichlet_hom(const ScalarField& f) {
    const Mesh& m = f.mesh();
    ScalarField out(m);
    const double ih2 = 1.0 / (m.h() * m.h());
    const int n = m.nx();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double c = f(i, j);
            double fw = (i > 0) ? f(i - 1, j) : -c;
            double fe = (i < n - 1) ? f(i + 1, j) : -c;
            double fs = (j > 0) ? f(i, j - 1) : -c;
            double fn = (j < n - 1) ? f(i, j + 1) : -c;
            out.at(i, j) = (fw + fe + fs + fn - 4.0 * c) * ih2;
        }
    }
    return out;
}

/// Discrete Dirichlet energy matching laplace_dirichlet by exact summation by
/// parts: <-laplace(f), f> h^2 + boundary data terms. Interior faces
/// contribute (difference)^2; wall faces contribute 2*(f - g)^2, i.e. the
/// half-cell one-sided difference with weight h^2/2.
inline double grad_energy_dirichlet(const ScalarField& f) {
    const Mesh& m = f.mesh();
    const int n = m.nx();
    KahanSum s;
    for (int j = 0; j < n; ++j) {
        double dl = f(0, j) - f.trace().left[j];
        s.add(2.0 * dl * dl);
        for (int i = 1; i < n; ++i) {
            double d = f(i, j) - f(i - 1, j);
            s.add(d * d);
        }
        double dr = f.trace().right[j] - f(n - 1, j);
        s.add(2.0 * dr * dr);
    }
    for (int i = 0; i < n; ++i) {
        double db = f(i, 0) - f.trace().bottom[i];
        s.add(2.0 * db * db);
        for (int j = 1; j < n; ++j) {
            double d = f(i, j) - f(i, j - 1);
            s.add(d * d);
        }
        double dt = f.trace().top[i] - f(i, n - 1);
        s.add(2.0 * dt * dt);
    }
    return s.value();
}

/// Energy with homogeneous wall data: wall terms use g = 0.
inline double grad_energy_hom(const ScalarField& f) {
    const Mesh& m = f.mesh();
    const int n = m.nx();
    KahanSum s;
    for (int j = 0; j < n; ++j) {
        s.add(2.0 * f(0, j) * f(0, j));
        for (int i = 1; i < n; ++i) {
            double d = f(i, j) - f(i - 1, j);
            s.add(d * d);
        }
        s.add(2.0 * f(n - 1, j) * f(n - 1, j));
    }
    for (int i = 0; i < n; ++i) {
        s.add(2.0 * f(i, 0) * f(i, 0));
        for (int j = 1; j < n; ++j) {
            double d = f(i, j) - f(i, j - 1);
            s.add(d * d);
        }
        s.add(2.0 * f(i, n - 1) * f(i, n - 1));
    }
    return s.value();
}

/// Face fluxes of a scalar by a MAC advecting field: flux = (normal velocity)
/// times the two-cell average of the scalar; wall faces use the scalar trace.
inline VectorField scalar_flux(const VectorField& a, const ScalarField& w) {
    require_same_mesh(a.mesh(), w.mesh(), "scalar_flux");
    const Mesh& m = a.mesh();
    VectorField fl(m);
    const int n = m.nx();
    for (int j = 0; j < n; ++j) {
        fl.u(0, j) = a.u(0, j) * w.trace().left[j];
        for (int i = 1; i < n; ++i) fl.u(i, j) = a.u(i, j) * 0.5 * (w(i - 1, j) + w(i, j));
        fl.u(n, j) = a.u(n, j) * w.trace().right[j];
    }
    for (int i = 0; i < n; ++i) {
        fl.v(i, 0) = a.v(i, 0) * w.trace().bottom[i];
        for (int j = 1; j < n; ++j) fl.v(i, j) = a.v(i, j) * 0.5 * (w(i, j - 1) + w(i, j));
        fl.v(i, n) = a.v(i, n) * w.trace().top[i];
    }
    return fl;
}

/// Divergence-form scalar advection div(a w) with centered face averages.
/// For a discretely solenoidal field a with zero normal trace this operator
/// is skew-adjoint on cell fields, so <advect(a,w), w> = 0 exactly.
inline ScalarField advect_scalar(const VectorField& a, const ScalarField& w) {
    return div(scalar_flux(a, w));
}

/// Divergence-form MAC self-advection div(a (x) w) evaluated on each momentum
/// component: cell-centered fluxes from aligned averages, node-centered fluxes
/// from transverse averages, zero at walls (no-slip). Skew-adjoint in (w, out)
/// when a is discretely solenoidal with zero normal trace.
inline VectorField advect_vector(const VectorField& a, const VectorField& w) {
    require_same_mesh(a.mesh(), w.mesh(), "advect_vector");
    const Mesh& m = a.mesh();
    const int n = m.nx();
    const double ih = 1.0 / m.h();
    VectorField out(m);

    // x-momentum: P at cell centers, Q at nodes (zero on horizontal walls).
    std::vector<double> P(static_cast<std::size_t>(n) * n);
    std::vector<double> Q(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double am = 0.5 * (a.u(i, j) + a.u(i + 1, j));
            double wm = 0.5 * (w.u(i, j) + w.u(i + 1, j));
            P[static_cast<std::size_t>(j) * n + i] = am * wm;
        }
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            double ah = 0.5 * (a.v(i - 1, j) + a.v(i, j));
            double wh = 0.5 * (w.u(i, j - 1) + w.u(i, j));
            Q[static_cast<std::size_t>(j) * (n + 1) + i] = ah * wh;
        }
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            double px = P[static_cast<std::size_t>(j) * n + i] - P[static_cast<std::size_t>(j) * n + i - 1];
            double qy = Q[static_cast<std::size_t>(j + 1) * (n + 1) + i] - Q[static_cast<std::size_t>(j) * (n + 1) + i];
            out.u(i, j) = (px + qy) * ih;
        }

    // y-momentum: P at cell centers, Q at nodes (zero on vertical walls).
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double am = 0.5 * (a.v(i, j) + a.v(i, j + 1));
            double wm = 0.5 * (w.v(i, j) + w.v(i, j + 1));
            P[static_cast<std::size_t>(j) * n + i] = am * wm;
        }
    std::fill(Q.begin(), Q.end(), 0.0);
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            double ah = 0.5 * (a.u(i, j - 1) + a.u(i, j));
            double wh = 0.5 * (w.v(i - 1, j) + w.v(i, j));
            Q[static_cast<std::size_t>(j) * (n + 1) + i] = ah * wh;
        }
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double qx = Q[static_cast<std::size_t>(j) * (n + 1) + i + 1] - Q[static_cast<std::size_t>(j) * (n + 1) + i];
            double py = P[static_cast<std::size_t>(j) * n + i] - P[static_cast<std::size_t>(j - 1) * n + i];
            out.v(i, j) = (qx + py) * ih;
        }
    return out;
}

/// Five-point Laplacian of a staggered velocity under the no-slip ghost
/// convention: tangential ghosts reflect as -w, normal-wall faces carry the
/// stored value (zero for admissible fields). Output at every face.
inline VectorField laplace_noslip(const VectorField& w) {
    const Mesh& m = w.mesh();
    const int n = m.nx();
    const double ih2 = 1.0 / (m.h() * m.h());
    VectorField out(m);
    auto ug = [&](int i, int j) {
        if (j < 0) return -w.u(i, 0);
        if (j >= n) return -w.u(i, n - 1);
        return w.u(i, j);
    };
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i)
            out.u(i, j) = (w.u(i - 1, j) + w.u(i + 1, j) + ug(i, j - 1) + ug(i, j + 1) -
                           4.0 * w.u(i, j)) * ih2;
    auto vg = [&](int i, int j) {
        if (i < 0) return -w.v(0, j);
        if (i >= n) return -w.v(n - 1, j);
        return w.v(i, j);
    };
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i)
            out.v(i, j) = (vg(i - 1, j) + vg(i + 1, j) + w.v(i, j - 1) + w.v(i, j + 1) -
                           4.0 * w.v(i, j)) * ih2;
    return out;
}

/// <flux, grad z> over interior faces only. Wall faces are excluded; the
/// advecting fields feeding the flux vanish there, so nothing is lost.
inline double flux_gradient_pairing(const VectorField& flux, const ScalarField& z) {
    require_same_mesh(flux.mesh(), z.mesh(), "flux_gradient_pairing");
    const Mesh& m = z.mesh();
    const int n = m.nx();
    KahanSum s;
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) s.add(flux.u(i, j) * (z(i, j) - z(i - 1, j)));
    for (int i = 0; i < n; ++i)
        for (int j = 1; j < n; ++j) s.add(flux.v(i, j) * (z(i, j) - z(i, j - 1)));
    return s.value() * m.h();
}

enum class PotentialKind { LinearX, LinearY, QuadSaddle };

inline const char* potential_name(PotentialKind k) {
    switch (k) {
        case PotentialKind::LinearX: return "linear-x";
        case PotentialKind::LinearY: return "linear-y";
        case PotentialKind::QuadSaddle: return "quad-saddle";
    }
    return "?";
}

inline PotentialKind potential_from_name(const std::string& s) {
    if (s == "linear-x") return PotentialKind::LinearX;
    if (s == "linear-y") return PotentialKind::LinearY;
    if (s == "quad-saddle") return PotentialKind::QuadSaddle;
    throw ConfigError("potential", "unknown potential '" + s +
                                       "' (expected linear-x, linear-y, quad-saddle)");
}

/// Gravitational potential presets: mean-free and discretely harmonic.
/// linear-x: x - 1/2, linear-y: y - 1/2, quad-saddle: x^2 - y^2 minus its
/// own quadrature mean on the given mesh.
inline ScalarField make_potential(const Mesh& m, PotentialKind kind) {
    switch (kind) {
        case PotentialKind::LinearX:
            return ScalarField(m, [](double x, double) { return x - 0.5; });
        case PotentialKind::LinearY:
            return ScalarField(m, [](double, double y) { return y - 0.5; });
        case PotentialKind::QuadSaddle: {
            ScalarField g(m, [](double x, double y) { return x * x - y * y; });
            g.shift(-avint(g));
            return g;
        }
    }
    throw StructuralError("make_potential: bad kind");
}

struct PotentialReport {
    double mean = 0.0;
    double interior_laplacian = 0.0;  // max |Laplacian| over cells not touching a wall
    double scale = 0.0;               // max |G|
    bool pass = false;
};

/// Checks the admissibility of a potential: zero quadrature mean and a
/// discretely harmonic interior (the wall ring is excluded because the
/// ghost-reflection stencil would need boundary data there).
inline PotentialReport validate_potential(const ScalarField& g, double mean_tol = 1e-13,
                                          double harmonic_tol = 1e-10) {
    const Mesh& m = g.mesh();
    const int n = m.nx();
    PotentialReport r;
    r.mean = avint(g);
    r.scale = std::max(g.max_abs(), 1.0);
    const double ih2 = 1.0 / (m.h() * m.h());
    for (int j = 1; j < n - 1; ++j)
        for (int i = 1; i < n - 1; ++i) {
            double lap = (g(i - 1, j) + g(i + 1, j) + g(i, j - 1) + g(i, j + 1) - 4.0 * g(i, j)) * ih2;
            r.interior_laplacian = std::max(r.interior_laplacian, std::abs(lap));
        }
    r.pass = std::abs(r.mean) <= mean_tol * r.scale &&
             r.interior_laplacian <= harmonic_tol * r.scale;
    return r;
}

}  // namespace nlb
