#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/potential.hpp"

namespace bmeig {

/// Matrix-free 5-point discretization of -Delta + V on the inside nodes of a
/// domain, with homogeneous Dirichlet data by zero extension.
class DiscreteOperator {
public:
    DiscreteOperator(GridDomain domain, const PotentialSpec& v) : domain_(std::move(domain)) {
        v.validate();
        const Grid& g = domain_.grid;
        dof_of_node_.assign(g.size(), -1);
        for (std::size_t c = 0; c < g.size(); ++c) {
            if (domain_.inside[c]) {
                dof_of_node_[c] = static_cast<int>(node_of_dof_.size());
                node_of_dof_.push_back(c);
            }
        }
        neighbors_.resize(node_of_dof_.size());
        potential_.resize(node_of_dof_.size());
        for (std::size_t k = 0; k < node_of_dof_.size(); ++k) {
            const int i = g.col(node_of_dof_[k]), j = g.row(node_of_dof_[k]);
            for (int n = 0; n < 4; ++n) {
                const int a = i + kNeighborDi[n], b = j + kNeighborDj[n];
                neighbors_[k][n] = g.in_range(a, b) ? dof_of_node_[g.index(a, b)] : -1;
            }
            potential_[k] = v(g.point(i, j));
        }
        inv_h2_ = 1.0 / (g.h * g.h);
    }

    std::size_t size() const { return node_of_dof_.size(); }
    const GridDomain& domain() const { return domain_; }
    const Grid& grid() const { return domain_.grid; }
    double h() const { return domain_.grid.h; }
    std::span<const std::size_t> nodes() const { return node_of_dof_; }
    int dof(std::size_t node) const { return dof_of_node_[node]; }
    const std::array<int, 4>& neighbors(std::size_t k) const { return neighbors_[k]; }
    double potential(std::size_t k) const { return potential_[k]; }

    double diagonal(std::size_t k) const { return 4.0 * inv_h2_ + potential_[k]; }
    double off_diagonal() const { return -inv_h2_; }

    /// out = (A - shift I) w
    void apply(std::span<const double> w, std::span<double> out, double shift = 0.0) const {
        for (std::size_t k = 0; k < size(); ++k) {
            const auto& nb = neighbors_[k];
            double sum = 0.0;
            for (int n = 0; n < 4; ++n) sum += nb[n] >= 0 ? w[nb[n]] : 0.0;
            out[k] = (4.0 * inv_h2_ + potential_[k] - shift) * w[k] - inv_h2_ * sum;
        }
    }

    /// min_k (a_kk - sum_j |a_kj|)
    double gershgorin_lower_bound() const {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < size(); ++k) {
            int inside = 0;
            for (int n : neighbors_[k]) inside += n >= 0;
            lo = std::min(lo, diagonal(k) - inside * inv_h2_);
        }
        return lo;
    }

    /// Full-grid field (zero outside) to dof vector and back.
    std::vector<double> restrict_field(std::span<const double> f) const {
        std::vector<double> out(size());
        for (std::size_t k = 0; k < size(); ++k) out[k] = f[node_of_dof_[k]];
        return out;
    }
    Field extend(std::span<const double> w) const {
        Field f(domain_.grid.size(), 0.0);
        for (std::size_t k = 0; k < size(); ++k) f[node_of_dof_[k]] = w[k];
        return f;
    }

private:
    GridDomain domain_;
    std::vector<int> dof_of_node_;
    std::vector<std::size_t> node_of_dof_;
    std::vector<std::array<int, 4>> neighbors_;
    std::vector<double> potential_;
    double inv_h2_ = 0.0;
};

inline DiscreteOperator assemble(const GridDomain& d, const PotentialSpec& v) { return DiscreteOperator(d, v); }

/// First Dirichlet eigenpair. `u` is a full-grid field, zero outside the
/// domain, positive inside, normalized so that sum u^2 h^2 = 1. `residual`
/// is ||A u - lambda u|| / (max(|lambda|, 1) ||u||).
struct EigenPair {
    Grid grid;
    double lambda = 0.0;
    Field u;
    double residual = 0.0;
    int iterations = 0;
};

struct EigenOptions {
    int block = 4;
    std::uint64_t seed = 20240611;
};

namespace linalg {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

/// Symmetric Gauss-Seidel preconditioner for A - shift:
/// z = (D - U)^{-1} D (D - L)^{-1} r in natural dof order. Dofs are numbered
/// row-major, so the -x and -y neighbours precede a dof and +x, +y follow it.
inline void sgs_precondition(const DiscreteOperator& op, std::span<const double> inv_diag, std::span<const double> r,
                             std::span<double> z) {
    const std::size_t n = r.size();
    const double off = op.off_diagonal();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& nb = op.neighbors(k);
        double acc = r[k];
        if (nb[1] >= 0) acc -= off * z[nb[1]];
        if (nb[3] >= 0) acc -= off * z[nb[3]];
        z[k] = acc * inv_diag[k];
    }
    for (std::size_t k = n; k-- > 0;) {
        const auto& nb = op.neighbors(k);
        double acc = 0.0;
        if (nb[0] >= 0) acc += off * z[nb[0]];
        if (nb[2] >= 0) acc += off * z[nb[2]];
        z[k] -= acc * inv_diag[k];
    }
}

/// Preconditioned conjugate gradients for (A - shift) x = b, starting from x.
/// Stops when ||r|| <= rel_tol ||b||. Returns the iteration count.
inline int conjugate_gradient(const DiscreteOperator& op, double shift, std::span<const double> b,
                              std::span<double> x, double rel_tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<double> r(n), p(n), q(n), z(n), inv_diag(n);
    for (std::size_t k = 0; k < n; ++k) inv_diag[k] = 1.0 / (op.diagonal(k) - shift);
    op.apply(x, q, shift);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
    const double target = rel_tol * norm2(b);
    if (norm2(r) <= target) return 0;
    sgs_precondition(op, inv_diag, r, z);
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        op.apply(p, q, shift);
        const double alpha = rz / dot(p, q);
        axpy(alpha, p, x);
        axpy(-alpha, q, r);
        if (norm2(r) <= target) return it;
        sgs_precondition(op, inv_diag, r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    return max_iter;
}

/// Cyclic Jacobi for a small dense symmetric matrix (row-major, n x n).
/// Returns ascending eigenvalues; columns of `vecs` are the eigenvectors.
inline std::vector<double> symmetric_eigen(std::vector<double> a, int n, std::vector<double>& vecs) {
    vecs.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vecs[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-300) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double tn = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tn * tn + 1.0), s = tn * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = vecs[k * n + p], vkq = vecs[k * n + q];
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x * n + x] < a[y * n + y]; });
    std::vector<double> vals(n), sorted(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
        vals[k] = a[order[k] * n + order[k]];
        for (int r = 0; r < n; ++r) sorted[r * n + k] = vecs[r * n + order[k]];
    }
    vecs = std::move(sorted);
    return vals;
}

/// Modified Gram-Schmidt, applied twice. Columns that collapse are replaced
/// from `rng` and re-orthogonalized.
inline void orthonormalize(std::vector<std::vector<double>>& cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (std::size_t a = 0; a < cols.size(); ++a) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = norm2(cols[a]);
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t b = 0; b < a; ++b) axpy(-dot(cols[b], cols[a]), cols[b], cols[a]);
            const double nrm = norm2(cols[a]);
            if (nrm > 1e-10 * before && nrm > 0.0) {
                for (double& v : cols[a]) v /= nrm;
                break;
            }
            for (double& v : cols[a]) v = unif(rng);
        }
    }
}

} // namespace linalg

/// Smallest eigenpair by shifted block inverse iteration: the shift sits just
/// below the Gershgorin lower bound so A - shift is SPD, each column is
/// solved by warm-started conjugate gradients, and a Rayleigh-Ritz step on
/// the block picks out the lowest mode.
inline EigenPair smallest_eigenpair(const DiscreteOperator& op, double tol = 1e-8, int max_iter = 500,
                                    const EigenOptions& opts = {}) {
    require(op.size() > 0, ErrorKind::DomainEmpty, "operator has no degrees of freedom");
    require(tol > 0.0, ErrorKind::InvalidParameter, "solver tolerance must be positive");
    const std::size_t n = op.size();
    const int p = static_cast<int>(std::min<std::size_t>(std::max(opts.block, 1), n));
    const double glb = op.gershgorin_lower_bound();
    const double shift = glb - 1e-3 * std::max(1.0, std::abs(glb));

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<std::vector<double>> x(p, std::vector<double>(n, 1.0));
    for (int k = 1; k < p; ++k)
        for (double& v : x[k]) v = unif(rng);
    linalg::orthonormalize(x, rng);

    std::vector<std::vector<double>> y(p, std::vector<double>(n)), ay(p, std::vector<double>(n));
    std::vector<double> theta(p, 0.0), vecs, h(static_cast<std::size_t>(p) * p);
    std::vector<double> r(n);
    double residual = std::numeric_limits<double>::infinity();
    double inner_tol = 1e-6;
    const int cg_cap = 20000;
    int it = 0;
    for (it = 1; it <= max_iter; ++it) {
        for (int k = 0; k < p; ++k) {
            if (it == 1) {
                std::fill(y[k].begin(), y[k].end(), 0.0);
            } else {
                const double scale = 1.0 / (theta[k] - shift);
                for (std::size_t m = 0; m < n; ++m) y[k][m] = x[k][m] * scale;
            }
            // Trailing columns only steer the subspace; a loose solve suffices.
            const double col_tol = k == 0 ? inner_tol : std::max(inner_tol, 1e-3);
            linalg::conjugate_gradient(op, shift, x[k], y[k], col_tol, cg_cap);
        }
        linalg::orthonormalize(y, rng);
        for (int k = 0; k < p; ++k) op.apply(y[k], ay[k]);
        for (int a = 0; a < p; ++a)
            for (int b = a; b < p; ++b) h[a * p + b] = h[b * p + a] = linalg::dot(y[a], ay[b]);
        theta = linalg::symmetric_eigen(h, p, vecs);
        for (int k = 0; k < p; ++k) {
            std::fill(x[k].begin(), x[k].end(), 0.0);
            for (int a = 0; a < p; ++a) linalg::axpy(vecs[a * p + k], y[a], x[k]);
        }
        linalg::orthonormalize(x, rng);
        op.apply(x[0], r);
        const double rq = linalg::dot(x[0], r);
        theta[0] = rq;
        linalg::axpy(-rq, x[0], r);
        residual = linalg::norm2(r) / std::max(std::abs(rq), 1.0);
        if (residual <= tol) break;
        inner_tol = std::clamp(1e-2 * residual, 1e-15, 1e-6);
    }
    if (residual > tol) {
        throw Error(ErrorKind::SolverDiverged,
                    "inverse iteration did not reach tolerance after " + std::to_string(max_iter) +
                        " iterations (last residual " + std::to_string(residual) + ")",
                    residual);
    }

    std::vector<double> u = std::move(x[0]);
    double sum = std::accumulate(u.begin(), u.end(), 0.0);
    if (sum < 0.0)
        for (double& v : u) v = -v;
    const double hh = op.h() * op.h();
    const double l2 = std::sqrt(linalg::dot(u, u) * hh);
    for (double& v : u) v /= l2;
    op.apply(u, r);
    const double uu = linalg::dot(u, u);
    EigenPair e;
    e.grid = op.grid();
    e.lambda = linalg::dot(u, r) / uu;
    linalg::axpy(-e.lambda, u, r);
    e.residual = linalg::norm2(r) / (std::max(std::abs(e.lambda), 1.0) * std::sqrt(uu));
    e.iterations = std::min(it, max_iter);
    e.u = op.extend(u);
    return e;
}

inline EigenPair smallest_eigenpair(const GridDomain& d, const PotentialSpec& v, double tol = 1e-8,
                                    int max_iter = 500, const EigenOptions& opts = {}) {
    return smallest_eigenpair(assemble(d, v), tol, max_iter, opts);
}

/// Discrete Rayleigh quotient with forward differences and zero extension;
/// this is exactly w^T A w / w^T w for the assembled operator.
inline double rayleigh_quotient(std::span<const double> w, const GridDomain& d, const PotentialSpec& v) {
    const Grid& g = d.grid;
    require(w.size() == g.size(), ErrorKind::GridMismatch, "trial field does not match the grid");
    double mass = 0.0, grad = 0.0, pot = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            const double wc = w[c];
            if (!d.inside[c]) {
                require(wc == 0.0, ErrorKind::PreconditionViolated, "trial field must vanish outside the domain");
            } else {
                mass += wc * wc;
                pot += v(g.point(i, j)) * wc * wc;
            }
            if (i + 1 < g.nx) {
                const double dx = w[c + 1] - wc;
                grad += dx * dx;
            }
            if (j + 1 < g.ny) {
                const double dy = w[c + g.nx] - wc;
                grad += dy * dy;
            }
        }
    }
    require(mass > 0.0, ErrorKind::ZeroTrialFunction, "trial field is identically zero");
    return (grad / (g.h * g.h) + pot) / mass;
}

struct VectorField {
    Field x;
    Field y;
};

/// Central differences at nodes with both neighbours available, one-sided
/// otherwise. With a mask, only mask nodes are used and only mask nodes get a
/// value; without one, the field is taken as given over the whole grid.
inline double gradient_component(std::span<const double> w, const Grid& g, const Mask* mask, int i, int j, int di,
                                 int dj) {
    auto usable = [&](int a, int b) { return g.in_range(a, b) && (!mask || (*mask)[g.index(a, b)]); };
    const bool fwd = usable(i + di, j + dj);
    const bool bwd = usable(i - di, j - dj);
    const double wc = w[g.index(i, j)];
    if (fwd && bwd) return (w[g.index(i + di, j + dj)] - w[g.index(i - di, j - dj)]) / (2.0 * g.h);
    if (fwd) return (w[g.index(i + di, j + dj)] - wc) / g.h;
    if (bwd) return (wc - w[g.index(i - di, j - dj)]) / g.h;
    return 0.0;
}

inline VectorField gradient_field(std::span<const double> w, const Grid& g, const Mask* mask = nullptr) {
    require(w.size() == g.size(), ErrorKind::GridMismatch, "field does not match the grid");
    VectorField out{Field(g.size(), 0.0), Field(g.size(), 0.0)};
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (mask && !(*mask)[c]) continue;
            out.x[c] = gradient_component(w, g, mask, i, j, 1, 0);
            out.y[c] = gradient_component(w, g, mask, i, j, 0, 1);
        }
    }
    return out;
}

/// Bilinear sample of the unmasked gradient field at continuous index
/// coordinates, evaluating only the four surrounding nodes.
inline Vec2 sample_gradient(std::span<const double> w, const Grid& g, Vec2 idx) {
    const int i0 = static_cast<int>(std::floor(idx.x));
    const int j0 = static_cast<int>(std::floor(idx.y));
    const double a = idx.x - i0, b = idx.y - j0;
    Vec2 acc;
    const int di[4] = {0, 1, 0, 1}, dj[4] = {0, 0, 1, 1};
    const double wt[4] = {(1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b};
    for (int k = 0; k < 4; ++k) {
        const int i = i0 + di[k], j = j0 + dj[k];
        if (!g.in_range(i, j) || wt[k] == 0.0) continue;
        acc.x += wt[k] * gradient_component(w, g, nullptr, i, j, 1, 0);
        acc.y += wt[k] * gradient_component(w, g, nullptr, i, j, 0, 1);
    }
    return acc;
}

/// max |grad u| over the grid, with the field zero-extended.
inline double gradient_sup_norm(std::span<const double> w, const Grid& g) {
    const VectorField gf = gradient_field(w, g);
    double m = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) m = std::max(m, std::hypot(gf.x[c], gf.y[c]));
    return m;
}

} // namespace bmeig
