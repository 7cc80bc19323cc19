#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/grid.hpp"
#include "bmeig/shapes.hpp"

namespace bmeig {

/// Deformation parameter t in [0, 1].
class DeformationParam {
public:
    explicit DeformationParam(double t) : t_(t) {
        require(std::isfinite(t) && t >= 0.0 && t <= 1.0, ErrorKind::InvalidParameter,
                "deformation parameter must lie in [0, 1]");
    }
    double value() const { return t_; }
    operator double() const { return t_; }

private:
    double t_;
};

/// A rasterized planar domain. `inside[c]` holds iff `phi[c] < 0`; the mask is
/// non-empty and 4-connected.
struct GridDomain {
    Grid grid;
    Mask inside;
    Field phi;
    std::optional<ShapeSpec> source;

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : inside) n += v;
        return n;
    }
    bool in(int i, int j) const { return grid.in_range(i, j) && inside[grid.index(i, j)]; }

    /// Inside node with at least one 4-neighbour outside.
    bool is_boundary(int i, int j) const {
        if (!in(i, j)) return false;
        for (int k = 0; k < 4; ++k)
            if (!in(i + kNeighborDi[k], j + kNeighborDj[k])) return true;
        return false;
    }
};

namespace detail {

inline bool is_connected(const Grid& g, const Mask& inside) {
    std::size_t start = inside.size();
    std::size_t total = 0;
    for (std::size_t c = 0; c < inside.size(); ++c) {
        if (inside[c]) {
            if (start == inside.size()) start = c;
            ++total;
        }
    }
    if (total == 0) return false;
    std::vector<std::uint8_t> seen(inside.size(), 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        ++reached;
        const int i = g.col(c), j = g.row(c);
        for (int k = 0; k < 4; ++k) {
            const int a = i + kNeighborDi[k], b = j + kNeighborDj[k];
            if (!g.in_range(a, b)) continue;
            const std::size_t n = g.index(a, b);
            if (inside[n] && !seen[n]) {
                seen[n] = 1;
                stack.push_back(n);
            }
        }
    }
    return reached == total;
}

inline void check_mask(const Grid& g, const Mask& inside) {
    bool any = false;
    for (auto v : inside) any = any || v;
    require(any, ErrorKind::DomainEmpty, "domain mask has no inside cells");
    require(is_connected(g, inside), ErrorKind::DomainDisconnected, "domain mask is not 4-connected");
}

/// 1-D squared distance transform (lower envelope of parabolas); entries of
/// f equal to +inf are not seeds.
inline void edt_1d(std::span<const double> f, std::span<double> out, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        double s = -inf;
        while (k >= 0) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
        } else {
            ++k;
            v[k] = q;
            z[k] = s;
        }
        z[k + 1] = inf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) out[q] = inf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double d = q - v[j];
        out[q] = d * d + f[v[j]];
    }
}

/// Exact squared Euclidean distance (index units) from every node to the
/// nearest seed node.
inline Field squared_distance_to(const Grid& g, const Mask& seeds) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Field d(g.size(), inf);
    for (std::size_t c = 0; c < g.size(); ++c)
        if (seeds[c]) d[c] = 0.0;
    std::vector<int> v;
    std::vector<double> z;
    Field col_in(g.ny), col_out(g.ny);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) col_in[j] = d[g.index(i, j)];
        edt_1d(col_in, col_out, v, z);
        for (int j = 0; j < g.ny; ++j) d[g.index(i, j)] = col_out[j];
    }
    Field row_in(g.nx), row_out(g.nx);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) row_in[i] = d[g.index(i, j)];
        edt_1d(row_in, row_out, v, z);
        for (int i = 0; i < g.nx; ++i) d[g.index(i, j)] = row_out[i];
    }
    return d;
}

inline int snap(double index) { return static_cast<int>(std::floor(index + 0.5)); }

} // namespace detail

/// Signed distance to the boundary of a mask, placing the interface half a
/// spacing between inside and outside nodes. Negative inside.
inline Field mask_signed_distance(const Grid& g, const Mask& inside) {
    Mask outside(inside.size());
    for (std::size_t c = 0; c < inside.size(); ++c) outside[c] = inside[c] ? 0 : 1;
    const Field to_out = detail::squared_distance_to(g, outside);
    const Field to_in = detail::squared_distance_to(g, inside);
    Field phi(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
        phi[c] = inside[c] ? -(std::sqrt(to_out[c]) - 0.5) * g.h : (std::sqrt(to_in[c]) - 0.5) * g.h;
    }
    return phi;
}

/// Builds a GridDomain from a mask, recomputing phi from the mask boundary.
inline GridDomain domain_from_mask(const Grid& g, Mask inside) {
    require(inside.size() == g.size(), ErrorKind::GridMismatch, "mask size does not match grid");
    detail::check_mask(g, inside);
    GridDomain d;
    d.grid = g;
    d.phi = mask_signed_distance(g, inside);
    d.inside = std::move(inside);
    return d;
}

inline GridDomain rasterize(const ShapeSpec& spec, const Grid& grid) {
    grid.validate();
    validate(spec);
    const BBox box = bounding_box(spec);
    const BBox gb = grid.bounds();
    const double margin = 2.0 * grid.h * (1.0 - 1e-9);
    require(box.lo.x - gb.lo.x >= margin && box.lo.y - gb.lo.y >= margin && gb.hi.x - box.hi.x >= margin &&
                gb.hi.y - box.hi.y >= margin,
            ErrorKind::InvalidParameter, "grid must cover the shape's bounding box with 2 cells of margin");
    GridDomain d;
    d.grid = grid;
    d.source = spec;
    d.phi.resize(grid.size());
    d.inside.resize(grid.size());
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const std::size_t c = grid.index(i, j);
            d.phi[c] = signed_distance(spec, grid.point(i, j));
            d.inside[c] = d.phi[c] < 0.0 ? 1 : 0;
        }
    }
    detail::check_mask(grid, d.inside);
    return d;
}

/// Maximal horizontal runs [i_begin, i_end] of inside nodes, per row.
struct RowRun {
    int j;
    int i_begin;
    int i_end;
};

inline std::vector<RowRun> row_runs(const GridDomain& d) {
    std::vector<RowRun> runs;
    for (int j = 0; j < d.grid.ny; ++j) {
        int i = 0;
        while (i < d.grid.nx) {
            if (!d.inside[d.grid.index(i, j)]) {
                ++i;
                continue;
            }
            const int b = i;
            while (i < d.grid.nx && d.inside[d.grid.index(i, j)]) ++i;
            runs.push_back({j, b, i - 1});
        }
    }
    return runs;
}

namespace detail {

/// Snapped Minkowski combination of two masks in index space: node z is set
/// iff it is the nearest node to (1-t) x0 + t x1 for set nodes x0, x1.
inline Mask interpolate_masks(const Grid& g, const Mask& m0, const Mask& m1, double t) {
    const double s = 1.0 - t;
    std::vector<RowRun> runs;
    for (int j = 0; j < g.ny; ++j) {
        int i = 0;
        while (i < g.nx) {
            if (!m1[g.index(i, j)]) {
                ++i;
                continue;
            }
            const int b = i;
            while (i < g.nx && m1[g.index(i, j)]) ++i;
            runs.push_back({j, b, i - 1});
        }
    }
    // Row-wise difference counts; a node is set iff its prefix sum is > 0.
    std::vector<int> diff(static_cast<std::size_t>(g.ny) * (g.nx + 1), 0);
    for (int j0 = 0; j0 < g.ny; ++j0) {
        for (int i0 = 0; i0 < g.nx; ++i0) {
            if (!m0[g.index(i0, j0)]) continue;
            for (const RowRun& r : runs) {
                const int zj = snap(s * j0 + t * r.j);
                const int za = snap(s * i0 + t * r.i_begin);
                const int zb = snap(s * i0 + t * r.i_end);
                require(zj >= 0 && zj < g.ny && za >= 0 && zb < g.nx, ErrorKind::InvalidParameter,
                        "Minkowski interpolant leaves the grid");
                const std::size_t row = static_cast<std::size_t>(zj) * (g.nx + 1);
                ++diff[row + za];
                --diff[row + zb + 1];
            }
        }
    }
    Mask out(g.size(), 0);
    for (int j = 0; j < g.ny; ++j) {
        int acc = 0;
        const std::size_t row = static_cast<std::size_t>(j) * (g.nx + 1);
        for (int i = 0; i < g.nx; ++i) {
            acc += diff[row + i];
            out[g.index(i, j)] = acc > 0 ? 1 : 0;
        }
    }
    return out;
}

/// Nodes strictly inside (1-t) A + t B for convex shapes A, B, from the
/// support function h = (1-t) h_A + t h_B: z is inside iff <z, u> < h(u) for
/// every unit u. Polygonal pairs are decided on their edge normals exactly;
/// otherwise the angular maximum is bracketed on a sample grid and refined.
inline Mask convex_combination_mask(const Grid& g, const ShapeSpec& a, const ShapeSpec& b, double t) {
    const double s = 1.0 - t;
    auto h = [&](Vec2 u) { return s * support(a, u) + t * support(b, u); };
    std::vector<Vec2> normals = edge_normals(a);
    const std::vector<Vec2> nb = edge_normals(b);
    const bool exact = !normals.empty() && !nb.empty();
    normals.insert(normals.end(), nb.begin(), nb.end());
    auto radius = [](const ShapeSpec& sp) {
        const BBox bb = bounding_box(sp);
        return std::max(std::max(norm(bb.lo), norm(bb.hi)), std::max(norm({bb.lo.x, bb.hi.y}), norm({bb.hi.x, bb.lo.y})));
    };
    const double r_shape = s * radius(a) + t * radius(b);
    constexpr int coarse = 64, fine = 1024;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto dir = [](double th) { return Vec2{std::cos(th), std::sin(th)}; };
    struct Sample {
        Vec2 u;
        double hu;
    };
    auto table = [&](int n) {
        std::vector<Sample> out;
        for (int k = 0; k < n; ++k) {
            const Vec2 u = dir(two_pi * k / n);
            out.push_back({u, h(u)});
        }
        return out;
    };
    const auto coarse_tab = table(coarse), fine_tab = table(fine);
    std::vector<Sample> normal_tab;
    for (Vec2 n : normals) normal_tab.push_back({n, h(n)});

    Mask out(g.size(), 0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 z = g.point(i, j);
            double best = -std::numeric_limits<double>::infinity();
            for (const Sample& n : normal_tab) best = std::max(best, dot(z, n.u) - n.hu);
            if (exact) {
                out[g.index(i, j)] = best < 0.0 ? 1 : 0;
                continue;
            }
            // g(theta) = <z, u> - h(u) is Lipschitz in theta with constant lip.
            const double lip = norm(z) + r_shape;
            int arg = 0;
            for (int k = 0; k < coarse; ++k) {
                const double v = dot(z, coarse_tab[k].u) - coarse_tab[k].hu;
                if (v > best) {
                    best = v;
                    arg = k;
                }
            }
            if (best >= 0.0) continue;
            if (best + lip * std::numbers::pi / coarse < 0.0) {
                out[g.index(i, j)] = 1;
                continue;
            }
            double fbest = best;
            int farg = arg * (fine / coarse);
            for (int k = 0; k < fine; ++k) {
                const double v = dot(z, fine_tab[k].u) - fine_tab[k].hu;
                if (v > fbest) {
                    fbest = v;
                    farg = k;
                }
            }
            if (fbest >= 0.0) continue;
            // Golden-section refinement around the best fine sample.
            double lo = two_pi * (farg - 1) / fine, hi = two_pi * (farg + 1) / fine;
            auto f = [&](double th) {
                const Vec2 u = dir(th);
                return dot(z, u) - h(u);
            };
            const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
            double f1 = f(x1), f2 = f(x2);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + ratio * (hi - lo);
                    f2 = f(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - ratio * (hi - lo);
                    f1 = f(x1);
                }
            }
            fbest = std::max({fbest, f1, f2});
            out[g.index(i, j)] = fbest < 0.0 ? 1 : 0;
        }
    }
    return out;
}

} // namespace detail

/// Minkowski interpolant (1-t) d0 + t d1 on the shared grid. When both
/// operands carry a convex source shape the interpolant is the exact convex
/// combination sampled at the nodes. Otherwise node z is inside iff it is the
/// nearest node to (1-t) x0 + t x1 for some inside nodes x0, x1. Endpoints
/// return the operands unchanged.
inline GridDomain minkowski_interpolate(const GridDomain& d0, const GridDomain& d1, DeformationParam t) {
    require(d0.grid == d1.grid, ErrorKind::GridMismatch, "Minkowski operands must share a grid");
    if (t.value() == 0.0) return d0;
    if (t.value() == 1.0) return d1;
    const Grid& g = d0.grid;
    if (d0.source && d1.source && is_convex_shape(*d0.source) && is_convex_shape(*d1.source))
        return domain_from_mask(g, detail::convex_combination_mask(g, *d0.source, *d1.source, t.value()));
    return domain_from_mask(g, detail::interpolate_masks(g, d0.inside, d1.inside, t.value()));
}

inline std::vector<std::size_t> boundary_nodes(const GridDomain& d) {
    std::vector<std::size_t> out;
    for (int j = 0; j < d.grid.ny; ++j)
        for (int i = 0; i < d.grid.nx; ++i)
            if (d.is_boundary(i, j)) out.push_back(d.grid.index(i, j));
    return out;
}

/// Nodes nearest to (1-t) b0 + t b1 over discrete boundary nodes b0, b1.
inline Mask boundary_sum_mask(const GridDomain& d0, const GridDomain& d1, DeformationParam t) {
    require(d0.grid == d1.grid, ErrorKind::GridMismatch, "operands must share a grid");
    const Grid& g = d0.grid;
    const auto b0 = boundary_nodes(d0);
    const auto b1 = boundary_nodes(d1);
    const double s = 1.0 - t.value();
    Mask out(g.size(), 0);
    for (std::size_t c0 : b0) {
        const double i0 = g.col(c0), j0 = g.row(c0);
        for (std::size_t c1 : b1) {
            const int zi = detail::snap(s * i0 + t.value() * g.col(c1));
            const int zj = detail::snap(s * j0 + t.value() * g.row(c1));
            if (g.in_range(zi, zj)) out[g.index(zi, zj)] = 1;
        }
    }
    return out;
}

/// Largest distance from a boundary node of the interpolant to the discrete
/// set (1-t) boundary(d0) + t boundary(d1). The inclusion of the interpolant
/// boundary in that set predicts an O(h) value.
inline double boundary_inclusion_check(const GridDomain& d0, const GridDomain& d1, DeformationParam t) {
    const GridDomain dt = minkowski_interpolate(d0, d1, t);
    const Mask sum = boundary_sum_mask(d0, d1, t);
    const Field dist2 = detail::squared_distance_to(dt.grid, sum);
    double worst = 0.0;
    for (std::size_t c : boundary_nodes(dt)) worst = std::max(worst, std::sqrt(dist2[c]) * dt.grid.h);
    return worst;
}

/// Discrete midpoint convexity: for every pair of inside nodes whose index
/// sums are both even, the midpoint node is inside. Exhaustive below 10^4
/// inside nodes, else 10^6 random pairs from a fixed seed.
inline bool is_convex(const GridDomain& d, std::uint64_t seed = 0x5eed) {
    const Grid& g = d.grid;
    std::vector<std::pair<int, int>> nodes;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (d.inside[g.index(i, j)]) nodes.emplace_back(i, j);
    auto midpoint_ok = [&](std::pair<int, int> p, std::pair<int, int> q) {
        const int si = p.first + q.first, sj = p.second + q.second;
        if ((si & 1) || (sj & 1)) return true;
        return d.in(si / 2, sj / 2);
    };
    if (nodes.size() < 10000) {
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = a + 1; b < nodes.size(); ++b)
                if (!midpoint_ok(nodes[a], nodes[b])) return false;
        return true;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    for (int k = 0; k < 1000000; ++k)
        if (!midpoint_ok(nodes[pick(rng)], nodes[pick(rng)])) return false;
    return true;
}

/// Bounding box of every shape that can appear between the two operands.
inline BBox hull_box(const ShapeSpec& a, const ShapeSpec& b) { return bounding_box(a).merged(bounding_box(b)); }

} // namespace bmeig
