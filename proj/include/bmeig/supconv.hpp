#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/parallel.hpp"
#include "bmeig/spectral.hpp"

namespace bmeig {

struct SupConvOptions {
    /// Scan every anchor candidate for every cell without thresholding or pruning.
    bool brute_force = false;
    /// Restrict anchors on core cells to u >= (delta / M^w)^(1/(1-w)), where u
    /// and w are the anchor operand and the partner's weight.
    bool threshold = true;
    double core_margin_cells = 3.0;
    int coarse_stride = 4;
    int tile = 8;
    int threads = 1;
};

/// Sampled sup-convolution on the interpolant domain. The point with the
/// smaller weight sits on grid nodes (the anchor) and its partner is sampled
/// bilinearly: for t >= 1/2 the anchor is x0 and x1 = (z - (1-t) x0) / t,
/// for t < 1/2 the anchor is x1 and x0 = (z - t x1) / (1-t). Either way
/// ubar(z) = u0(x0)^(1-t) u1(x1)^t.
struct SupConvField {
    GridDomain domain;
    double t = 0.0;
    Field ubar;
    /// Anchor node per cell, -1 where no admissible pair was found.
    std::vector<std::int64_t> argmax;
    bool anchor_is_x1 = false;
    double value_floor = 0.0;
    double value_ceiling = 0.0;
    /// Smallest anchor value admitted on the core.
    double candidate_floor = 0.0;
    double core_margin = 0.0;
    Mask core;
    std::vector<std::size_t> flagged;

    const Grid& grid() const { return domain.grid; }
    bool has_argmax(std::size_t c) const { return argmax[c] >= 0; }

    Vec2 anchor_index(std::size_t c) const {
        const auto n = static_cast<std::size_t>(argmax[c]);
        return {static_cast<double>(grid().col(n)), static_cast<double>(grid().row(n))};
    }
    Vec2 x0_index(std::size_t c) const {
        const Vec2 a = anchor_index(c);
        if (!anchor_is_x1) return a;
        return {(grid().col(c) - t * a.x) / (1.0 - t), (grid().row(c) - t * a.y) / (1.0 - t)};
    }
    Vec2 x1_index(std::size_t c) const {
        const Vec2 a = anchor_index(c);
        if (anchor_is_x1 || t == 0.0) return a;
        const double s = 1.0 - t;
        return {(grid().col(c) - s * a.x) / t, (grid().row(c) - s * a.y) / t};
    }
    Vec2 x0(std::size_t c) const {
        const Vec2 a = x0_index(c);
        return grid().point(a.x, a.y);
    }
    Vec2 x1(std::size_t c) const {
        const Vec2 a = x1_index(c);
        return grid().point(a.x, a.y);
    }
};

namespace detail {

/// 2-D sparse table for O(1) rectangular range maxima.
class MaxTable2D {
public:
    MaxTable2D() = default;
    MaxTable2D(std::vector<double> base, int w, int h) : w_(w), h_(h) {
        lx_ = 1;
        while ((1 << lx_) <= w) ++lx_;
        ly_ = 1;
        while ((1 << ly_) <= h) ++ly_;
        table_.assign(static_cast<std::size_t>(lx_) * ly_ * w * h, -std::numeric_limits<double>::infinity());
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) at(0, 0, i, j) = base[static_cast<std::size_t>(j) * w + i];
        for (int kx = 0; kx < lx_; ++kx) {
            for (int ky = 0; ky < ly_; ++ky) {
                if (kx == 0 && ky == 0) continue;
                for (int j = 0; j + (1 << ky) <= h; ++j) {
                    for (int i = 0; i + (1 << kx) <= w; ++i) {
                        if (kx > 0) {
                            at(kx, ky, i, j) = std::max(at(kx - 1, ky, i, j), at(kx - 1, ky, i + (1 << (kx - 1)), j));
                        } else {
                            at(kx, ky, i, j) = std::max(at(kx, ky - 1, i, j), at(kx, ky - 1, i, j + (1 << (ky - 1))));
                        }
                    }
                }
            }
        }
    }

    /// Max over [i0, i1] x [j0, j1], inclusive.
    double query(int i0, int i1, int j0, int j1) const {
        const int kx = log2_floor(i1 - i0 + 1), ky = log2_floor(j1 - j0 + 1);
        const int i2 = i1 - (1 << kx) + 1, j2 = j1 - (1 << ky) + 1;
        return std::max(std::max(at(kx, ky, i0, j0), at(kx, ky, i2, j0)),
                        std::max(at(kx, ky, i0, j2), at(kx, ky, i2, j2)));
    }

private:
    static int log2_floor(int v) {
        int k = 0;
        while ((2 << k) <= v) ++k;
        return k;
    }
    double& at(int kx, int ky, int i, int j) {
        return table_[((static_cast<std::size_t>(kx) * ly_ + ky) * h_ + j) * w_ + i];
    }
    double at(int kx, int ky, int i, int j) const {
        return table_[((static_cast<std::size_t>(kx) * ly_ + ky) * h_ + j) * w_ + i];
    }
    int w_ = 0, h_ = 0, lx_ = 0, ly_ = 0;
    std::vector<double> table_;
};

/// Exact maximization of (1-t) log u0(x0) + t log u1((z - (1-t) x0) / t)
/// over grid nodes x0, with u0, u1, t as passed in (the caller may swap the
/// operands). Ties go to the lexicographically smallest x0 (x index
/// first, then y). The pruned search visits tiles of x0 candidates in order
/// of an upper bound built from tile maxima of log u0 and range maxima of
/// log u1, so it returns the same maximizer as the full scan.
class SupSearch {
public:
    static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    SupSearch(const Grid& g, std::span<const double> u0, std::span<const double> u1, double t, int tile)
        : SupSearch(g, u0, u1, 1.0 - t, t, tile) {}

    /// Explicit weights, so that a swapped call keeps the caller's t exact.
    SupSearch(const Grid& g, std::span<const double> u0, std::span<const double> u1, double s, double t, int tile)
        : g_(g), u1_(u1), s_(s), t_(t), tile_(tile) {
        log0_.assign(g.size(), kNegInf);
        Field log1(g.size(), kNegInf);
        for (std::size_t c = 0; c < g.size(); ++c) {
            if (u0[c] > 0.0) log0_[c] = std::log(u0[c]);
            if (u1[c] > 0.0) log1[c] = std::log(u1[c]);
        }
        tw_ = (g.nx + tile - 1) / tile;
        th_ = (g.ny + tile - 1) / tile;
        tiles_.resize(static_cast<std::size_t>(tw_) * th_);
        std::vector<double> tile_max1(tiles_.size(), kNegInf);
        // Lexicographic order: i outer, j inner.
        for (int i = 0; i < g.nx; ++i) {
            for (int j = 0; j < g.ny; ++j) {
                const std::size_t c = g.index(i, j);
                const std::size_t b = static_cast<std::size_t>(j / tile) * tw_ + i / tile;
                tile_max1[b] = std::max(tile_max1[b], log1[c]);
                if (log0_[c] == kNegInf) continue;
                lex_.push_back(c);
                Tile& tl = tiles_[b];
                tl.nodes.push_back(c);
                tl.max_log0 = std::max(tl.max_log0, log0_[c]);
            }
        }
        rank_.assign(g.size(), std::numeric_limits<std::int64_t>::max());
        for (std::size_t r = 0; r < lex_.size(); ++r) rank_[lex_[r]] = static_cast<std::int64_t>(r);
        for (int bj = 0; bj < th_; ++bj)
            for (int bi = 0; bi < tw_; ++bi) {
                Tile& tl = tiles_[static_cast<std::size_t>(bj) * tw_ + bi];
                tl.i0 = bi * tile;
                tl.i1 = std::min(g.nx - 1, bi * tile + tile - 1);
                tl.j0 = bj * tile;
                tl.j1 = std::min(g.ny - 1, bj * tile + tile - 1);
                if (!tl.nodes.empty()) active_.push_back(static_cast<std::size_t>(bj) * tw_ + bi);
            }
        max1_ = MaxTable2D(std::move(tile_max1), tw_, th_);
    }

    double log0(std::size_t c) const { return log0_[c]; }

    double value(std::size_t x0, double zi, double zj) const {
        const double fi = (zi - s_ * g_.col(x0)) / t_;
        const double fj = (zj - s_ * g_.row(x0)) / t_;
        const double u = sample_bilinear(u1_, g_, fi, fj);
        if (!(u > 0.0)) return kNegInf;
        return s_ * log0_[x0] + t_ * std::log(u);
    }

    struct Best {
        double value = kNegInf;
        std::int64_t node = -1;
    };

    void offer(Best& best, std::size_t x0, double v) const {
        if (v > best.value || (v == best.value && v != kNegInf && rank_[x0] < rank_[best.node])) {
            best.value = v;
            best.node = static_cast<std::int64_t>(x0);
        }
    }

    Best brute_force(int zi, int zj) const {
        Best best;
        for (std::size_t c : lex_) offer(best, c, value(c, zi, zj));
        return best;
    }

    /// Pruned exact search. Candidates with log u0 < log_floor or failing
    /// the stride filter are skipped; `hint` seeds the incumbent.
    Best search(int zi, int zj, double log_floor, int stride, std::int64_t hint,
                std::vector<std::pair<double, std::size_t>>& scratch) const {
        Best best;
        auto eligible = [&](std::size_t c) {
            if (log0_[c] < log_floor) return false;
            return stride <= 1 || (g_.col(c) % stride == 0 && g_.row(c) % stride == 0);
        };
        if (hint >= 0 && log0_[hint] != kNegInf && eligible(hint)) offer(best, hint, value(hint, zi, zj));
        const std::size_t self = g_.index(zi, zj);
        if (log0_[self] != kNegInf && eligible(self)) offer(best, self, value(self, zi, zj));

        scratch.clear();
        for (std::size_t b : active_) {
            const Tile& tl = tiles_[b];
            if (tl.max_log0 < log_floor) continue;
            const double bound = tile_bound(tl, zi, zj);
            if (bound >= best.value && bound != kNegInf) scratch.emplace_back(bound, b);
        }
        std::sort(scratch.begin(), scratch.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
        });
        for (const auto& [bound, b] : scratch) {
            if (bound < best.value) break;
            for (std::size_t c : tiles_[b].nodes) {
                if (!eligible(c)) continue;
                offer(best, c, value(c, zi, zj));
            }
        }
        return best;
    }

private:
    struct Tile {
        std::vector<std::size_t> nodes;
        double max_log0 = kNegInf;
        int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
    };

    double tile_bound(const Tile& tl, int zi, int zj) const {
        // x1 ranges over (z - s x0) / t for x0 in the tile; bilinear sampling
        // touches floor(x1) and floor(x1) + 1.
        const double lo_i = (zi - s_ * tl.i1) / t_, hi_i = (zi - s_ * tl.i0) / t_;
        const double lo_j = (zj - s_ * tl.j1) / t_, hi_j = (zj - s_ * tl.j0) / t_;
        const int a0 = std::max(0, static_cast<int>(std::floor(lo_i)));
        const int a1 = std::min(g_.nx - 1, static_cast<int>(std::floor(hi_i)) + 1);
        const int b0 = std::max(0, static_cast<int>(std::floor(lo_j)));
        const int b1 = std::min(g_.ny - 1, static_cast<int>(std::floor(hi_j)) + 1);
        if (a0 > a1 || b0 > b1) return kNegInf;
        const double m1 = max1_.query(a0 / tile_, a1 / tile_, b0 / tile_, b1 / tile_);
        if (m1 == kNegInf) return kNegInf;
        const double bound = s_ * tl.max_log0 + t_ * m1;
        // Bilinear weights can overshoot the corner maximum by an ulp.
        return bound + 1e-12 * (1.0 + std::abs(bound));
    }

    const Grid& g_;
    std::span<const double> u1_;
    double s_, t_;
    int tile_;
    int tw_ = 0, th_ = 0;
    Field log0_;
    std::vector<Tile> tiles_;
    std::vector<std::size_t> active_;
    std::vector<std::size_t> lex_;
    std::vector<std::int64_t> rank_;
    MaxTable2D max1_;
};

inline double field_max(std::span<const double> f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, v);
    return m;
}

} // namespace detail

/// Sup-convolution of two eigenfunctions over the Minkowski interpolant `dt`.
inline SupConvField sup_convolve(const EigenPair& e0, const EigenPair& e1, DeformationParam t_param,
                                 const GridDomain& dt, const SupConvOptions& opts = {}) {
    require(e0.grid == e1.grid && e0.grid == dt.grid, ErrorKind::GridMismatch,
            "sup-convolution operands must share a grid");
    const Grid& g = dt.grid;
    const double t = t_param.value();
    SupConvField f;
    f.domain = dt;
    f.t = t;
    f.ubar.assign(g.size(), 0.0);
    f.argmax.assign(g.size(), -1);
    f.value_ceiling = std::max(detail::field_max(e0.u), detail::field_max(e1.u));
    f.core_margin = opts.core_margin_cells * g.h;
    f.core.assign(g.size(), 0);
    for (std::size_t c = 0; c < g.size(); ++c) f.core[c] = dt.inside[c] && dt.phi[c] <= -f.core_margin ? 1 : 0;

    auto finish_floor = [&] {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < g.size(); ++c)
            if (f.core[c]) lo = std::min(lo, f.ubar[c]);
        f.value_floor = std::isfinite(lo) ? lo : 0.0;
    };

    if (t == 0.0 || t == 1.0) {
        const Field& src = t == 0.0 ? e0.u : e1.u;
        for (std::size_t c = 0; c < g.size(); ++c) {
            if (!dt.inside[c]) continue;
            f.ubar[c] = src[c];
            if (src[c] > 0.0) {
                f.argmax[c] = static_cast<std::int64_t>(c);
            } else {
                f.flagged.push_back(c);
            }
        }
        finish_floor();
        return f;
    }

    // The anchor is the point with the smaller weight min(t, 1-t); its node
    // spacing then moves z by at most that fraction of a cell.
    f.anchor_is_x1 = t < 0.5;
    const double w = f.anchor_is_x1 ? 1.0 - t : t;
    const detail::SupSearch search(g, f.anchor_is_x1 ? e1.u : e0.u, f.anchor_is_x1 ? e0.u : e1.u,
                                   f.anchor_is_x1 ? t : 1.0 - t, w, std::max(opts.tile, 1));
    constexpr double neg_inf = detail::SupSearch::kNegInf;
    const int threads = std::max(opts.threads, 1);

    double log_floor = neg_inf;
    if (!opts.brute_force && opts.threshold) {
        // Coarse pass: a stride-restricted search bounds ubar from below on
        // the core, which yields a valid delta for the candidate threshold.
        std::vector<double> row_min(g.ny, std::numeric_limits<double>::infinity());
        parallel_for(0, g.ny, threads, [&](int j) {
            std::vector<std::pair<double, std::size_t>> scratch;
            std::int64_t hint = -1;
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t c = g.index(i, j);
                if (!f.core[c]) continue;
                const auto best = search.search(i, j, neg_inf, opts.coarse_stride, hint, scratch);
                hint = best.node;
                row_min[j] = std::min(row_min[j], best.value);
            }
        });
        const double log_delta = *std::min_element(row_min.begin(), row_min.end());
        if (std::isfinite(log_delta)) {
            log_floor = (log_delta - w * std::log(f.value_ceiling)) / (1.0 - w);
            f.candidate_floor = std::exp(log_floor);
        }
    }

    std::vector<std::vector<std::size_t>> row_flags(g.ny);
    parallel_for(0, g.ny, threads, [&](int j) {
        std::vector<std::pair<double, std::size_t>> scratch;
        std::int64_t hint = -1;
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!dt.inside[c]) continue;
            detail::SupSearch::Best best;
            if (opts.brute_force) {
                best = search.brute_force(i, j);
            } else {
                best = search.search(i, j, f.core[c] ? log_floor : neg_inf, 1, hint, scratch);
            }
            if (best.node < 0 || best.value == neg_inf) {
                row_flags[j].push_back(c);
                continue;
            }
            hint = best.node;
            f.argmax[c] = best.node;
            f.ubar[c] = std::exp(best.value);
        }
    });
    for (const auto& r : row_flags) f.flagged.insert(f.flagged.end(), r.begin(), r.end());
    finish_floor();
    return f;
}

struct OptimalPair {
    std::size_t cell = 0;
    Vec2 z, x0, x1;
    Vec2 x0_index, x1_index;
    double value = 0.0;
};

/// Stored decompositions for sampled core cells, checked for discrete
/// interiority: both points at signed distance <= -h from their boundaries.
inline std::vector<OptimalPair> optimal_pairs(const SupConvField& f, const GridDomain& d0, const GridDomain& d1,
                                              std::span<const std::size_t> sample) {
    const Grid& g = f.grid();
    std::vector<OptimalPair> out;
    out.reserve(sample.size());
    for (std::size_t c : sample) {
        require(c < g.size() && f.domain.inside[c] && f.domain.phi[c] <= -3.0 * g.h, ErrorKind::PreconditionViolated,
                "sampled cell is not in the interior core");
        require(f.has_argmax(c), ErrorKind::InteriorityViolation, "core cell has no admissible decomposition");
        OptimalPair p;
        p.cell = c;
        p.z = g.point(c);
        p.x0_index = f.x0_index(c);
        p.x1_index = f.x1_index(c);
        p.x0 = f.x0(c);
        p.x1 = f.x1(c);
        p.value = f.ubar[c];
        const double phi0 = sample_bilinear(d0.phi, g, p.x0_index.x, p.x0_index.y);
        const double phi1 = sample_bilinear(d1.phi, g, p.x1_index.x, p.x1_index.y);
        if (phi0 > -g.h || phi1 > -g.h) {
            throw Error(ErrorKind::InteriorityViolation, "optimal pair within one cell of a boundary at z = (" +
                                                             std::to_string(p.z.x) + ", " + std::to_string(p.z.y) + ")");
        }
        out.push_back(p);
    }
    return out;
}

/// Same partner construction for an arbitrary (possibly off-grid) x0.
inline OptimalPair shifted_pair(const OptimalPair& p, const Grid& g, double t, Vec2 x0_offset) {
    OptimalPair q = p;
    q.x0 = p.x0 + x0_offset;
    q.x1 = (1.0 / t) * (p.z - (1.0 - t) * q.x0);
    q.x0_index = g.to_index(q.x0);
    q.x1_index = g.to_index(q.x1);
    return q;
}

struct GradientIdentityResidual {
    /// |grad log u0(x0) - grad log u1(x1)| / (1 + |grad log u0(x0)|)
    double pair = 0.0;
    /// Largest deviation of grad log ubar(z) from either side, same scaling.
    double three_way = 0.0;
};

/// First-order optimality residual at a decomposition. Raises
/// ResidualUnreliable where either value is below 10 delta.
inline GradientIdentityResidual gradient_identity_residual(const OptimalPair& p, const EigenPair& e0,
                                                           const EigenPair& e1, const SupConvField& f) {
    const Grid& g = e0.grid;
    const double u0 = sample_bilinear(e0.u, g, p.x0_index.x, p.x0_index.y);
    const double u1 = sample_bilinear(e1.u, g, p.x1_index.x, p.x1_index.y);
    const double floor = 10.0 * f.value_floor;
    if (!(u0 >= floor && u1 >= floor && u0 > 0.0 && u1 > 0.0)) {
        throw Error(ErrorKind::ResidualUnreliable, "eigenfunction values below 10 delta at the pair");
    }
    const Vec2 g0 = (1.0 / u0) * sample_gradient(e0.u, g, p.x0_index);
    const Vec2 g1 = (1.0 / u1) * sample_gradient(e1.u, g, p.x1_index);
    GradientIdentityResidual r;
    const double scale = 1.0 + norm(g0);
    r.pair = norm(g0 - g1) / scale;
    const int zi = g.col(p.cell), zj = g.row(p.cell);
    const double ub = f.ubar[p.cell];
    if (ub > 0.0) {
        const Vec2 gb{gradient_component(f.ubar, g, nullptr, zi, zj, 1, 0) / ub,
                      gradient_component(f.ubar, g, nullptr, zi, zj, 0, 1) / ub};
        r.three_way = std::max(norm(gb - g0), norm(gb - g1)) / scale;
    }
    return r;
}

/// max |w_a - w_b| / h over all grid edges (the field is zero outside).
inline double discrete_lipschitz(std::span<const double> w, const Grid& g) {
    double m = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (i + 1 < g.nx) m = std::max(m, std::abs(w[c + 1] - w[c]));
            if (j + 1 < g.ny) m = std::max(m, std::abs(w[c + g.nx] - w[c]));
        }
    }
    return m / g.h;
}

inline double lipschitz_estimate(const SupConvField& f) { return discrete_lipschitz(f.ubar, f.grid()); }

struct SemiconvexityProbe {
    /// Negated smallest centred second difference on the core.
    double lambda_probe = 0.0;
    double margin = 0.0;
    std::size_t cells = 0;
    std::size_t worst_cell = 0;
    int worst_direction = 0;
};

/// Centred second differences along (1,0), (0,1), (1,1), (1,-1), each divided
/// by the squared step length, over nodes at distance >= margin from the
/// boundary.
inline SemiconvexityProbe semiconvexity_probe(std::span<const double> w, const GridDomain& d, double margin) {
    const Grid& g = d.grid;
    require(margin >= 3.0 * g.h * (1.0 - 1e-12), ErrorKind::PreconditionViolated, "probe margin must be at least 3h");
    constexpr int di[4] = {1, 0, 1, 1};
    constexpr int dj[4] = {0, 1, 1, -1};
    SemiconvexityProbe out;
    out.margin = margin;
    double most_negative = std::numeric_limits<double>::infinity();
    for (int j = 1; j + 1 < g.ny; ++j) {
        for (int i = 1; i + 1 < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!d.inside[c] || d.phi[c] > -margin) continue;
            ++out.cells;
            for (int k = 0; k < 4; ++k) {
                const double step2 = (di[k] * di[k] + dj[k] * dj[k]) * g.h * g.h;
                const double d2 =
                    (w[g.index(i + di[k], j + dj[k])] + w[g.index(i - di[k], j - dj[k])] - 2.0 * w[c]) / step2;
                if (d2 < most_negative) {
                    most_negative = d2;
                    out.worst_cell = c;
                    out.worst_direction = k;
                }
            }
        }
    }
    require(out.cells > 0, ErrorKind::CoreEmpty, "no cells at the requested margin");
    out.lambda_probe = -most_negative;
    return out;
}

inline SemiconvexityProbe semiconvexity_probe(const SupConvField& f, double margin) {
    return semiconvexity_probe(f.ubar, f.domain, margin);
}

/// Discrete Gaussian smoothing with standard deviation epsilon / 2, truncated
/// at radius epsilon (per axis) and normalized to unit mass.
struct MollifiedField {
    Field values;
    double epsilon = 0.0;
    double sigma = 0.0;
    int radius = 0;
};

inline MollifiedField mollify(std::span<const double> w, const Grid& g, double epsilon) {
    MollifiedField m;
    m.epsilon = epsilon;
    m.sigma = 0.5 * epsilon;
    m.radius = std::max(1, static_cast<int>(std::ceil(epsilon / g.h - 1e-9)));
    std::vector<double> kernel(2 * m.radius + 1);
    double mass = 0.0;
    for (int k = -m.radius; k <= m.radius; ++k) {
        const double x = k * g.h;
        kernel[k + m.radius] = std::exp(-x * x / (2.0 * m.sigma * m.sigma));
        mass += kernel[k + m.radius];
    }
    for (double& v : kernel) v /= mass;
    Field tmp(g.size(), 0.0);
    m.values.assign(g.size(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double acc = 0.0;
            for (int k = -m.radius; k <= m.radius; ++k)
                if (i + k >= 0 && i + k < g.nx) acc += kernel[k + m.radius] * w[g.index(i + k, j)];
            tmp[g.index(i, j)] = acc;
        }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double acc = 0.0;
            for (int k = -m.radius; k <= m.radius; ++k)
                if (j + k >= 0 && j + k < g.ny) acc += kernel[k + m.radius] * tmp[g.index(i, j + k)];
            m.values[g.index(i, j)] = acc;
        }
    return m;
}

inline MollifiedField mollify(const SupConvField& f, double epsilon) { return mollify(f.ubar, f.grid(), epsilon); }

struct IbpResult {
    double lhs = 0.0;        ///< sum |grad w|^2 h^2 over edges inside the core
    double rhs = 0.0;        ///< -sum w Laplacian(w) h^2 over the core
    double flux = 0.0;       ///< exact discrete boundary term, lhs = rhs + flux
    double flux_bound = 0.0; ///< Lipschitz * sup_{core boundary} |w| * perimeter
    double lipschitz = 0.0;
    std::size_t core_cells = 0;

    bool holds(double rel_slack) const { return lhs <= rhs + flux_bound + rel_slack * lhs; }
};

/// Integration-by-parts diagnostic on the mollified field over the core of
/// cells at distance >= epsilon from the boundary.
inline IbpResult ibp_check(std::span<const double> w_raw, const GridDomain& d, double epsilon) {
    const Grid& g = d.grid;
    require(epsilon >= 2.0 * g.h * (1.0 - 1e-12), ErrorKind::PreconditionViolated,
            "mollification radius must be at least 2h");
    const MollifiedField m = mollify(w_raw, g, epsilon);
    const Field& w = m.values;
    Mask core(g.size(), 0);
    IbpResult r;
    for (std::size_t c = 0; c < g.size(); ++c) {
        core[c] = d.inside[c] && d.phi[c] <= -epsilon ? 1 : 0;
        r.core_cells += core[c];
    }
    require(r.core_cells > 0, ErrorKind::CoreEmpty, "integration-by-parts core is empty");
    r.lipschitz = discrete_lipschitz(w, g);
    double sup_boundary = 0.0;
    std::size_t boundary_edges = 0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!core[c]) continue;
            double lap = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int a = i + kNeighborDi[k], b = j + kNeighborDj[k];
                const std::size_t n = g.index(a, b);
                const double diff = w[n] - w[c];
                lap += diff;
                if (core[n]) {
                    if (k == 0 || k == 2) r.lhs += diff * diff;
                } else {
                    r.flux += w[c] * diff;
                    sup_boundary = std::max(sup_boundary, std::abs(w[c]));
                    ++boundary_edges;
                }
            }
            r.rhs -= w[c] * lap;
        }
    }
    r.flux_bound = r.lipschitz * sup_boundary * static_cast<double>(boundary_edges) * g.h;
    return r;
}

inline IbpResult ibp_check(const SupConvField& f, double epsilon) { return ibp_check(f.ubar, f.domain, epsilon); }

} // namespace bmeig
