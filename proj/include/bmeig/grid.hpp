#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bmeig/error.hpp"

namespace bmeig {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct BBox {
    Vec2 lo;
    Vec2 hi;

    BBox merged(const BBox& o) const {
        return {{std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y)},
                {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y)}};
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Node-centred uniform grid. Sample (i, j) sits at origin + (i h, j h);
/// fields are stored row-major with j as the slow index.
struct Grid {
    Vec2 origin;
    double h = 0.0;
    int nx = 0;
    int ny = 0;

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    int col(std::size_t c) const { return static_cast<int>(c % static_cast<std::size_t>(nx)); }
    int row(std::size_t c) const { return static_cast<int>(c / static_cast<std::size_t>(nx)); }
    bool in_range(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }

    Vec2 point(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
    Vec2 point(std::size_t c) const { return point(col(c), row(c)); }
    Vec2 point(double fi, double fj) const { return {origin.x + fi * h, origin.y + fj * h}; }

    /// Continuous index coordinates of a world point.
    Vec2 to_index(Vec2 p) const { return {(p.x - origin.x) / h, (p.y - origin.y) / h}; }

    BBox bounds() const { return {origin, point(nx - 1, ny - 1)}; }

    void validate() const {
        require(h > 0.0 && std::isfinite(h), ErrorKind::InvalidParameter, "grid spacing must be positive");
        require(nx > 0 && ny > 0, ErrorKind::InvalidParameter, "grid dimensions must be positive");
    }

    /// Smallest h-aligned grid whose nodes cover `box` with `margin` extra
    /// nodes on every side. World coordinate 0 is always a node.
    static Grid covering(const BBox& box, double h, int margin = 2) {
        require(h > 0.0 && std::isfinite(h), ErrorKind::InvalidParameter, "grid spacing must be positive");
        require(margin >= 2, ErrorKind::InvalidParameter, "grid margin must be at least 2 cells");
        const auto i_lo = static_cast<long>(std::floor(box.lo.x / h + 1e-9)) - margin;
        const auto j_lo = static_cast<long>(std::floor(box.lo.y / h + 1e-9)) - margin;
        const auto i_hi = static_cast<long>(std::ceil(box.hi.x / h - 1e-9)) + margin;
        const auto j_hi = static_cast<long>(std::ceil(box.hi.y / h - 1e-9)) + margin;
        Grid g;
        g.origin = {static_cast<double>(i_lo) * h, static_cast<double>(j_lo) * h};
        g.h = h;
        g.nx = static_cast<int>(i_hi - i_lo + 1);
        g.ny = static_cast<int>(j_hi - j_lo + 1);
        return g;
    }

    friend bool operator==(const Grid& a, const Grid& b) = default;
};

using Field = std::vector<double>;
using Mask = std::vector<std::uint8_t>;

/// Bilinear interpolation in index space; samples outside the grid read 0.
inline double sample_bilinear(std::span<const double> f, const Grid& g, double fi, double fj) {
    const double fl_i = std::floor(fi);
    const double fl_j = std::floor(fj);
    const int i0 = static_cast<int>(fl_i);
    const int j0 = static_cast<int>(fl_j);
    const double a = fi - fl_i;
    const double b = fj - fl_j;
    auto at = [&](int i, int j) { return g.in_range(i, j) ? f[g.index(i, j)] : 0.0; };
    return (1.0 - b) * ((1.0 - a) * at(i0, j0) + a * at(i0 + 1, j0)) +
           b * ((1.0 - a) * at(i0, j0 + 1) + a * at(i0 + 1, j0 + 1));
}

/// 4-neighbour offsets: +x, -x, +y, -y.
inline constexpr int kNeighborDi[4] = {1, -1, 0, 0};
inline constexpr int kNeighborDj[4] = {0, 0, 1, -1};

} // namespace bmeig
