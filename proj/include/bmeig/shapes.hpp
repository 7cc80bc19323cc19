#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/grid.hpp"

namespace bmeig {

struct Rectangle {
    Vec2 corner;
    double width = 0.0;
    double height = 0.0;
    friend bool operator==(const Rectangle&, const Rectangle&) = default;
};

struct Disk {
    Vec2 center;
    double radius = 0.0;
    friend bool operator==(const Disk&, const Disk&) = default;
};

struct Ellipse {
    Vec2 center;
    Vec2 semi_axes;
    friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

/// Vertices counterclockwise, strictly convex.
struct ConvexPolygon {
    std::vector<Vec2> vertices;
    friend bool operator==(const ConvexPolygon&, const ConvexPolygon&) = default;
};

/// Annulus r_inner < |x - center| < r_outer with the wedge 0 <= theta <= gap
/// removed, corners rounded by a quadratic smooth-max of radius `smoothing`.
struct AnnulusSector {
    Vec2 center;
    double r_inner = 1.0;
    double r_outer = 2.0;
    double gap = 0.3;
    double smoothing = 0.0;
    friend bool operator==(const AnnulusSector&, const AnnulusSector&) = default;
};

using ShapeSpec = std::variant<Rectangle, Disk, Ellipse, ConvexPolygon, AnnulusSector>;

namespace sdf {

inline double box(Vec2 p, Vec2 center, Vec2 half) {
    const double qx = std::abs(p.x - center.x) - half.x;
    const double qy = std::abs(p.y - center.y) - half.y;
    return std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) + std::min(std::max(qx, qy), 0.0);
}

inline double circle(Vec2 p, Vec2 center, double r) { return norm(p - center) - r; }

// Sign is exact; magnitude is the usual first-order approximation.
inline double ellipse(Vec2 p, Vec2 center, Vec2 r) {
    const Vec2 q = p - center;
    const double k0 = std::hypot(q.x / r.x, q.y / r.y);
    const double k1 = std::hypot(q.x / (r.x * r.x), q.y / (r.y * r.y));
    if (k1 == 0.0) return -std::min(r.x, r.y);
    return k0 * (k0 - 1.0) / k1;
}

inline double polygon(Vec2 p, const std::vector<Vec2>& v) {
    const std::size_t n = v.size();
    double d2 = dot(p - v[0], p - v[0]);
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 e = v[j] - v[i];
        const Vec2 w = p - v[i];
        const double s = std::clamp(dot(w, e) / dot(e, e), 0.0, 1.0);
        const Vec2 b = w - s * e;
        d2 = std::min(d2, dot(b, b));
        const bool c1 = p.y >= v[i].y;
        const bool c2 = p.y < v[j].y;
        const bool c3 = e.x * w.y > e.y * w.x;
        if ((c1 && c2 && c3) || (!c1 && !c2 && !c3)) inside = !inside;
    }
    return inside ? -std::sqrt(d2) : std::sqrt(d2);
}

inline double ray_distance(Vec2 p, Vec2 dir) {
    const double along = dot(p, dir);
    return along > 0.0 ? std::abs(cross(dir, p)) : norm(p);
}

/// Signed distance to the infinite wedge {0 < theta < gap} with apex at 0.
inline double wedge(Vec2 p, double gap) {
    const Vec2 d0{1.0, 0.0};
    const Vec2 d1{std::cos(gap), std::sin(gap)};
    const double dist = std::min(ray_distance(p, d0), ray_distance(p, d1));
    const bool inside = cross(d0, p) > 0.0 && cross(p, d1) > 0.0;
    return inside ? -dist : dist;
}

/// Quadratic smooth maximum; equals max(a, b) when |a - b| >= k.
inline double smooth_max(double a, double b, double k) {
    if (k <= 0.0) return std::max(a, b);
    const double m = std::max(k - std::abs(a - b), 0.0);
    return std::max(a, b) + m * m / (4.0 * k);
}

inline double annulus_sector(Vec2 p, const AnnulusSector& s) {
    const Vec2 q = p - s.center;
    const double mid = 0.5 * (s.r_inner + s.r_outer);
    const double half = 0.5 * (s.r_outer - s.r_inner);
    const double ring = std::abs(norm(q) - mid) - half;
    return smooth_max(ring, -wedge(q, s.gap), s.smoothing);
}

} // namespace sdf

inline double signed_distance(const ShapeSpec& spec, Vec2 p) {
    struct Visitor {
        Vec2 p;
        double operator()(const Rectangle& r) const {
            const Vec2 half{0.5 * r.width, 0.5 * r.height};
            return sdf::box(p, r.corner + half, half);
        }
        double operator()(const Disk& d) const { return sdf::circle(p, d.center, d.radius); }
        double operator()(const Ellipse& e) const { return sdf::ellipse(p, e.center, e.semi_axes); }
        double operator()(const ConvexPolygon& poly) const { return sdf::polygon(p, poly.vertices); }
        double operator()(const AnnulusSector& s) const { return sdf::annulus_sector(p, s); }
    };
    return std::visit(Visitor{p}, spec);
}

inline BBox bounding_box(const ShapeSpec& spec) {
    struct Visitor {
        BBox operator()(const Rectangle& r) const {
            return {r.corner, {r.corner.x + r.width, r.corner.y + r.height}};
        }
        BBox operator()(const Disk& d) const {
            return {{d.center.x - d.radius, d.center.y - d.radius}, {d.center.x + d.radius, d.center.y + d.radius}};
        }
        BBox operator()(const Ellipse& e) const {
            return {e.center - e.semi_axes, e.center + e.semi_axes};
        }
        BBox operator()(const ConvexPolygon& poly) const {
            BBox b{poly.vertices.front(), poly.vertices.front()};
            for (const Vec2& v : poly.vertices) b = b.merged({v, v});
            return b;
        }
        BBox operator()(const AnnulusSector& s) const {
            return {{s.center.x - s.r_outer, s.center.y - s.r_outer}, {s.center.x + s.r_outer, s.center.y + s.r_outer}};
        }
    };
    return std::visit(Visitor{}, spec);
}

/// True for the variants that describe convex sets.
inline bool is_convex_shape(const ShapeSpec& spec) { return !std::holds_alternative<AnnulusSector>(spec); }

/// Support function sup over the shape of <x, u>. Convex variants only.
inline double support(const ShapeSpec& spec, Vec2 u) {
    struct Visitor {
        Vec2 u;
        double operator()(const Rectangle& r) const {
            return dot(r.corner, u) + std::max(0.0, r.width * u.x) + std::max(0.0, r.height * u.y);
        }
        double operator()(const Disk& d) const { return dot(d.center, u) + d.radius * norm(u); }
        double operator()(const Ellipse& e) const {
            return dot(e.center, u) + std::hypot(e.semi_axes.x * u.x, e.semi_axes.y * u.y);
        }
        double operator()(const ConvexPolygon& poly) const {
            double best = dot(poly.vertices.front(), u);
            for (const Vec2& v : poly.vertices) best = std::max(best, dot(v, u));
            return best;
        }
        double operator()(const AnnulusSector&) const {
            throw Error(ErrorKind::InvalidParameter, "support function needs a convex shape");
        }
    };
    return std::visit(Visitor{u}, spec);
}

/// Outward unit edge normals of polygonal variants; empty for smooth ones.
inline std::vector<Vec2> edge_normals(const ShapeSpec& spec) {
    if (std::holds_alternative<Rectangle>(spec)) return {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    std::vector<Vec2> out;
    if (const auto* poly = std::get_if<ConvexPolygon>(&spec)) {
        const auto& v = poly->vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Vec2 e = v[(i + 1) % v.size()] - v[i];
            out.push_back((1.0 / norm(e)) * Vec2{e.y, -e.x});
        }
    }
    return out;
}

inline std::string shape_name(const ShapeSpec& spec) {
    constexpr const char* names[] = {"rectangle", "disk", "ellipse", "polygon", "annulus_sector"};
    return names[spec.index()];
}

/// Throws InvalidParameter when a parameter is outside its admissible range.
inline void validate(const ShapeSpec& spec) {
    auto positive = [](double v, const char* what) {
        require(std::isfinite(v) && v > 0.0, ErrorKind::InvalidParameter, std::string(what) + " must be positive");
    };
    struct Visitor {
        decltype(positive)& pos;
        void operator()(const Rectangle& r) const {
            pos(r.width, "rectangle width");
            pos(r.height, "rectangle height");
        }
        void operator()(const Disk& d) const { pos(d.radius, "disk radius"); }
        void operator()(const Ellipse& e) const {
            pos(e.semi_axes.x, "ellipse semi-axis");
            pos(e.semi_axes.y, "ellipse semi-axis");
        }
        void operator()(const ConvexPolygon& poly) const {
            const auto& v = poly.vertices;
            require(v.size() >= 3, ErrorKind::InvalidParameter, "polygon needs at least 3 vertices");
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Vec2 a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
                require(cross(b - a, c - b) > 0.0, ErrorKind::InvalidParameter,
                        "polygon must be strictly convex and counterclockwise");
            }
        }
        void operator()(const AnnulusSector& s) const {
            pos(s.r_inner, "annulus inner radius");
            require(s.r_outer > s.r_inner, ErrorKind::InvalidParameter, "annulus outer radius must exceed inner");
            require(s.gap > 0.0 && s.gap < std::numbers::pi / 2, ErrorKind::InvalidParameter,
                    "annulus gap must lie in (0, pi/2)");
            pos(s.smoothing, "annulus smoothing radius");
            require(s.smoothing < 0.25 * (s.r_outer - s.r_inner), ErrorKind::InvalidParameter,
                    "annulus smoothing must be below a quarter of the ring width");
        }
    };
    std::visit(Visitor{positive}, spec);
}

} // namespace bmeig
