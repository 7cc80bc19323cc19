#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "bmeig/geometry.hpp"

using namespace bmeig;

namespace {

constexpr double pi = std::numbers::pi;

GridDomain without_source(GridDomain d) {
    d.source.reset();
    return d;
}

std::size_t inside_count(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m) n += v;
    return n;
}

// Largest distance (in cells) from a node in the symmetric difference of two
// masks to the boundary of `ref`.
double symdiff_depth(const GridDomain& a, const GridDomain& ref) {
    double worst = 0.0;
    for (std::size_t c = 0; c < a.grid.size(); ++c)
        if (a.inside[c] != ref.inside[c]) worst = std::max(worst, std::abs(ref.phi[c]) / ref.grid.h);
    return worst;
}

// Snapped pairwise combination, one pair at a time.
Mask brute_force_interpolant(const Grid& g, const Mask& m0, const Mask& m1, double t) {
    Mask out(g.size(), 0);
    std::vector<std::pair<int, int>> a, b;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (m0[g.index(i, j)]) a.emplace_back(i, j);
            if (m1[g.index(i, j)]) b.emplace_back(i, j);
        }
    for (auto [i0, j0] : a)
        for (auto [i1, j1] : b) {
            const int zi = static_cast<int>(std::floor((1 - t) * i0 + t * i1 + 0.5));
            const int zj = static_cast<int>(std::floor((1 - t) * j0 + t * j1 + 0.5));
            out[g.index(zi, zj)] = 1;
        }
    return out;
}

} // namespace

TEST(DeformationParam, RejectsOutOfRange) {
    EXPECT_NO_THROW(DeformationParam(0.0));
    EXPECT_NO_THROW(DeformationParam(1.0));
    EXPECT_THROW(DeformationParam(-0.1), Error);
    EXPECT_THROW(DeformationParam(1.5), Error);
    EXPECT_THROW(DeformationParam(std::nan("")), Error);
}

TEST(Grid, CoveringIsAlignedWithMargin) {
    const Grid g = Grid::covering(BBox{{-0.3, 0.1}, {1.2, 0.9}}, 0.125);
    EXPECT_NEAR(std::remainder(g.origin.x, g.h), 0.0, 1e-15);
    EXPECT_NEAR(std::remainder(g.origin.y, g.h), 0.0, 1e-15);
    EXPECT_LE(g.origin.x, -0.3 - 2 * g.h + 1e-12);
    EXPECT_GE(g.bounds().hi.x, 1.2 + 2 * g.h - 1e-12);
    EXPECT_THROW(Grid::covering(BBox{{0, 0}, {1, 1}}, 0.1, 1), Error);
}

TEST(Rasterize, DiskAreaMatchesPi) {
    const double h = 1.0 / 64;
    const GridDomain d = rasterize(Disk{{0, 0}, 1}, Grid::covering(BBox{{-1, -1}, {1, 1}}, h));
    EXPECT_NEAR(d.count() * h * h, pi, 0.02 * pi);
    for (std::size_t c = 0; c < d.grid.size(); ++c) EXPECT_EQ(d.inside[c] != 0, d.phi[c] < 0.0);
}

TEST(Rasterize, RejectsDegenerateAndUncoveredShapes) {
    const Grid g = Grid::covering(BBox{{0, 0}, {1, 1}}, 0.1);
    EXPECT_THROW(rasterize(Rectangle{{0, 0}, 0.0, 1.0}, g), Error);
    EXPECT_THROW(rasterize(Disk{{0, 0}, 5.0}, g), Error);
    try {
        rasterize(Disk{{0.55, 0.55}, 0.01}, g);
        FAIL() << "expected DomainEmpty";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainEmpty);
    }
}

TEST(Rasterize, DisconnectedMaskRejected) {
    const Grid g = Grid::covering(BBox{{0, 0}, {1, 1}}, 0.1);
    Mask m(g.size(), 0);
    m[g.index(3, 3)] = 1;
    m[g.index(8, 8)] = 1;
    try {
        domain_from_mask(g, m);
        FAIL() << "expected DomainDisconnected";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainDisconnected);
    }
}

TEST(Rasterize, AnnulusSectorAreaAgainstMonteCarlo) {
    const AnnulusSector s{{0, 0}, 1.0, 2.0, 0.3, 0.05};
    const double h = 1.0 / 64;
    const GridDomain d = rasterize(s, Grid::covering(bounding_box(s), h));
    // Monte-Carlo area of the unsmoothed sector 1 < r < 2, gap < theta < 2 pi.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const int n = 400000;
    int hits = 0;
    for (int k = 0; k < n; ++k) {
        const double x = u(rng), y = u(rng);
        const double r = std::hypot(x, y);
        double th = std::atan2(y, x);
        if (th < 0) th += 2 * pi;
        if (r > 1 && r < 2 && th > s.gap) ++hits;
    }
    const double mc = 16.0 * hits / n;
    EXPECT_NEAR(mc, (pi - s.gap / 2) * 3, 0.02 * mc);
    EXPECT_NEAR(d.count() * h * h, mc, 0.05 * mc);
    // Fine-grid quadrature of the smoothed set agrees more tightly.
    const Grid fine = Grid::covering(bounding_box(s), h / 4);
    std::size_t fine_count = 0;
    for (int j = 0; j < fine.ny; ++j)
        for (int i = 0; i < fine.nx; ++i) fine_count += signed_distance(s, fine.point(i, j)) < 0.0;
    EXPECT_NEAR(d.count() * h * h, fine_count * fine.h * fine.h, 0.01 * mc);
}

TEST(Minkowski, SquareWithItselfIsUnchanged) {
    const ShapeSpec sq = Rectangle{{0, 0}, 1, 1};
    const GridDomain d = rasterize(sq, Grid::covering(bounding_box(sq), 1.0 / 32));
    const GridDomain m = minkowski_interpolate(d, d, DeformationParam(0.5));
    EXPECT_EQ(m.inside, d.inside);
    const GridDomain mm = minkowski_interpolate(without_source(d), without_source(d), DeformationParam(0.5));
    EXPECT_EQ(mm.inside, d.inside);
}

TEST(Minkowski, RectanglePairMatchesDoubleResolutionDilation) {
    const ShapeSpec a = Rectangle{{0, 0}, 2, 1}, b = Rectangle{{0, 0}, 1, 2};
    const double h = 1.0 / 16;
    const Grid g = Grid::covering(hull_box(a, b), h);
    const GridDomain dt =
        minkowski_interpolate(rasterize(a, g), rasterize(b, g), DeformationParam(0.5));
    // Oracle: dilation of the two masks at h/2, sampled back at the grid nodes.
    const Grid fine = Grid::covering(g.bounds(), h / 2);
    Mask fa(fine.size()), fb(fine.size());
    for (int j = 0; j < fine.ny; ++j)
        for (int i = 0; i < fine.nx; ++i) {
            const Vec2 p = fine.point(i, j);
            fa[fine.index(i, j)] = p.x > 0 && p.x < 2 && p.y > 0 && p.y < 1;
            fb[fine.index(i, j)] = p.x > 0 && p.x < 1 && p.y > 0 && p.y < 2;
        }
    const Mask fm = brute_force_interpolant(fine, fa, fb, 0.5);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 p = g.point(i, j);
            const Vec2 fi = fine.to_index(p);
            const bool oracle = fm[fine.index(static_cast<int>(std::lround(fi.x)), static_cast<int>(std::lround(fi.y)))];
            const bool got = dt.in(i, j);
            if (oracle != got) {
                // Disagreement allowed only within one cell of a face of [0, 1.5]^2.
                const double face = std::min({std::abs(p.x), std::abs(p.x - 1.5), std::abs(p.y), std::abs(p.y - 1.5)});
                EXPECT_LE(face, h + 1e-12) << "at " << p.x << ", " << p.y;
            }
            const bool analytic = p.x > 0 && p.x < 1.5 && p.y > 0 && p.y < 1.5;
            EXPECT_EQ(got, analytic) << "at " << p.x << ", " << p.y;
        }
}

TEST(Minkowski, MaskPathMatchesBruteForceOnNonconvexOperands) {
    const AnnulusSector s{{0, 0}, 1.0, 2.0, 0.4, 0.1};
    const double h = 1.0 / 8;
    const Grid g = Grid::covering(BBox{{-2, -2}, {2, 2}}, h);
    const GridDomain d0 = without_source(rasterize(s, g));
    const GridDomain d1 = without_source(rasterize(Disk{{0.5, 0.25}, 1.2}, g));
    for (double t : {0.15, 0.5, 0.8}) {
        const GridDomain dt = minkowski_interpolate(d0, d1, DeformationParam(t));
        EXPECT_EQ(dt.inside, brute_force_interpolant(g, d0.inside, d1.inside, t)) << "t = " << t;
    }
}

TEST(Minkowski, ConvexPathMatchesSupportFunctionOracle) {
    // Disk + polygon: z is inside iff <z, u> < (1-t) h_D(u) + t h_P(u) for all u.
    const ShapeSpec a = Disk{{0.2, 0.1}, 0.7};
    const ShapeSpec b = ConvexPolygon{{{-1, -0.5}, {1, -0.7}, {0.4, 1.1}}};
    const Grid g = Grid::covering(hull_box(a, b), 1.0 / 16);
    const double t = 0.35;
    const GridDomain dt = minkowski_interpolate(rasterize(a, g), rasterize(b, g), DeformationParam(t));
    const std::vector<Vec2> tri = std::get<ConvexPolygon>(b).vertices;
    std::size_t ambiguous = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 z = g.point(i, j);
            double worst = -1e300;
            for (int k = 0; k < 20000; ++k) {
                const double th = 2 * pi * k / 20000;
                const Vec2 u{std::cos(th), std::sin(th)};
                double hp = -1e300;
                for (Vec2 v : tri) hp = std::max(hp, dot(v, u));
                const double hd = dot(Vec2{0.2, 0.1}, u) + 0.7;
                worst = std::max(worst, dot(z, u) - ((1 - t) * hd + t * hp));
            }
            if (std::abs(worst) < 1e-6) {
                ++ambiguous;
                continue;
            }
            EXPECT_EQ(dt.in(i, j), worst < 0) << "at " << z.x << ", " << z.y;
        }
    EXPECT_LT(ambiguous, 3u);
}

TEST(Minkowski, UnitDiskCenterIsSumOfBoundaryPoints) {
    const ShapeSpec disk = Disk{{0, 0}, 1};
    const double h = 1.0 / 32;
    const Grid g = Grid::covering(bounding_box(disk), h);
    const GridDomain d = rasterize(disk, g);
    const GridDomain dt = minkowski_interpolate(d, d, DeformationParam(0.5));
    const Vec2 o = g.to_index({0, 0});
    const std::size_t center = g.index(static_cast<int>(std::lround(o.x)), static_cast<int>(std::lround(o.y)));
    EXPECT_TRUE(dt.inside[center]);
    EXPECT_LT(dt.phi[center], -0.9);
    // (-1, 0) and (1, 0) are (nearly) boundary nodes whose midpoint is the centre.
    const Mask sums = boundary_sum_mask(d, d, DeformationParam(0.5));
    EXPECT_TRUE(sums[center]);
}

TEST(BoundaryInclusion, ConvexPairsStayWithinTwoCells) {
    const double h = 1.0 / 32;
    const ShapeSpec sq = Rectangle{{0, 0}, 1, 1};
    const Grid gs = Grid::covering(bounding_box(sq), h);
    const GridDomain ds = rasterize(sq, gs);
    for (double t : {0.0, 0.3, 0.5, 1.0}) EXPECT_LE(boundary_inclusion_check(ds, ds, DeformationParam(t)), 2 * h);

    const ShapeSpec disk = Disk{{0, 0}, 1};
    const GridDomain dd = rasterize(disk, Grid::covering(bounding_box(disk), h));
    EXPECT_LE(boundary_inclusion_check(dd, dd, DeformationParam(0.5)), 2 * h);

    const ShapeSpec a = Rectangle{{0, 0}, 2, 1}, b = Rectangle{{0, 0}, 1, 2};
    const Grid g = Grid::covering(hull_box(a, b), h);
    const GridDomain d0 = rasterize(a, g), d1 = rasterize(b, g);
    const double got = boundary_inclusion_check(d0, d1, DeformationParam(0.5));
    EXPECT_LE(got, 2 * h);
    // Oracle: brute-force distance from every interpolant boundary node to the
    // snapped pairwise sums of boundary nodes.
    const GridDomain dt = minkowski_interpolate(d0, d1, DeformationParam(0.5));
    std::set<std::pair<int, int>> sums;
    for (std::size_t p : boundary_nodes(d0))
        for (std::size_t q : boundary_nodes(d1))
            sums.insert({static_cast<int>(std::floor(0.5 * (g.col(p) + g.col(q)) + 0.5)),
                         static_cast<int>(std::floor(0.5 * (g.row(p) + g.row(q)) + 0.5))});
    double oracle = 0.0;
    for (std::size_t z : boundary_nodes(dt)) {
        double best = 1e300;
        for (auto [i, j] : sums) best = std::min(best, std::hypot(i - g.col(z), j - g.row(z)));
        oracle = std::max(oracle, best * h);
    }
    EXPECT_NEAR(got, oracle, 1e-12);
}

TEST(IsConvex, Benchmarks) {
    const double h = 1.0 / 16;
    const ShapeSpec disk = Disk{{0, 0}, 1};
    EXPECT_TRUE(is_convex(rasterize(disk, Grid::covering(bounding_box(disk), h))));
    const ShapeSpec sq = Rectangle{{0, 0}, 1.5, 1.5};
    EXPECT_TRUE(is_convex(rasterize(sq, Grid::covering(bounding_box(sq), h))));
    const ShapeSpec ann = AnnulusSector{{0, 0}, 1, 2, 0.3, 0.2};
    EXPECT_FALSE(is_convex(rasterize(ann, Grid::covering(bounding_box(ann), h))));
}

TEST(MinkowskiProperties, IdempotentOnConvexDomains) {
    const double h = 1.0 / 32;
    for (const ShapeSpec& s : {ShapeSpec{Disk{{0.1, -0.2}, 1}}, ShapeSpec{Ellipse{{0, 0}, {1.2, 0.6}}},
                               ShapeSpec{ConvexPolygon{{{0, 0}, {1, 0}, {1.3, 0.8}, {0.2, 1}}}}}) {
        const GridDomain d = rasterize(s, Grid::covering(bounding_box(s), h));
        for (double t : {0.3, 0.5, 0.7}) {
            EXPECT_LE(symdiff_depth(minkowski_interpolate(d, d, DeformationParam(t)), d), 1.0 + 1e-9);
            EXPECT_LE(symdiff_depth(minkowski_interpolate(without_source(d), without_source(d), DeformationParam(t)), d),
                      1.0 + 1e-9);
        }
    }
}

TEST(MinkowskiProperties, MonotoneInOperands) {
    const double h = 1.0 / 16;
    const ShapeSpec small = Rectangle{{0.25, 0.25}, 0.5, 0.5}, big = Rectangle{{0, 0}, 1, 1.2};
    const ShapeSpec other = Disk{{1.5, 0.5}, 0.6};
    const Grid g = Grid::covering(hull_box(big, other), h);
    const GridDomain s = rasterize(small, g), b = rasterize(big, g), o = rasterize(other, g);
    for (double t : {0.2, 0.5, 0.9}) {
        for (bool analytic : {true, false}) {
            const auto pick = [&](const GridDomain& d) { return analytic ? d : without_source(d); };
            const GridDomain ms = minkowski_interpolate(pick(s), pick(o), DeformationParam(t));
            const GridDomain mb = minkowski_interpolate(pick(b), pick(o), DeformationParam(t));
            for (std::size_t c = 0; c < g.size(); ++c)
                if (ms.inside[c]) EXPECT_TRUE(mb.inside[c]) << "t = " << t;
        }
    }
}

TEST(MinkowskiProperties, EndpointsAreBitExact) {
    const ShapeSpec a = AnnulusSector{{0, 0}, 1, 2, 0.3, 0.1}, b = Disk{{0, 0}, 2};
    const Grid g = Grid::covering(hull_box(a, b), 1.0 / 16);
    const GridDomain d0 = rasterize(a, g), d1 = rasterize(b, g);
    const GridDomain m0 = minkowski_interpolate(d0, d1, DeformationParam(0.0));
    const GridDomain m1 = minkowski_interpolate(d0, d1, DeformationParam(1.0));
    EXPECT_EQ(m0.inside, d0.inside);
    EXPECT_EQ(m0.phi, d0.phi);
    EXPECT_EQ(m1.inside, d1.inside);
    EXPECT_EQ(m1.phi, d1.phi);
}

TEST(MinkowskiProperties, ReinterpolationOfConvexInterpolantsDoesNotShrink) {
    const double h = 1.0 / 32;
    const ShapeSpec a = Rectangle{{0, 0}, 2, 1}, b = Disk{{1, 1}, 0.8};
    const Grid g = Grid::covering(hull_box(a, b), h);
    const GridDomain d0 = rasterize(a, g), d1 = rasterize(b, g);
    const double t0 = 0.2, t1 = 0.8, tau = 0.5;
    const GridDomain m0 = minkowski_interpolate(d0, d1, DeformationParam(t0));
    const GridDomain m1 = minkowski_interpolate(d0, d1, DeformationParam(t1));
    const GridDomain direct = minkowski_interpolate(d0, d1, DeformationParam((1 - tau) * t0 + tau * t1));
    const GridDomain re = minkowski_interpolate(m0, m1, DeformationParam(tau));
    for (std::size_t c = 0; c < g.size(); ++c)
        if (direct.inside[c] && !re.inside[c]) EXPECT_GE(direct.phi[c], -h - 1e-12);
}

TEST(MaskSignedDistance, InterfaceHalfwayBetweenNodes) {
    const Grid g = Grid::covering(BBox{{0, 0}, {1, 1}}, 0.125);
    Mask m(g.size(), 0);
    for (int j = 3; j <= 8; ++j)
        for (int i = 3; i <= 8; ++i) m[g.index(i, j)] = 1;
    const GridDomain d = domain_from_mask(g, m);
    EXPECT_DOUBLE_EQ(d.phi[g.index(3, 5)], -0.5 * g.h);
    EXPECT_DOUBLE_EQ(d.phi[g.index(2, 5)], 0.5 * g.h);
    EXPECT_DOUBLE_EQ(d.phi[g.index(5, 5)], -2.5 * g.h);
    EXPECT_EQ(inside_count(d.inside), 36u);
}
