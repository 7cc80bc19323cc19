// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "bmeig/bmeig.hpp"
#include "bmeig/io.hpp"

using namespace bmeig;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double kJ01 = 2.404825557695773;
const std::vector<double> kNineT = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
const ShapeSpec kSquare = Rectangle{{0, 0}, 1, 1};
const ShapeSpec kRectA = Rectangle{{0, 0}, 2, 1};
const ShapeSpec kRectB = Rectangle{{0, 0}, 1, 2};
const ShapeSpec kDisk1 = Disk{{0, 0}, 1};
const ShapeSpec kDisk2 = Disk{{0, 0}, 2};

int g_failures = 0;

struct Line {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
        if (!cond) {
            ok = false;
            detail += " [violated]";
        }
    }
};

void criterion(int n, const std::string& name, const std::function<void(Line&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    Line line;
    try {
        body(line);
    } catch (const std::exception& e) {
        line.ok = false;
        line.detail += std::string(line.detail.empty() ? "" : "; ") + "error: " + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!line.ok) ++g_failures;
    std::printf("%s %2d %s: %s (%.1f s)\n", line.ok ? "PASS" : "FAIL", n, name.c_str(), line.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string f(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Grid grid_for(const ShapeSpec& a, const ShapeSpec& b, double h) { return Grid::covering(hull_box(a, b), h); }

double eigenvalue(const ShapeSpec& s, double h, const PotentialSpec& v = PotentialSpec::zero()) {
    return smallest_eigenpair(rasterize(s, Grid::covering(bounding_box(s), h)), v).lambda;
}

/// Per-stage diagnostics on every trial function a BM run builds.
struct StageProbes {
    double worst_lipschitz_ratio = 0.0;
    bool ibp_ok = true;
    std::size_t stages = 0;
    void operator()(const BMStage& s) {
        if (!s.ubar) return;
        ++stages;
        const double bound = std::max(gradient_sup_norm(s.e0.u, s.d0.grid), gradient_sup_norm(s.e1.u, s.d1.grid));
        worst_lipschitz_ratio = std::max(worst_lipschitz_ratio, lipschitz_estimate(*s.ubar) / bound);
        ibp_ok = ibp_ok && ibp_check(*s.ubar, 4 * s.dt.grid.h).holds(1e-3);
    }
};

double min_variational(const BMReport& r) {
    double m = 1e300;
    for (const auto& row : r.rows) m = std::min(m, row.variational_margin);
    return m;
}

std::size_t variational_rows(const BMReport& r) {
    std::size_t n = 0;
    for (const auto& row : r.rows) n += !std::isnan(row.variational_margin);
    return n;
}

struct PairRun {
    GridDomain d0, d1, dt;
    EigenPair e0, e1;
    SupConvField f;
};

PairRun pair_run(const ShapeSpec& a, const ShapeSpec& b, double h, double t) {
    const Grid g = grid_for(a, b, h);
    PairRun r{rasterize(a, g), rasterize(b, g), {}, {}, {}, {}};
    r.dt = minkowski_interpolate(r.d0, r.d1, DeformationParam(t));
    r.e0 = smallest_eigenpair(r.d0, PotentialSpec::zero());
    r.e1 = a == b ? r.e0 : smallest_eigenpair(r.d1, PotentialSpec::zero());
    r.f = sup_convolve(r.e0, r.e1, DeformationParam(t), r.dt);
    return r;
}

std::string bm_csv(const BMReport& r) {
    std::ostringstream os;
    io::write_bm_csv(os, r);
    return os.str();
}

} // namespace

int main() {
    BMOptions full; // 100 variational trials per row, trial function on

    // Shared runs for criteria 2, 3, 4, 8, 10, 12.
    StageProbes rect_probes, disk_probes;
    BMReport rect, rect_coarse, disk_quad;
    std::string rect_error, disk_error;
    try {
        rect = verify_bm(kRectA, kRectB, PotentialSpec::zero(), kNineT, grid_for(kRectA, kRectB, 1.0 / 32), full,
                         std::ref(rect_probes));
        rect_coarse = verify_bm(kRectA, kRectB, PotentialSpec::zero(), kNineT, grid_for(kRectA, kRectB, 1.0 / 16), full);
    } catch (const std::exception& e) {
        rect_error = e.what();
    }
    try {
        disk_quad = verify_bm(kDisk1, kDisk2, PotentialSpec::quadratic(1.0), kNineT, grid_for(kDisk1, kDisk2, 1.0 / 32),
                              full, std::ref(disk_probes));
    } catch (const std::exception& e) {
        disk_error = e.what();
    }

    criterion(1, "eigensolver oracles", [](Line& l) {
        const double sq = 2 * pi * pi;
        double err[3];
        const double hs[3] = {1.0 / 32, 1.0 / 64, 1.0 / 128};
        for (int k = 0; k < 3; ++k) err[k] = std::abs(eigenvalue(kSquare, hs[k]) - sq);
        l.require(err[2] / sq <= 0.005, "square h=1/128 rel err " + f(err[2] / sq) + " <= 0.005");
        const double dk = kJ01 * kJ01;
        const double ed = std::abs(eigenvalue(kDisk1, 1.0 / 128) - dk) / dk;
        l.require(ed <= 0.01, "disk h=1/128 rel err " + f(ed) + " <= 0.01");
        const double order = std::min(std::log2(err[0] / err[1]), std::log2(err[1] / err[2]));
        l.require(order >= 1.8, "square convergence order " + f(order) + " >= 1.8");
    });

    criterion(2, "discrete variational principle", [&](Line& l) {
        l.require(rect_error.empty() && disk_error.empty(), "reports built" + rect_error + disk_error);
        const std::size_t rows = variational_rows(rect) + variational_rows(rect_coarse) + variational_rows(disk_quad);
        const double m = std::min({min_variational(rect), min_variational(rect_coarse), min_variational(disk_quad)});
        l.require(rows == 27, std::to_string(rows) + " rows x 100 trials");
        l.require(m >= -1e-6, "min R(w) - lambda_t " + f(m) + " >= -1e-6");
        double s1 = 1e300;
        for (const BMReport* r : {&rect, &rect_coarse, &disk_quad})
            for (const auto& row : r->rows) s1 = std::min(s1, row.slack1);
        l.require(s1 >= -1e-6, "min R(ubar) - lambda_t " + f(s1) + " >= -1e-6");
    });

    criterion(3, "chord chain on the rectangle pair", [&](Line& l) {
        l.require(rect_error.empty() && rect.rows.size() == 9, "report built" + rect_error);
        const BMRow& mid = rect.rows.at(4);
        const double exact_mid = 2 * pi * pi / 2.25;
        const double rel_mid = std::abs(mid.lambda_t - exact_mid) / exact_mid;
        l.require(rel_mid <= 0.01, "lambda_1/2 " + f(mid.lambda_t) + " vs " + f(exact_mid) + " rel " + f(rel_mid));
        const double chord = 5 * pi * pi / 4;
        double chord_err = 0.0, worst2 = 1e300, worst2c = 1e300;
        bool chain = true;
        const double allow = kChordAllowance * rect.h;
        for (const auto& row : rect.rows) {
            chord_err = std::max(chord_err, std::abs(row.chord - chord) / chord);
            chain = chain && row.lambda_t <= row.rayleigh_ubar + 1e-6 && row.rayleigh_ubar <= row.chord + allow;
            worst2 = std::min(worst2, row.slack2);
        }
        for (const auto& row : rect_coarse.rows) worst2c = std::min(worst2c, row.slack2);
        l.require(chord_err <= 0.01, "chord rel err vs 5 pi^2/4 " + f(chord_err));
        l.require(chain && rect.passed(), "lambda_t <= R(ubar) <= chord + C h at all 9 t");
        const double def_c = std::max(0.0, -worst2c), def_f = std::max(0.0, -worst2);
        l.require(def_f <= 0.5 * def_c + 1e-12, "slack2 deficit h=1/16 " + f(def_c) + " -> h=1/32 " + f(def_f) +
                                                    " (min slack2 " + f(worst2c) + ", " + f(worst2) + ")");
    });

    criterion(4, "chord chain with convex potential", [&](Line& l) {
        l.require(disk_error.empty() && disk_quad.rows.size() == 9, "report built" + disk_error);
        double worst = 1e300;
        for (const auto& row : disk_quad.rows) worst = std::min(worst, row.slack2);
        l.require(disk_quad.passed(), "disk(1)/disk(2), V=|x|^2, h=1/32: all 9 rows ok, min slack2 " + f(worst) +
                                          (disk_quad.failures.empty() ? "" : " " + disk_quad.failures.front()));
    });

    criterion(5, "log-concavity of the ground state", [](Line& l) {
        const double h = 1.0 / 64;
        const auto sq = verify_logconcavity(kSquare, PotentialSpec::zero(), Grid::covering(bounding_box(kSquare), h), 1000000);
        const auto dk = verify_logconcavity(kDisk1, PotentialSpec::zero(), Grid::covering(bounding_box(kDisk1), h), 1000000);
        const auto qd = verify_logconcavity(kSquare, PotentialSpec::quadratic(4.0, {0.5, 0.5}),
                                            Grid::covering(bounding_box(kSquare), h), 1000000);
        const std::pair<const LogConcavityReport*, const char*> runs[] = {
            {&sq, "square"}, {&dk, "disk"}, {&qd, "square V=4|x-c|^2"}};
        for (const auto& [r, name] : runs)
            l.require(r->passed(), std::string(name) + " deficit " + f(r->worst_deficit) + " >= -" + f(r->tolerance));
        // Analytic sin(pi x) sin(pi y) at the worst pair found.
        const Grid g = Grid::covering(bounding_box(kSquare), h);
        auto lg = [&](std::size_t c) {
            const Vec2 p = g.point(c);
            return std::log(std::sin(pi * p.x) * std::sin(pi * p.y));
        };
        const std::size_t m = g.index((g.col(sq.worst_p) + g.col(sq.worst_q)) / 2, (g.row(sq.worst_p) + g.row(sq.worst_q)) / 2);
        const double analytic = lg(m) - 0.5 * (lg(sq.worst_p) + lg(sq.worst_q));
        l.require(std::abs(sq.worst_deficit - analytic) <= h * h,
                  "square deficit matches analytic " + f(analytic) + " within h^2");
    });

    criterion(6, "gradient identity at optimal pairs", [](Line& l) {
        double med[2];
        std::size_t count[2];
        const double hs[2] = {1.0 / 64, 1.0 / 128};
        for (int k = 0; k < 2; ++k) {
            const PairRun r = pair_run(kSquare, kSquare, hs[k], 0.5);
            std::vector<std::size_t> cells;
            for (std::size_t c = 0; c < r.f.ubar.size(); ++c)
                if (r.f.core[c]) cells.push_back(c);
            std::vector<double> res;
            for (const auto& p : optimal_pairs(r.f, r.d0, r.d1, cells)) {
                try {
                    res.push_back(gradient_identity_residual(p, r.e0, r.e1, r.f).pair);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::ResidualUnreliable) throw;
                }
            }
            count[k] = res.size();
            std::nth_element(res.begin(), res.begin() + res.size() / 2, res.end());
            med[k] = res.empty() ? INFINITY : res[res.size() / 2];
        }
        l.require(count[1] >= 50, std::to_string(count[1]) + " reliable pairs at h=1/128");
        l.require(med[1] <= 0.05, "median residual h=1/128 " + f(med[1]) + " <= 0.05");
        l.require(med[1] <= med[0], "non-increasing from h=1/64 (" + f(med[0]) + ")");
    });

    criterion(7, "sup-convolution fixed point", [](Line& l) {
        for (const ShapeSpec* s : {&kSquare, &kDisk1}) {
            const double h = 1.0 / 64;
            const PairRun r = pair_run(*s, *s, h, 0.5);
            double diff = 0.0, top = 0.0;
            for (std::size_t c = 0; c < r.f.ubar.size(); ++c) {
                diff = std::max(diff, std::abs(r.f.ubar[c] - r.e0.u[c]));
                top = std::max(top, r.e0.u[c]);
            }
            l.require(diff / top <= 10 * h * h, (s == &kSquare ? "square" : "disk") + std::string(" |ubar - u|/|u| ") + f(diff / top) + " <= 10h^2 " +
                                                   f(10 * h * h));
        }
    });

    StageProbes extra;
    criterion(8, "Lipschitz bound on benchmark pairs", [&](Line& l) {
        for (const auto& [a, b] : {std::pair{kSquare, kSquare}, std::pair{kDisk1, kDisk2}}) {
            const PairRun r = pair_run(a, b, 1.0 / 32, 0.5);
            extra(BMStage{0.5, r.d0, r.d1, r.e0, r.e1, r.dt, r.e0, &r.f});
        }
        const double worst = std::max({rect_probes.worst_lipschitz_ratio, disk_probes.worst_lipschitz_ratio,
                                       extra.worst_lipschitz_ratio});
        l.require(rect_probes.stages == 9 && disk_probes.stages == 9 && extra.stages == 2,
                  std::to_string(rect_probes.stages + disk_probes.stages + extra.stages) + " fields");
        l.require(worst <= 1.05, "max Lip(ubar) / max |grad u_i| " + f(worst) + " <= 1.05");
    });

    criterion(9, "semiconvexity probe stability", [](Line& l) {
        for (const auto& [a, b, name] : {std::tuple{kSquare, kSquare, "square/square"}, std::tuple{kRectA, kRectB, "rect pair"}}) {
            double probe[3];
            const double hs[3] = {1.0 / 32, 1.0 / 64, 1.0 / 128};
            for (int k = 0; k < 3; ++k) probe[k] = semiconvexity_probe(pair_run(a, b, hs[k], 0.5).f, 0.1).lambda_probe;
            const double r1 = probe[1] / probe[0], r2 = probe[2] / probe[1];
            l.require(std::max(r1, r2) <= 2.0 && std::min(r1, r2) >= 0.5,
                      std::string(name) + " lambda_probe " + f(probe[0]) + ", " + f(probe[1]) + ", " + f(probe[2]));
        }
    });

    criterion(10, "integration by parts diagnostic", [&](Line& l) {
        l.require(rect_probes.ibp_ok && disk_probes.ibp_ok && extra.ibp_ok,
                  "lhs <= rhs + flux bound + 1e-3 lhs with eps = 4h on " +
                      std::to_string(rect_probes.stages + disk_probes.stages + extra.stages) + " fields");
    });

    std::string scan_csv;
    criterion(11, "slit-annulus scan", [&](Line& l) {
        ScanOptions o;
        o.bm.trial_function = false;
        o.bm.variational_trials = 0;
        const double h = 1.0 / 40;
        const JumpReport j =
            counterexample_scan(0.3, 4 * h, linspace01(40), Grid::covering(BBox{{-2, -2}, {2, 2}}, h), o);
        std::ostringstream os;
        io::write_jump_csv(os, j);
        scan_csv = os.str();
        l.require(j.max_jump_ratio >= 10, "h=1/40 max jump ratio " + f(j.max_jump_ratio) + " >= 10 near t = " +
                                              f(j.jump_location));
        l.require(j.chord.passed(), "chord inequality at all 40 t");
        const double exact = kJ01 * kJ01 / 4;
        const double rel = std::abs(j.lambda_t.back() - exact) / exact;
        l.require(rel <= 0.01, "lambda(t=1) rel err " + f(rel) + " <= 0.01");
    });

    criterion(12, "inverse square root concavity", [&](Line& l) {
        const HomogeneityResult hr = homogeneity_check(rect);
        l.require(hr.passed, "rect pair worst margin " + f(hr.worst_margin));
        BMOptions eig_only;
        eig_only.trial_function = false;
        eig_only.variational_trials = 0;
        const BMReport sq = verify_bm(kSquare, kSquare, PotentialSpec::zero(), kNineT, grid_for(kSquare, kSquare, 1.0 / 32), eig_only);
        l.require(homogeneity_check(sq).passed, "square/square");
        const BMReport cd =
            verify_bm(kDisk1, kDisk2, PotentialSpec::zero(), {0.25, 0.5, 0.75}, grid_for(kDisk1, kDisk2, 1.0 / 64), eig_only);
        const HomogeneityResult hc = homogeneity_check(cd);
        l.require(hc.passed && hc.max_relative_gap <= 1e-3,
                  "concentric disks h=1/64 max relative gap " + f(hc.max_relative_gap) + " <= 1e-3");
    });

    criterion(13, "determinism", [&](Line& l) {
        BMOptions par = full;
        par.threads = 2;
        const BMReport again = verify_bm(kRectA, kRectB, PotentialSpec::zero(), kNineT, grid_for(kRectA, kRectB, 1.0 / 32), par);
        l.require(bm_csv(again) == bm_csv(rect), "rectangle BM report CSV identical on rerun with 2 threads");
        ScanOptions o;
        o.bm.trial_function = false;
        o.bm.variational_trials = 0;
        const double h = 1.0 / 16;
        std::string first;
        for (int k = 0; k < 2; ++k) {
            std::ostringstream os;
            io::write_jump_csv(os, counterexample_scan(0.3, 0.2, linspace01(20), Grid::covering(BBox{{-2, -2}, {2, 2}}, h), o));
            if (k == 0) first = os.str();
            else l.require(os.str() == first, "jump CSV identical on rerun");
        }
        std::string lc[2];
        for (auto& s : lc) {
            std::ostringstream os;
            io::write_logconcavity_csv(os, verify_logconcavity(kDisk1, PotentialSpec::zero(),
                                                               Grid::covering(bounding_box(kDisk1), 1.0 / 32), 100000, 7));
            s = os.str();
        }
        l.require(lc[0] == lc[1], "sampled log-concavity CSV identical on rerun");
    });

    std::printf("%d of 13 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
