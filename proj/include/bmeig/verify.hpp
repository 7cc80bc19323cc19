#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/parallel.hpp"
#include "bmeig/potential.hpp"
#include "bmeig/spectral.hpp"
#include "bmeig/supconv.hpp"

namespace bmeig {

/// Allowance constant C in slack2 >= -C h, from the rectangle refinement
/// study in VerifyBM.ChordAllowanceCalibration.
inline constexpr double kChordAllowance = 0.5;
/// Allowance constant for the inverse square root concavity check.
inline constexpr double kHomogeneityAllowance = 0.05;

struct BMOptions {
    double solver_tol = 1e-8;
    int max_iter = 500;
    double chord_allowance = kChordAllowance;
    double variational_tol = 1e-6;
    int variational_trials = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    SupConvOptions supconv;
    /// Build the sup-convolution and its Rayleigh quotient; without it only
    /// lambda_t and the chord are recorded.
    bool trial_function = true;
};

struct BMRow {
    double t = 0.0;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double lambda_t = 0.0;
    double rayleigh_ubar = std::numeric_limits<double>::quiet_NaN();
    double chord = 0.0;
    double slack1 = std::numeric_limits<double>::quiet_NaN();
    double slack2 = std::numeric_limits<double>::quiet_NaN();
    double h = 0.0;
    /// Smallest R(w) - lambda_t over the random admissible trials.
    double variational_margin = std::numeric_limits<double>::quiet_NaN();
    std::size_t flagged_cells = 0;
    std::string flags;
};

struct BMReport {
    std::vector<BMRow> rows;
    double h = 0.0;
    double chord_allowance = 0.0;
    double variational_tol = 0.0;
    bool potential_is_zero = false;
    std::vector<std::string> failures;

    bool passed() const { return failures.empty(); }
};

/// Everything built for one t; handed to an observer so callers can reuse
/// the interpolant, eigenpair and trial function without recomputing them.
struct BMStage {
    double t;
    const GridDomain& d0;
    const GridDomain& d1;
    const EigenPair& e0;
    const EigenPair& e1;
    const GridDomain& dt;
    const EigenPair& et;
    const SupConvField* ubar;
};

using BMObserver = std::function<void(const BMStage&)>;

namespace detail {

inline std::string t_label(double t) {
    std::string s = std::to_string(t);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    return s;
}

/// Eigenpairs keyed by inside mask; interpolants often repeat exactly.
class EigenCache {
public:
    EigenCache(const PotentialSpec& v, double tol, int max_iter) : v_(v), tol_(tol), max_iter_(max_iter) {}

    const EigenPair& get(const GridDomain& d) {
        for (const auto& [mask, pair] : entries_)
            if (mask == d.inside) return pair;
        entries_.emplace_back(d.inside, smallest_eigenpair(d, v_, tol_, max_iter_));
        return entries_.back().second;
    }

private:
    PotentialSpec v_;
    double tol_;
    int max_iter_;
    std::deque<std::pair<Mask, EigenPair>> entries_;
};

template <class Fn>
auto annotate_t(double t, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), e.message() + " (t = " + t_label(t) + ")", e.value());
    }
}

} // namespace detail

/// Smallest R(w) - lambda over random admissible fields: perturbations of the
/// eigenfunction at scales 1e-4 .. 1 and pure noise, all zero outside `d`.
inline double variational_margin(const GridDomain& d, const EigenPair& e, const PotentialSpec& v, int trials,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const double umax = detail::field_max(e.u);
    double worst = std::numeric_limits<double>::infinity();
    Field w(e.u.size(), 0.0);
    for (int k = 0; k < trials; ++k) {
        const bool pure_noise = k % 10 == 9;
        const double scale = umax * std::pow(10.0, -4.0 + 4.0 * (k % 10) / 8.0);
        for (std::size_t c = 0; c < w.size(); ++c) {
            if (!d.inside[c]) {
                w[c] = 0.0;
                continue;
            }
            const double noise = unif(rng);
            w[c] = pure_noise ? noise : e.u[c] + scale * noise;
        }
        worst = std::min(worst, rayleigh_quotient(w, d, v) - e.lambda);
    }
    return worst;
}

namespace detail {

inline BMRow bm_row(const GridDomain& d0, const GridDomain& d1, const EigenPair& e0, const EigenPair& e1,
                    const PotentialSpec& v, double t, const BMOptions& opts, EigenCache& cache,
                    const BMObserver& observer) {
    return annotate_t(t, [&] {
        BMRow row;
        row.t = t;
        row.h = d0.grid.h;
        row.lambda0 = e0.lambda;
        row.lambda1 = e1.lambda;
        row.chord = (1.0 - t) * e0.lambda + t * e1.lambda;
        const GridDomain dt = minkowski_interpolate(d0, d1, DeformationParam(t));
        const EigenPair& et = cache.get(dt);
        row.lambda_t = et.lambda;
        std::optional<SupConvField> f;
        if (opts.trial_function) {
            SupConvOptions so = opts.supconv;
            so.threads = opts.threads;
            f = sup_convolve(e0, e1, DeformationParam(t), dt, so);
            row.rayleigh_ubar = rayleigh_quotient(f->ubar, dt, v);
            row.slack1 = row.rayleigh_ubar - row.lambda_t;
            row.slack2 = row.chord - row.rayleigh_ubar;
            row.flagged_cells = f->flagged.size();
        }
        if (opts.variational_trials > 0) {
            row.variational_margin = variational_margin(dt, et, v, opts.variational_trials,
                                                        opts.seed + static_cast<std::uint64_t>(t * 1e6));
        }
        if (observer) observer(BMStage{t, d0, d1, e0, e1, dt, et, f ? &*f : nullptr});
        return row;
    });
}

inline void assess(BMReport& r, const BMOptions& opts) {
    const double allowance = opts.chord_allowance * r.h;
    for (BMRow& row : r.rows) {
        auto fail = [&](const std::string& tag, const std::string& what) {
            if (!row.flags.empty()) row.flags += '|';
            row.flags += tag;
            r.failures.push_back(what + " at t = " + t_label(row.t));
        };
        if (!std::isnan(row.slack1) && row.slack1 < -opts.variational_tol)
            fail("slack1", "Rayleigh quotient of the trial function below lambda_t");
        if (!std::isnan(row.variational_margin) && row.variational_margin < -opts.variational_tol)
            fail("variational", "random trial field below lambda_t");
        const double upper = std::isnan(row.rayleigh_ubar) ? row.lambda_t : row.rayleigh_ubar;
        if (row.chord - upper < -allowance) fail("slack2", "chord inequality violated beyond allowance");
        if (row.flags.empty()) row.flags = "ok";
    }
}

} // namespace detail

/// Chord inequality chain lambda_t <= R(ubar) <= (1-t) lambda0 + t lambda1 for
/// each t in (0, 1).
inline BMReport verify_bm(const ShapeSpec& spec0, const ShapeSpec& spec1, const PotentialSpec& v,
                          std::vector<double> t_list, const Grid& grid, const BMOptions& opts = {},
                          const BMObserver& observer = {}) {
    v.validate();
    require(!t_list.empty(), ErrorKind::InvalidParameter, "t list is empty");
    for (double t : t_list)
        require(std::isfinite(t) && t > 0.0 && t < 1.0, ErrorKind::InvalidParameter,
                "chord verification needs t strictly inside (0, 1)");
    std::sort(t_list.begin(), t_list.end());
    const GridDomain d0 = rasterize(spec0, grid);
    const GridDomain d1 = rasterize(spec1, grid);
    detail::EigenCache cache(v, opts.solver_tol, opts.max_iter);
    const EigenPair e0 = cache.get(d0);
    const EigenPair e1 = cache.get(d1);

    BMReport r;
    r.h = grid.h;
    r.chord_allowance = opts.chord_allowance;
    r.variational_tol = opts.variational_tol;
    r.potential_is_zero = v.is_zero();
    for (double t : t_list) r.rows.push_back(detail::bm_row(d0, d1, e0, e1, v, t, opts, cache, observer));
    detail::assess(r, opts);
    return r;
}

struct HomogeneityResult {
    bool passed = false;
    /// min over rows of lambda_t^(-1/2) - [(1-t) lambda0^(-1/2) + t lambda1^(-1/2)]
    double worst_margin = std::numeric_limits<double>::infinity();
    /// max over rows of |margin| / right-hand side
    double max_relative_gap = 0.0;
};

/// Inverse square root concavity of V = 0 eigenvalues, within allowance C h.
inline HomogeneityResult homogeneity_check(const BMReport& report, double allowance = kHomogeneityAllowance) {
    require(report.potential_is_zero, ErrorKind::PreconditionViolated, "homogeneity only holds for V = 0");
    HomogeneityResult out;
    for (const BMRow& row : report.rows) {
        require(row.lambda0 > 0.0 && row.lambda1 > 0.0 && row.lambda_t > 0.0, ErrorKind::PreconditionViolated,
                "homogeneity needs positive eigenvalues");
        const double lhs = 1.0 / std::sqrt(row.lambda_t);
        const double rhs = (1.0 - row.t) / std::sqrt(row.lambda0) + row.t / std::sqrt(row.lambda1);
        out.worst_margin = std::min(out.worst_margin, lhs - rhs);
        out.max_relative_gap = std::max(out.max_relative_gap, std::abs(lhs - rhs) / rhs);
    }
    out.passed = out.worst_margin >= -allowance * report.h;
    return out;
}

struct LogConcavityReport {
    std::string domain_id;
    /// min over tested pairs of log u(m) - (log u(p) + log u(q)) / 2
    double worst_deficit = std::numeric_limits<double>::infinity();
    std::size_t pair_count = 0;
    bool exhaustive = false;
    double value_floor = 0.0;
    double grad_log_sup = 0.0;
    double tolerance = 0.0;
    std::size_t worst_p = 0, worst_q = 0;

    bool passed() const { return worst_deficit >= -tolerance; }
};

/// Midpoint concavity of log u over node pairs whose midpoint is a node,
/// restricted to nodes with u >= 1e-6 max u.
inline LogConcavityReport verify_logconcavity(const GridDomain& d, const EigenPair& e, std::size_t pair_budget,
                                              std::uint64_t seed, std::string domain_id = {}) {
    require(is_convex(d), ErrorKind::DomainNotConvex, "log-concavity is only claimed on convex domains");
    const Grid& g = d.grid;
    LogConcavityReport r;
    r.domain_id = std::move(domain_id);
    r.value_floor = 1e-6 * detail::field_max(e.u);
    Field logu(g.size(), -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> cls[4];
    for (std::size_t c = 0; c < g.size(); ++c) {
        if (!(d.inside[c] && e.u[c] >= r.value_floor && e.u[c] > 0.0)) continue;
        logu[c] = std::log(e.u[c]);
        cls[(g.col(c) & 1) + 2 * (g.row(c) & 1)].push_back(c);
    }
    const VectorField grad = gradient_field(e.u, g, &d.inside);
    for (int k = 0; k < 4; ++k)
        for (std::size_t c : cls[k])
            r.grad_log_sup = std::max(r.grad_log_sup, std::hypot(grad.x[c], grad.y[c]) / e.u[c]);
    r.tolerance = 10.0 * g.h * g.h * r.grad_log_sup * r.grad_log_sup;

    auto test = [&](std::size_t p, std::size_t q) {
        const std::size_t m = g.index((g.col(p) + g.col(q)) / 2, (g.row(p) + g.row(q)) / 2);
        if (!std::isfinite(logu[m])) return;
        ++r.pair_count;
        const double deficit = logu[m] - 0.5 * (logu[p] + logu[q]);
        if (deficit < r.worst_deficit) {
            r.worst_deficit = deficit;
            r.worst_p = p;
            r.worst_q = q;
        }
    };
    double total = 0.0;
    for (const auto& c : cls) total += 0.5 * static_cast<double>(c.size()) * (static_cast<double>(c.size()) - 1.0);
    if (total <= static_cast<double>(pair_budget)) {
        r.exhaustive = true;
        for (const auto& c : cls)
            for (std::size_t a = 0; a < c.size(); ++a)
                for (std::size_t b = a + 1; b < c.size(); ++b) test(c[a], c[b]);
    } else {
        std::mt19937_64 rng(seed);
        std::vector<double> weights;
        for (const auto& c : cls) weights.push_back(static_cast<double>(c.size()) * static_cast<double>(c.size()));
        std::discrete_distribution<int> pick_class(weights.begin(), weights.end());
        for (std::size_t s = 0; s < pair_budget; ++s) {
            const auto& c = cls[pick_class(rng)];
            std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
            const std::size_t p = c[pick(rng)], q = c[pick(rng)];
            if (p != q) test(p, q);
        }
    }
    return r;
}

inline LogConcavityReport verify_logconcavity(const ShapeSpec& spec, const PotentialSpec& v, const Grid& grid,
                                              std::size_t pair_budget, std::uint64_t seed = 1,
                                              double solver_tol = 1e-8, int max_iter = 500) {
    v.validate();
    const GridDomain d = rasterize(spec, grid);
    require(is_convex(d), ErrorKind::DomainNotConvex, "log-concavity is only claimed on convex domains");
    const EigenPair e = smallest_eigenpair(d, v, solver_tol, max_iter);
    return verify_logconcavity(d, e, pair_budget, seed, shape_name(spec));
}

struct JumpReport {
    std::vector<double> t;
    std::vector<double> lambda_t;
    std::vector<double> differences;
    double max_jump_ratio = 0.0;
    double median_difference = 0.0;
    /// Interval [t[k], t[k+1]] carrying the largest difference.
    std::size_t jump_index = 0;
    double jump_location = 0.0;
    BMReport chord;
};

struct ScanOptions {
    BMOptions bm;
    Vec2 center;
    double r_inner = 1.0;
    double r_outer = 2.0;
};

/// lambda_t along a t grid for the smoothed slit annulus against the disk of
/// the outer radius, with the chord inequality checked at every sample.
inline JumpReport counterexample_scan(double epsilon, double rho, std::vector<double> t_grid, const Grid& grid,
                                      const ScanOptions& opts = {}, const BMObserver& observer = {}) {
    require(t_grid.size() >= 20, ErrorKind::InvalidParameter, "jump scan needs at least 20 samples");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        require(std::isfinite(t_grid[k]) && t_grid[k] >= 0.0 && t_grid[k] <= 1.0, ErrorKind::InvalidParameter,
                "t grid values must lie in [0, 1]");
        require(k == 0 || t_grid[k] > t_grid[k - 1], ErrorKind::InvalidParameter,
                "t grid must be strictly increasing");
    }
    const ShapeSpec s0 = AnnulusSector{opts.center, opts.r_inner, opts.r_outer, epsilon, rho};
    const ShapeSpec s1 = Disk{opts.center, opts.r_outer};
    validate(s0);
    const PotentialSpec v = PotentialSpec::zero();
    const GridDomain d0 = rasterize(s0, grid);
    const GridDomain d1 = rasterize(s1, grid);
    detail::EigenCache cache(v, opts.bm.solver_tol, opts.bm.max_iter);
    const EigenPair e0 = cache.get(d0);
    const EigenPair e1 = cache.get(d1);

    JumpReport j;
    j.t = t_grid;
    j.chord.h = grid.h;
    j.chord.chord_allowance = opts.bm.chord_allowance;
    j.chord.variational_tol = opts.bm.variational_tol;
    j.chord.potential_is_zero = true;
    for (double t : t_grid) {
        BMOptions o = opts.bm;
        if (t == 0.0 || t == 1.0) o.variational_trials = 0;
        BMRow row = detail::bm_row(d0, d1, e0, e1, v, t, o, cache, observer);
        j.lambda_t.push_back(row.lambda_t);
        j.chord.rows.push_back(std::move(row));
    }
    detail::assess(j.chord, opts.bm);

    for (std::size_t k = 0; k + 1 < j.lambda_t.size(); ++k) j.differences.push_back(j.lambda_t[k + 1] - j.lambda_t[k]);
    std::vector<double> mags;
    for (double d : j.differences) mags.push_back(std::abs(d));
    const auto top = std::max_element(mags.begin(), mags.end());
    j.jump_index = static_cast<std::size_t>(top - mags.begin());
    j.jump_location = 0.5 * (j.t[j.jump_index] + j.t[j.jump_index + 1]);
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    j.median_difference = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    j.max_jump_ratio = j.median_difference > 0.0 ? *top / j.median_difference
                       : *top > 0.0              ? std::numeric_limits<double>::infinity()
                                                 : 0.0;
    return j;
}

/// n evenly spaced values from 0 to 1 inclusive.
inline std::vector<double> linspace01(int n) {
    require(n >= 2, ErrorKind::InvalidParameter, "need at least two samples");
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = static_cast<double>(k) / (n - 1);
    return out;
}

} // namespace bmeig
