#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bmeig/config.hpp"
#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/io.hpp"
#include "bmeig/spectral.hpp"
#include "bmeig/supconv.hpp"
#include "bmeig/verify.hpp"

namespace bmeig::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr double kBesselJ01 = 2.404825557695773;

/// PASS/FAIL lines for the hard assertions of one run.
class Summary {
public:
    void check(bool ok, const std::string& what) { lines_.push_back({ok, what}); }
    bool passed() const {
        for (const auto& l : lines_)
            if (!l.ok) return false;
        return true;
    }
    std::string text() const {
        std::string out;
        for (const auto& l : lines_) out += std::string(l.ok ? "PASS " : "FAIL ") + l.what + "\n";
        return out;
    }

private:
    struct Line {
        bool ok;
        std::string what;
    };
    std::vector<Line> lines_;
};

namespace detail {

inline std::string fmt(double v) { return io::format(v); }

inline std::string t_tag(std::size_t k) {
    std::string s = std::to_string(k);
    return std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    auto os = io::open_out(p);
    os << text;
    io::check_written(os, p);
}

inline BMOptions bm_options(const RunConfig& c) {
    BMOptions o;
    o.solver_tol = c.tolerances.solver;
    o.max_iter = c.tolerances.max_iter;
    o.chord_allowance = c.tolerances.chord_allowance;
    o.variational_tol = c.tolerances.variational;
    o.variational_trials = c.variational_trials;
    o.seed = c.seed;
    o.threads = c.threads;
    o.trial_function = c.trial_function;
    return o;
}

inline void run_eig(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    const Grid g = c.grid();
    const GridDomain d = rasterize(c.shape->spec, g);
    const EigenPair e = smallest_eigenpair(d, c.potential, c.tolerances.solver, c.tolerances.max_iter);
    {
        std::ostringstream csv;
        io::write_eigen_csv(csv, c.shape->id, e);
        write_text(out / "eigen.csv", csv.str());
    }
    io::write_field(out / "u.bin", g, e.u);
    io::write_field(out / "phi.bin", g, d.phi);
    io::write_heat_pgm(out / "u.pgm", g, e.u);
    io::write_mask_pgm(out / "mask.pgm", d);
    bool positive = true;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (d.inside[k] && !(e.u[k] > 0.0)) positive = false;
    s.check(e.residual <= c.tolerances.solver, "eigen residual " + fmt(e.residual) + " <= " + fmt(c.tolerances.solver));
    s.check(positive, "eigenfunction positive on every inside node");
}

inline void run_minkowski(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    const Grid g = c.grid();
    const GridDomain d0 = rasterize(c.shape0->spec, g), d1 = rasterize(c.shape1->spec, g);
    std::ostringstream csv;
    io::CsvWriter w(csv, {"t", "h", "inside_cells", "boundary_inclusion"});
    double worst = 0.0;
    for (std::size_t k = 0; k < c.t.size(); ++k) {
        const DeformationParam t(c.t[k]);
        const GridDomain dt = minkowski_interpolate(d0, d1, t);
        const double bi = boundary_inclusion_check(d0, d1, t);
        worst = std::max(worst, bi);
        w.row(c.t[k], g.h, dt.count(), bi);
        io::write_mask_pgm(out / ("mask_t" + t_tag(k) + ".pgm"), dt);
        io::write_field(out / ("phi_t" + t_tag(k) + ".bin"), g, dt.phi);
    }
    write_text(out / "minkowski.csv", csv.str());
    s.check(worst <= 2.0 * g.h * (1 + 1e-12), "boundary inclusion distance " + fmt(worst) + " <= 2h");
}

inline void run_supconv(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    const Grid g = c.grid();
    const GridDomain d0 = rasterize(c.shape0->spec, g), d1 = rasterize(c.shape1->spec, g);
    const EigenPair e0 = smallest_eigenpair(d0, c.potential, c.tolerances.solver, c.tolerances.max_iter);
    const EigenPair e1 = smallest_eigenpair(d1, c.potential, c.tolerances.solver, c.tolerances.max_iter);
    const double grad_bound = 1.05 * std::max(gradient_sup_norm(e0.u, g), gradient_sup_norm(e1.u, g));
    std::ostringstream csv;
    bool header = true;
    const std::string pair_id = c.shape0->id + "+" + c.shape1->id;
    for (std::size_t k = 0; k < c.t.size(); ++k) {
        const double t = c.t[k];
        const GridDomain dt = minkowski_interpolate(d0, d1, DeformationParam(t));
        SupConvOptions so;
        so.threads = c.threads;
        const SupConvField f = sup_convolve(e0, e1, DeformationParam(t), dt, so);
        io::write_field(out / ("ubar_t" + t_tag(k) + ".bin"), g, f.ubar);
        io::write_argmax(out / ("argmax_t" + t_tag(k) + ".bin"), f);
        io::write_heat_pgm(out / ("ubar_t" + t_tag(k) + ".pgm"), g, f.ubar);
        const double lip = lipschitz_estimate(f);
        const SemiconvexityProbe sc = semiconvexity_probe(f, c.probe_margin);
        const IbpResult ibp = ibp_check(f, c.mollifier);
        std::ostringstream row;
        io::write_probe_csv(row, pair_id, f, lip, grad_bound, sc, ibp);
        std::string text = row.str();
        if (!header) text = text.substr(text.find('\n') + 1);
        header = false;
        csv << text;

        std::size_t flagged_core = 0;
        for (std::size_t cell : f.flagged) flagged_core += f.core[cell];
        std::vector<std::size_t> core_cells;
        for (std::size_t cell = 0; cell < g.size(); ++cell)
            if (f.core[cell]) core_cells.push_back(cell);
        bool interior = true;
        std::string why;
        if (t > 0.0 && t < 1.0 && flagged_core == 0) {
            try {
                optimal_pairs(f, d0, d1, core_cells);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::InteriorityViolation) throw;
                interior = false;
                why = ": " + e.message();
            }
        }
        const std::string at = " at t = " + fmt(t);
        s.check(flagged_core == 0, "no flagged cells in the interior core" + at);
        s.check(interior, "optimal pairs interior on the core" + at + why);
        s.check(lip <= grad_bound, "Lipschitz estimate " + fmt(lip) + " <= " + fmt(grad_bound) + at);
        s.check(ibp.holds(1e-3), "integration by parts lhs <= rhs + flux bound" + at);
    }
    write_text(out / "probes.csv", csv.str());
}

inline void run_verify_bm(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    const BMReport r = verify_bm(c.shape0->spec, c.shape1->spec, c.potential, c.t, c.grid(), bm_options(c));
    std::ostringstream csv;
    io::write_bm_csv(csv, r);
    write_text(out / "bm_report.csv", csv.str());
    s.check(r.passed(), "chord chain holds at all " + std::to_string(r.rows.size()) + " t values" +
                            (r.passed() ? "" : " (" + r.failures.front() + ")"));
    if (r.potential_is_zero) {
        const HomogeneityResult hm = homogeneity_check(r, c.tolerances.homogeneity_allowance);
        s.check(hm.passed, "inverse square root concavity, worst margin " + fmt(hm.worst_margin));
    }
}

inline void run_logconcave(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    const LogConcavityReport r = verify_logconcavity(c.shape->spec, c.potential, c.grid(), c.pair_budget, c.seed,
                                                     c.tolerances.solver, c.tolerances.max_iter);
    LogConcavityReport named = r;
    named.domain_id = c.shape->id;
    std::ostringstream csv;
    io::write_logconcavity_csv(csv, named);
    write_text(out / "logconcavity.csv", csv.str());
    s.check(r.passed(), "worst midpoint deficit " + fmt(r.worst_deficit) + " >= -" + fmt(r.tolerance));
}

inline void run_counterexample(const RunConfig& c, const std::filesystem::path& out, Summary& s) {
    ScanOptions o;
    o.bm = bm_options(c);
    o.center = c.center;
    o.r_inner = c.r_inner;
    o.r_outer = c.r_outer;
    const JumpReport j = counterexample_scan(c.epsilon, c.rho, c.t, c.grid(), o);
    std::ostringstream csv;
    io::write_jump_csv(csv, j);
    write_text(out / "jump.csv", csv.str());
    s.check(j.max_jump_ratio >= 10.0, "max jump ratio " + fmt(j.max_jump_ratio) + " >= 10 near t = " +
                                          fmt(j.jump_location));
    s.check(j.chord.passed(), "chord inequality at every scanned t");
    if (c.t.back() == 1.0) {
        const double exact = kBesselJ01 * kBesselJ01 / (c.r_outer * c.r_outer);
        const double rel = std::abs(j.lambda_t.back() / exact - 1.0);
        s.check(rel <= 0.01, "lambda(t=1) relative error " + fmt(rel) + " <= 0.01");
    }
}

inline std::string indent(const std::string& text) {
    std::string out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) out += "  " + line + "\n";
    return out;
}

} // namespace detail

/// Runs one configured command, writing artifacts under `cfg.output`.
/// Returns the process exit status.
inline int run(const RunConfig& cfg, std::ostream& log = std::cout) {
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path out = cfg.output;
    Summary s;
    try {
        std::error_code ec;
        std::filesystem::create_directories(out, ec);
        require(!ec && std::filesystem::is_directory(out), ErrorKind::Io, "cannot create output directory " + cfg.output);
        switch (cfg.command) {
        case Command::Eig: detail::run_eig(cfg, out, s); break;
        case Command::Minkowski: detail::run_minkowski(cfg, out, s); break;
        case Command::Supconv: detail::run_supconv(cfg, out, s); break;
        case Command::VerifyBm: detail::run_verify_bm(cfg, out, s); break;
        case Command::VerifyLogconcave: detail::run_logconcave(cfg, out, s); break;
        case Command::Counterexample: detail::run_counterexample(cfg, out, s); break;
        }
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::io;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        detail::write_text(out / "summary.txt", s.text());
        detail::write_text(out / "manifest.yaml", std::string("version: ") + kVersion + "\nwall_time_seconds: " +
                                                      detail::fmt(wall) + "\nconfig:\n" +
                                                      detail::indent(serialize(cfg)));
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    }
    log << s.text();
    return s.passed() ? exit_code::ok : exit_code::assertion;
}

} // namespace bmeig::cli
