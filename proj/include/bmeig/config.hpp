#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/io.hpp"
#include "bmeig/potential.hpp"
#include "bmeig/shapes.hpp"
#include "bmeig/verify.hpp"

namespace bmeig {

enum class Command { Eig, Minkowski, Supconv, VerifyBm, VerifyLogconcave, Counterexample };

inline const char* command_name(Command c) {
    constexpr const char* names[] = {"eig", "minkowski", "supconv", "verify-bm", "verify-logconcave",
                                     "counterexample"};
    return names[static_cast<int>(c)];
}

struct NamedShape {
    std::string id;
    ShapeSpec spec;
    friend bool operator==(const NamedShape&, const NamedShape&) = default;
};

struct Tolerances {
    double solver = 1e-8;
    int max_iter = 500;
    double chord_allowance = kChordAllowance;
    double homogeneity_allowance = kHomogeneityAllowance;
    double variational = 1e-6;
    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

/// Fully resolved run description. Lengths given as multiples of h in the
/// text ("4h") are stored as lengths.
struct RunConfig {
    Command command = Command::Eig;
    double h = 1.0 / 128.0;
    int margin = 2;
    std::optional<BBox> extent;
    std::optional<NamedShape> shape;
    std::optional<NamedShape> shape0;
    std::optional<NamedShape> shape1;
    PotentialSpec potential;
    std::vector<double> t;
    Tolerances tolerances;
    std::string output = "out";
    std::uint64_t seed = 1;
    int threads = 1;
    std::uint64_t pair_budget = 1000000;
    bool trial_function = true;
    int variational_trials = 100;
    // counterexample
    double epsilon = 0.3;
    double rho = 0.0;
    double r_inner = 1.0;
    double r_outer = 2.0;
    Vec2 center;
    // supconv probes
    double mollifier = 0.0;
    double probe_margin = 0.0;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    /// Grid over the explicit extent, else over every shape in play.
    Grid grid() const {
        BBox box;
        if (extent) {
            box = *extent;
        } else if (command == Command::Counterexample) {
            box = bounding_box(Disk{center, r_outer});
        } else if (shape) {
            box = bounding_box(shape->spec);
        } else {
            box = hull_box(shape0->spec, shape1->spec);
        }
        return Grid::covering(box, h, margin);
    }
};

/// Scalar fields that command-line flags may override.
struct ConfigOverrides {
    std::optional<double> h;
    std::optional<std::string> output;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> solver_tol;
};

namespace detail {

[[noreturn]] inline void config_error(const YAML::Node& n, const std::string& msg) {
    const int line = n.Mark().line >= 0 ? n.Mark().line + 1 : 0;
    throw Error(ErrorKind::Config, "line " + std::to_string(line) + ": " + msg, line);
}

inline void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
    if (!n.IsMap()) config_error(n, where + " must be a mapping");
    for (const auto& kv : n) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) config_error(kv.first, "unknown key '" + key + "' in " + where);
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) config_error(n, what + " must be a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        config_error(n, what + " has the wrong type ('" + n.Scalar() + "')");
    }
}

/// Plain number or a ratio "a/b".
inline double number(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) config_error(n, what + " must be a number");
    const std::string s = n.Scalar();
    const auto slash = s.find('/');
    if (slash == std::string::npos) return scalar<double>(n, what);
    try {
        std::size_t p1 = 0, p2 = 0;
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        const double num = std::stod(a, &p1), den = std::stod(b, &p2);
        if (p1 != a.size() || p2 != b.size() || den == 0.0) throw std::invalid_argument(s);
        return num / den;
    } catch (const std::exception&) {
        config_error(n, what + " is not a number or ratio ('" + s + "')");
    }
}

/// A length, given directly or as a multiple of h ("4h", "h").
inline double length(const YAML::Node& n, double h, const std::string& what) {
    if (!n.IsScalar()) config_error(n, what + " must be a length");
    std::string s = n.Scalar();
    if (!s.empty() && s.back() == 'h') {
        s.pop_back();
        if (s.empty()) return h;
        try {
            std::size_t pos = 0;
            const double k = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return k * h;
        } catch (const std::exception&) {
            config_error(n, what + " is not a length ('" + n.Scalar() + "')");
        }
    }
    return number(n, what);
}

inline Vec2 vec2(const YAML::Node& n, const std::string& what) {
    if (!n.IsSequence() || n.size() != 2) config_error(n, what + " must be a pair [x, y]");
    return {number(n[0], what), number(n[1], what)};
}

inline NamedShape parse_shape(const YAML::Node& n, double h, const std::string& where) {
    if (!n.IsMap()) config_error(n, where + " must be a mapping");
    if (!n["type"]) config_error(n, where + " needs a type");
    const std::string type = scalar<std::string>(n["type"], where + ".type");
    NamedShape out;
    out.id = n["id"] ? scalar<std::string>(n["id"], where + ".id") : where;
    auto num = [&](const char* key, std::optional<double> dflt = std::nullopt) {
        if (!n[key]) {
            if (dflt) return *dflt;
            config_error(n, where + " of type " + type + " needs '" + key + "'");
        }
        return number(n[key], where + "." + key);
    };
    auto pt = [&](const char* key) { return n[key] ? vec2(n[key], where + "." + key) : Vec2{}; };
    if (type == "rectangle") {
        check_keys(n, {"type", "id", "corner", "width", "height"}, where);
        out.spec = Rectangle{pt("corner"), num("width"), num("height")};
    } else if (type == "disk") {
        check_keys(n, {"type", "id", "center", "radius"}, where);
        out.spec = Disk{pt("center"), num("radius")};
    } else if (type == "ellipse") {
        check_keys(n, {"type", "id", "center", "semi_axes"}, where);
        if (!n["semi_axes"]) config_error(n, where + " of type ellipse needs 'semi_axes'");
        out.spec = Ellipse{pt("center"), vec2(n["semi_axes"], where + ".semi_axes")};
    } else if (type == "polygon") {
        check_keys(n, {"type", "id", "vertices"}, where);
        const YAML::Node v = n["vertices"];
        if (!v || !v.IsSequence()) config_error(n, where + " of type polygon needs a 'vertices' list");
        ConvexPolygon poly;
        for (const auto& p : v) poly.vertices.push_back(vec2(p, where + ".vertices"));
        out.spec = poly;
    } else if (type == "annulus_sector") {
        check_keys(n, {"type", "id", "center", "r_inner", "r_outer", "gap", "smoothing"}, where);
        out.spec = AnnulusSector{pt("center"), num("r_inner", 1.0), num("r_outer", 2.0), num("gap", 0.3),
                                 n["smoothing"] ? length(n["smoothing"], h, where + ".smoothing") : 4.0 * h};
    } else {
        config_error(n["type"], "unknown shape type '" + type + "'");
    }
    try {
        validate(out.spec);
    } catch (const Error& e) {
        config_error(n, where + ": " + e.message());
    }
    return out;
}

inline PotentialSpec parse_potential(const YAML::Node& n) {
    if (n.IsScalar()) {
        const std::string s = n.Scalar();
        if (s == "zero") return PotentialSpec::zero();
        config_error(n, "potential must be 'zero' or a mapping");
    }
    check_keys(n, {"type", "c", "center", "a11", "a12", "a22"}, "potential");
    if (!n["type"]) config_error(n, "potential needs a type");
    const std::string type = scalar<std::string>(n["type"], "potential.type");
    auto num = [&](const char* key) { return n[key] ? number(n[key], std::string("potential.") + key) : 0.0; };
    const Vec2 c = n["center"] ? vec2(n["center"], "potential.center") : Vec2{};
    PotentialSpec v;
    if (type == "zero") {
        v = PotentialSpec::zero();
    } else if (type == "constant") {
        v = PotentialSpec::constant(num("c"));
    } else if (type == "quadratic") {
        v = PotentialSpec::quadratic(num("c"), c);
    } else if (type == "anisotropic") {
        v = PotentialSpec::anisotropic(num("a11"), num("a12"), num("a22"), c);
    } else {
        config_error(n["type"], "unknown potential type '" + type + "'");
    }
    try {
        v.validate();
    } catch (const Error& e) {
        config_error(n, "potential: " + e.message());
    }
    return v;
}

inline std::vector<double> default_t(Command c) {
    switch (c) {
    case Command::VerifyBm: {
        std::vector<double> t;
        for (int k = 1; k <= 9; ++k) t.push_back(k / 10.0);
        return t;
    }
    case Command::Counterexample: return linspace01(40);
    case Command::Minkowski:
    case Command::Supconv: return {0.5};
    default: return {};
    }
}

} // namespace detail

inline RunConfig parse_config(const std::string& text, const ConfigOverrides& ov = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorKind::Config, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg, e.mark.line + 1);
    }
    using detail::config_error;
    if (!root.IsMap()) throw Error(ErrorKind::Config, "line 1: config must be a mapping", 1);
    detail::check_keys(root,
                       {"command", "grid", "shape", "shape0", "shape1", "potential", "t", "t_grid", "tolerances",
                        "output", "seed", "threads", "pair_budget", "trial_function", "variational_trials",
                        "epsilon", "rho", "r_inner", "r_outer", "center", "mollifier", "probe_margin"},
                       "config");
    RunConfig cfg;
    if (!root["command"]) throw Error(ErrorKind::Config, "line 1: missing 'command'", 1);
    {
        const std::string cmd = detail::scalar<std::string>(root["command"], "command");
        bool found = false;
        for (int k = 0; k <= static_cast<int>(Command::Counterexample); ++k) {
            if (cmd == command_name(static_cast<Command>(k))) {
                cfg.command = static_cast<Command>(k);
                found = true;
            }
        }
        if (!found) config_error(root["command"], "unknown command '" + cmd + "'");
    }

    if (const YAML::Node g = root["grid"]) {
        detail::check_keys(g, {"h", "margin", "extent"}, "grid");
        if (g["h"]) cfg.h = detail::number(g["h"], "grid.h");
        if (g["margin"]) cfg.margin = detail::scalar<int>(g["margin"], "grid.margin");
        if (const YAML::Node e = g["extent"]) {
            if (!e.IsSequence() || e.size() != 4) config_error(e, "grid.extent must be [xmin, ymin, xmax, ymax]");
            cfg.extent = BBox{{detail::number(e[0], "grid.extent"), detail::number(e[1], "grid.extent")},
                              {detail::number(e[2], "grid.extent"), detail::number(e[3], "grid.extent")}};
            if (!(cfg.extent->lo.x < cfg.extent->hi.x && cfg.extent->lo.y < cfg.extent->hi.y))
                config_error(e, "grid.extent must have xmin < xmax and ymin < ymax");
        }
    }
    if (ov.h) cfg.h = *ov.h;
    if (!(std::isfinite(cfg.h) && cfg.h > 0.0)) config_error(root["grid"], "grid.h must be positive");
    if (cfg.margin < 2) config_error(root["grid"]["margin"], "grid.margin must be at least 2");

    if (root["shape"]) cfg.shape = detail::parse_shape(root["shape"], cfg.h, "shape");
    if (root["shape0"]) cfg.shape0 = detail::parse_shape(root["shape0"], cfg.h, "shape0");
    if (root["shape1"]) cfg.shape1 = detail::parse_shape(root["shape1"], cfg.h, "shape1");
    if (root["potential"]) cfg.potential = detail::parse_potential(root["potential"]);

    if (root["t"] && root["t_grid"]) config_error(root["t_grid"], "give either t or t_grid, not both");
    if (const YAML::Node t = root["t"]) {
        if (t.IsScalar()) {
            cfg.t.push_back(detail::number(t, "t"));
        } else if (t.IsSequence()) {
            for (const auto& v : t) cfg.t.push_back(detail::number(v, "t"));
        } else {
            config_error(t, "t must be a number or a list");
        }
        for (std::size_t k = 0; k < cfg.t.size(); ++k)
            if (!(cfg.t[k] >= 0.0 && cfg.t[k] <= 1.0))
                config_error(t.IsSequence() ? t[k] : t, "t values must lie in [0, 1]");
    } else if (const YAML::Node tg = root["t_grid"]) {
        detail::check_keys(tg, {"count"}, "t_grid");
        const int n = tg["count"] ? detail::scalar<int>(tg["count"], "t_grid.count") : 40;
        if (n < 2) config_error(tg, "t_grid.count must be at least 2");
        cfg.t = linspace01(n);
    } else {
        cfg.t = detail::default_t(cfg.command);
    }

    if (const YAML::Node tol = root["tolerances"]) {
        detail::check_keys(tol, {"solver", "max_iter", "chord_allowance", "homogeneity_allowance", "variational"},
                           "tolerances");
        auto pos = [&](const char* key, double& out) {
            if (!tol[key]) return;
            out = detail::number(tol[key], std::string("tolerances.") + key);
            if (!(out > 0.0)) config_error(tol[key], std::string("tolerances.") + key + " must be positive");
        };
        pos("solver", cfg.tolerances.solver);
        pos("chord_allowance", cfg.tolerances.chord_allowance);
        pos("homogeneity_allowance", cfg.tolerances.homogeneity_allowance);
        pos("variational", cfg.tolerances.variational);
        if (tol["max_iter"]) {
            cfg.tolerances.max_iter = detail::scalar<int>(tol["max_iter"], "tolerances.max_iter");
            if (cfg.tolerances.max_iter < 1) config_error(tol["max_iter"], "tolerances.max_iter must be positive");
        }
    }
    if (ov.solver_tol) {
        if (!(*ov.solver_tol > 0.0)) throw Error(ErrorKind::Config, "line 0: solver tolerance must be positive");
        cfg.tolerances.solver = *ov.solver_tol;
    }

    if (root["output"]) cfg.output = detail::scalar<std::string>(root["output"], "output");
    if (ov.output) cfg.output = *ov.output;
    if (root["seed"]) cfg.seed = detail::scalar<std::uint64_t>(root["seed"], "seed");
    if (ov.seed) cfg.seed = *ov.seed;
    if (root["threads"]) cfg.threads = detail::scalar<int>(root["threads"], "threads");
    if (ov.threads) cfg.threads = *ov.threads;
    if (cfg.threads < 1) throw Error(ErrorKind::Config, "line 0: threads must be at least 1");
    if (root["pair_budget"]) cfg.pair_budget = detail::scalar<std::uint64_t>(root["pair_budget"], "pair_budget");
    if (root["trial_function"]) cfg.trial_function = detail::scalar<bool>(root["trial_function"], "trial_function");
    else cfg.trial_function = cfg.command != Command::Counterexample;
    if (root["variational_trials"]) {
        cfg.variational_trials = detail::scalar<int>(root["variational_trials"], "variational_trials");
        if (cfg.variational_trials < 0) config_error(root["variational_trials"], "variational_trials must be >= 0");
    } else if (cfg.command == Command::Counterexample) {
        cfg.variational_trials = 0;
    }

    if (root["epsilon"]) cfg.epsilon = detail::number(root["epsilon"], "epsilon");
    if (root["r_inner"]) cfg.r_inner = detail::number(root["r_inner"], "r_inner");
    if (root["r_outer"]) cfg.r_outer = detail::number(root["r_outer"], "r_outer");
    if (root["center"]) cfg.center = detail::vec2(root["center"], "center");
    cfg.rho = root["rho"] ? detail::length(root["rho"], cfg.h, "rho") : 4.0 * cfg.h;
    cfg.mollifier = root["mollifier"] ? detail::length(root["mollifier"], cfg.h, "mollifier") : 4.0 * cfg.h;
    cfg.probe_margin =
        root["probe_margin"] ? detail::length(root["probe_margin"], cfg.h, "probe_margin") : 4.0 * cfg.h;

    // Command-specific requirements.
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) config_error(root["command"], msg);
    };
    switch (cfg.command) {
    case Command::Eig:
    case Command::VerifyLogconcave: need(cfg.shape.has_value(), "command needs 'shape'"); break;
    case Command::Minkowski:
    case Command::Supconv:
    case Command::VerifyBm:
        need(cfg.shape0 && cfg.shape1, "command needs 'shape0' and 'shape1'");
        need(!cfg.t.empty(), "command needs at least one t value");
        break;
    case Command::Counterexample: {
        need(cfg.t.size() >= 20, "counterexample needs at least 20 t values");
        for (std::size_t k = 1; k < cfg.t.size(); ++k) need(cfg.t[k] > cfg.t[k - 1], "t grid must be increasing");
        try {
            validate(ShapeSpec{AnnulusSector{cfg.center, cfg.r_inner, cfg.r_outer, cfg.epsilon, cfg.rho}});
        } catch (const Error& e) {
            config_error(root, e.message());
        }
        break;
    }
    }
    if (cfg.command == Command::VerifyBm)
        for (double t : cfg.t) need(t > 0.0 && t < 1.0, "verify-bm needs t strictly inside (0, 1)");
    if (cfg.command == Command::Supconv && (cfg.mollifier < 2.0 * cfg.h * (1 - 1e-12)))
        config_error(root["mollifier"], "mollifier must be at least 2h");
    if (cfg.command == Command::Supconv && (cfg.probe_margin < 3.0 * cfg.h * (1 - 1e-12)))
        config_error(root["probe_margin"], "probe_margin must be at least 3h");
    return cfg;
}

namespace detail {

inline void emit_num(YAML::Emitter& e, double v) { e << io::format(v); }

inline void emit_vec(YAML::Emitter& e, Vec2 v) {
    e << YAML::Flow << YAML::BeginSeq;
    emit_num(e, v.x);
    emit_num(e, v.y);
    e << YAML::EndSeq;
}

inline void emit_shape(YAML::Emitter& e, const NamedShape& s) {
    e << YAML::BeginMap << YAML::Key << "type" << YAML::Value << shape_name(s.spec);
    e << YAML::Key << "id" << YAML::Value << s.id;
    struct Visitor {
        YAML::Emitter& e;
        void kv(const char* k, double v) const {
            e << YAML::Key << k << YAML::Value;
            emit_num(e, v);
        }
        void kv(const char* k, Vec2 v) const {
            e << YAML::Key << k << YAML::Value;
            emit_vec(e, v);
        }
        void operator()(const Rectangle& r) const {
            kv("corner", r.corner);
            kv("width", r.width);
            kv("height", r.height);
        }
        void operator()(const Disk& d) const {
            kv("center", d.center);
            kv("radius", d.radius);
        }
        void operator()(const Ellipse& el) const {
            kv("center", el.center);
            kv("semi_axes", el.semi_axes);
        }
        void operator()(const ConvexPolygon& p) const {
            e << YAML::Key << "vertices" << YAML::Value << YAML::BeginSeq;
            for (Vec2 v : p.vertices) emit_vec(e, v);
            e << YAML::EndSeq;
        }
        void operator()(const AnnulusSector& a) const {
            kv("center", a.center);
            kv("r_inner", a.r_inner);
            kv("r_outer", a.r_outer);
            kv("gap", a.gap);
            kv("smoothing", a.smoothing);
        }
    };
    std::visit(Visitor{e}, s.spec);
    e << YAML::EndMap;
}

inline void emit_potential(YAML::Emitter& e, const PotentialSpec& v) {
    e << YAML::BeginMap << YAML::Key << "type" << YAML::Value << potential_name(v.kind);
    auto kv = [&](const char* k, double x) {
        e << YAML::Key << k << YAML::Value;
        emit_num(e, x);
    };
    switch (v.kind) {
    case PotentialSpec::Kind::Zero: break;
    case PotentialSpec::Kind::Constant: kv("c", v.c); break;
    case PotentialSpec::Kind::Quadratic:
        kv("c", v.c);
        e << YAML::Key << "center" << YAML::Value;
        emit_vec(e, v.center);
        break;
    case PotentialSpec::Kind::Anisotropic:
        kv("a11", v.a11);
        kv("a12", v.a12);
        kv("a22", v.a22);
        e << YAML::Key << "center" << YAML::Value;
        emit_vec(e, v.center);
        break;
    }
    e << YAML::EndMap;
}

} // namespace detail

/// Every resolved field, in a fixed order; parse_config(serialize(c)) == c.
inline std::string serialize(const RunConfig& c) {
    YAML::Emitter e;
    using detail::emit_num;
    auto key = [&](const char* k) -> YAML::Emitter& { return e << YAML::Key << k << YAML::Value; };
    e << YAML::BeginMap;
    key("command") << command_name(c.command);
    key("grid") << YAML::BeginMap;
    key("h");
    emit_num(e, c.h);
    key("margin") << c.margin;
    if (c.extent) {
        key("extent") << YAML::Flow << YAML::BeginSeq;
        for (double v : {c.extent->lo.x, c.extent->lo.y, c.extent->hi.x, c.extent->hi.y}) emit_num(e, v);
        e << YAML::EndSeq;
    }
    e << YAML::EndMap;
    if (c.shape) {
        key("shape");
        detail::emit_shape(e, *c.shape);
    }
    if (c.shape0) {
        key("shape0");
        detail::emit_shape(e, *c.shape0);
    }
    if (c.shape1) {
        key("shape1");
        detail::emit_shape(e, *c.shape1);
    }
    key("potential");
    detail::emit_potential(e, c.potential);
    key("t") << YAML::Flow << YAML::BeginSeq;
    for (double t : c.t) emit_num(e, t);
    e << YAML::EndSeq;
    key("tolerances") << YAML::BeginMap;
    key("solver");
    emit_num(e, c.tolerances.solver);
    key("max_iter") << c.tolerances.max_iter;
    key("chord_allowance");
    emit_num(e, c.tolerances.chord_allowance);
    key("homogeneity_allowance");
    emit_num(e, c.tolerances.homogeneity_allowance);
    key("variational");
    emit_num(e, c.tolerances.variational);
    e << YAML::EndMap;
    key("output") << YAML::DoubleQuoted << c.output;
    key("seed") << c.seed;
    key("threads") << c.threads;
    key("pair_budget") << c.pair_budget;
    key("trial_function") << c.trial_function;
    key("variational_trials") << c.variational_trials;
    key("epsilon");
    emit_num(e, c.epsilon);
    key("rho");
    emit_num(e, c.rho);
    key("r_inner");
    emit_num(e, c.r_inner);
    key("r_outer");
    emit_num(e, c.r_outer);
    key("center");
    detail::emit_vec(e, c.center);
    key("mollifier");
    emit_num(e, c.mollifier);
    key("probe_margin");
    emit_num(e, c.probe_margin);
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

} // namespace bmeig
