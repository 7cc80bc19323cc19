#pragma once

#include <cmath>
#include <string>

#include "bmeig/error.hpp"
#include "bmeig/grid.hpp"

namespace bmeig {

/// Potential V for the operator -Delta + V. Every built-in variant is convex
/// on the admissible parameter range; anything else is rejected.
struct PotentialSpec {
    enum class Kind { Zero, Constant, Quadratic, Anisotropic };

    Kind kind = Kind::Zero;
    double c = 0.0;      // Constant value, or Quadratic coefficient
    Vec2 center;         // Quadratic / Anisotropic
    double a11 = 0.0;    // Anisotropic coefficient matrix [[a11, a12], [a12, a22]]
    double a12 = 0.0;
    double a22 = 0.0;
    bool declared_convex = true;

    static PotentialSpec zero() { return {}; }
    static PotentialSpec constant(double value) {
        PotentialSpec v;
        v.kind = Kind::Constant;
        v.c = value;
        return v;
    }
    static PotentialSpec quadratic(double coeff, Vec2 x0 = {}) {
        PotentialSpec v;
        v.kind = Kind::Quadratic;
        v.c = coeff;
        v.center = x0;
        return v;
    }
    static PotentialSpec anisotropic(double a11, double a12, double a22, Vec2 x0 = {}) {
        PotentialSpec v;
        v.kind = Kind::Anisotropic;
        v.a11 = a11;
        v.a12 = a12;
        v.a22 = a22;
        v.center = x0;
        return v;
    }

    /// True when V vanishes identically.
    bool is_zero() const {
        switch (kind) {
        case Kind::Zero: return true;
        case Kind::Constant:
        case Kind::Quadratic: return c == 0.0;
        case Kind::Anisotropic: return a11 == 0.0 && a12 == 0.0 && a22 == 0.0;
        }
        return false;
    }

    bool convex() const {
        switch (kind) {
        case Kind::Zero:
        case Kind::Constant: return true;
        case Kind::Quadratic: return c >= 0.0;
        case Kind::Anisotropic: return a11 >= 0.0 && a22 >= 0.0 && a11 * a22 - a12 * a12 >= 0.0;
        }
        return false;
    }

    void validate() const {
        require(std::isfinite(c) && std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a22),
                ErrorKind::InvalidParameter, "potential parameters must be finite");
        require(declared_convex && convex(), ErrorKind::PotentialNotConvex,
                "potential must be convex (quadratic coefficient >= 0, matrix positive semidefinite)");
    }

    double operator()(Vec2 p) const {
        const Vec2 q = p - center;
        switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return c;
        case Kind::Quadratic: return c * dot(q, q);
        case Kind::Anisotropic: return a11 * q.x * q.x + 2.0 * a12 * q.x * q.y + a22 * q.y * q.y;
        }
        return 0.0;
    }

    friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;
};

inline std::string potential_name(PotentialSpec::Kind k) {
    switch (k) {
    case PotentialSpec::Kind::Zero: return "zero";
    case PotentialSpec::Kind::Constant: return "constant";
    case PotentialSpec::Kind::Quadratic: return "quadratic";
    case PotentialSpec::Kind::Anisotropic: return "anisotropic";
    }
    return "zero";
}

} // namespace bmeig
