#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/supconv.hpp"
#include "bmeig/verify.hpp"

namespace bmeig::io {

/// Shortest round-trip decimal form, '.' separator regardless of locale.
inline std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format(std::int64_t v) { return std::to_string(v); }

/// Minimal CSV writer: fixed header, one row per call.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os), columns_(header.size()) {
        bool first = true;
        for (auto h : header) {
            if (!first) os_ << ',';
            os_ << h;
            first = false;
        }
        os_ << '\n';
    }

    template <class... Ts>
    void row(const Ts&... values) {
        require(sizeof...(Ts) == columns_, ErrorKind::Io, "CSV row width does not match header");
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(values), first = false), ...);
        os_ << '\n';
    }

private:
    static std::string cell(double v) { return format(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::ostream& os_;
    std::size_t columns_;
};

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    require(static_cast<bool>(os), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    return os;
}

inline void check_written(std::ostream& os, const std::filesystem::path& path) {
    os.flush();
    require(static_cast<bool>(os), ErrorKind::Io, "write failed for " + path.string());
}

// Binary field layout, little endian:
//   0  char[4]  "SCBM"
//   4  int32    nx
//   8  int32    ny
//  12  4 bytes  zero padding
//  16  float64  h
//  24  float64  values, row-major by y then x, `components` per node
inline constexpr char kMagic[4] = {'S', 'C', 'B', 'M'};
inline constexpr std::size_t kHeaderBytes = 24;

namespace detail {

template <class T>
void put_le(std::vector<char>& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <class T>
T get_le(const char* p) {
    char raw[sizeof(T)];
    std::memcpy(raw, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
}

inline std::vector<char> header(const Grid& g) {
    std::vector<char> buf(kMagic, kMagic + 4);
    put_le<std::int32_t>(buf, g.nx);
    put_le<std::int32_t>(buf, g.ny);
    put_le<std::int32_t>(buf, 0);
    put_le<double>(buf, g.h);
    return buf;
}

} // namespace detail

inline std::vector<char> encode_field(const Grid& g, std::span<const double> values) {
    require(values.size() % g.size() == 0, ErrorKind::GridMismatch, "field size does not match grid");
    std::vector<char> buf = detail::header(g);
    buf.reserve(kHeaderBytes + 8 * values.size());
    for (double v : values) detail::put_le<double>(buf, v);
    return buf;
}

struct DecodedField {
    int nx = 0, ny = 0;
    double h = 0.0;
    std::vector<double> values;
};

inline DecodedField decode_field(std::span<const char> bytes) {
    require(bytes.size() >= kHeaderBytes && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::Io,
            "not a field file");
    DecodedField f;
    f.nx = detail::get_le<std::int32_t>(bytes.data() + 4);
    f.ny = detail::get_le<std::int32_t>(bytes.data() + 8);
    f.h = detail::get_le<double>(bytes.data() + 16);
    const std::size_t n = (bytes.size() - kHeaderBytes) / 8;
    require((bytes.size() - kHeaderBytes) % 8 == 0 && f.nx > 0 && f.ny > 0 &&
                n % (static_cast<std::size_t>(f.nx) * f.ny) == 0,
            ErrorKind::Io, "truncated field file");
    f.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) f.values[k] = detail::get_le<double>(bytes.data() + kHeaderBytes + 8 * k);
    return f;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    auto os = open_out(path, true);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    check_written(os, path);
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_field(const std::filesystem::path& path, const Grid& g, std::span<const double> values) {
    write_bytes(path, encode_field(g, values));
}

/// Two doubles per node: world coordinates of the stored x0, NaN where none.
inline void write_argmax(const std::filesystem::path& path, const SupConvField& f) {
    const Grid& g = f.grid();
    std::vector<double> xy(2 * g.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < g.size(); ++c) {
        if (!f.has_argmax(c)) continue;
        const Vec2 p = f.x0(c);
        xy[2 * c] = p.x;
        xy[2 * c + 1] = p.y;
    }
    write_field(path, g, xy);
}

/// Binary 8-bit graymap; the top image row is the largest y.
inline std::vector<char> encode_pgm(const Grid& g, std::span<const std::uint8_t> pixels) {
    const std::string head = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n255\n";
    std::vector<char> buf(head.begin(), head.end());
    for (int j = g.ny - 1; j >= 0; --j)
        for (int i = 0; i < g.nx; ++i) buf.push_back(static_cast<char>(pixels[g.index(i, j)]));
    return buf;
}

inline void write_mask_pgm(const std::filesystem::path& path, const GridDomain& d) {
    std::vector<std::uint8_t> px(d.grid.size());
    for (std::size_t c = 0; c < px.size(); ++c) px[c] = d.inside[c] ? 255 : 0;
    write_bytes(path, encode_pgm(d.grid, px));
}

/// Linear scaling of [min, max] onto 0..255.
inline void write_heat_pgm(const std::filesystem::path& path, const Grid& g, std::span<const double> w) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : w) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<std::uint8_t> px(g.size(), 0);
    if (hi > lo)
        for (std::size_t c = 0; c < px.size(); ++c)
            px[c] = static_cast<std::uint8_t>(std::lround(255.0 * (w[c] - lo) / (hi - lo)));
    write_bytes(path, encode_pgm(g, px));
}

inline void write_eigen_csv(std::ostream& os, const std::string& domain_id, const EigenPair& e) {
    CsvWriter csv(os, {"domain_id", "h", "lambda", "residual", "iterations"});
    csv.row(domain_id, e.grid.h, e.lambda, e.residual, e.iterations);
}

inline void write_bm_csv(std::ostream& os, const BMReport& r) {
    CsvWriter csv(os, {"t", "lambda0", "lambda1", "lambda_t", "rayleigh_ubar", "chord", "slack1", "slack2", "h",
                       "flags"});
    for (const BMRow& w : r.rows)
        csv.row(w.t, w.lambda0, w.lambda1, w.lambda_t, w.rayleigh_ubar, w.chord, w.slack1, w.slack2, w.h, w.flags);
}

inline void write_logconcavity_csv(std::ostream& os, const LogConcavityReport& r) {
    CsvWriter csv(os, {"domain_id", "worst_deficit", "pair_count", "value_floor", "tolerance"});
    csv.row(r.domain_id, r.worst_deficit, r.pair_count, r.value_floor, r.tolerance);
}

inline void write_jump_csv(std::ostream& os, const JumpReport& j) {
    CsvWriter csv(os, {"t", "lambda_t", "difference", "chord", "flags"});
    for (std::size_t k = 0; k < j.t.size(); ++k) {
        const double d = k + 1 < j.t.size() ? j.differences[k] : std::numeric_limits<double>::quiet_NaN();
        csv.row(j.t[k], j.lambda_t[k], d, j.chord.rows[k].chord, j.chord.rows[k].flags);
    }
}

/// Probe rows keyed by (pair id, t, h).
inline void write_probe_csv(std::ostream& os, const std::string& pair_id, const SupConvField& f, double lipschitz,
                            double lipschitz_bound, const SemiconvexityProbe& sc, const IbpResult& ibp) {
    CsvWriter csv(os, {"pair_id", "t", "h", "value_floor", "value_ceiling", "flagged", "lipschitz",
                       "lipschitz_bound", "lambda_probe", "probe_margin", "ibp_lhs", "ibp_rhs", "ibp_flux",
                       "ibp_flux_bound"});
    csv.row(pair_id, f.t, f.grid().h, f.value_floor, f.value_ceiling, f.flagged.size(), lipschitz, lipschitz_bound,
            sc.lambda_probe, sc.margin, ibp.lhs, ibp.rhs, ibp.flux, ibp.flux_bound);
}

} // namespace bmeig::io
