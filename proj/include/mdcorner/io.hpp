#ifndef MDCORNER_IO_HPP
#define MDCORNER_IO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <openssl/evp.h>

#include "corner_extract.hpp"
#include "preprocess.hpp"

namespace mdc::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_file(const std::filesystem::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os.write(bytes.data(), std::streamsize(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string sha256_hex(const std::string& bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// MDCM binary matrices: "MDCM", version, flags (bit 0 complex), u32 rows,
// u32 cols, then little-endian float32 row-major (re, im interleaved).

inline constexpr std::uint8_t kMdcmVersion = 1;

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& s, double x)
{
    const float f = float(x);
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(s, v);
}

inline std::uint32_t get_u32(const std::string& s, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(s[at + i])) << (8 * i);
    return v;
}

inline float get_f32(const std::string& s, std::size_t at)
{
    const std::uint32_t v = get_u32(s, at);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

inline std::string header(bool complex, Eigen::Index rows, Eigen::Index cols)
{
    if (rows < 0 || cols < 0 || rows > 0xffffffffLL || cols > 0xffffffffLL)
        throw std::invalid_argument("matrix too large for MDCM");
    std::string s = "MDCM";
    s.push_back(char(kMdcmVersion));
    s.push_back(char(complex ? 1 : 0));
    put_u32(s, std::uint32_t(rows));
    put_u32(s, std::uint32_t(cols));
    return s;
}

}  // namespace detail

inline std::string encode_mdcm(const Eigen::MatrixXd& m)
{
    std::string s = detail::header(false, m.rows(), m.cols());
    s.reserve(s.size() + 4 * std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_f32(s, m(r, c));
    return s;
}

inline std::string encode_mdcm(const Eigen::MatrixXcd& m)
{
    std::string s = detail::header(true, m.rows(), m.cols());
    s.reserve(s.size() + 8 * std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            detail::put_f32(s, m(r, c).real());
            detail::put_f32(s, m(r, c).imag());
        }
    return s;
}

struct MdcmMatrix {
    bool complex = false;
    Eigen::MatrixXd real;   // valid when !complex
    Eigen::MatrixXcd cplx;  // valid when complex
};

inline MdcmMatrix decode_mdcm(const std::string& s)
{
    if (s.size() < 14 || s.compare(0, 4, "MDCM") != 0) throw FormatError("not an MDCM file");
    if (std::uint8_t(s[4]) != kMdcmVersion) throw FormatError("unsupported MDCM version");
    const std::uint8_t flags = std::uint8_t(s[5]);
    if (flags & ~1u) throw FormatError("unknown MDCM flags");
    const std::uint64_t rows = detail::get_u32(s, 6), cols = detail::get_u32(s, 10);
    MdcmMatrix out;
    out.complex = flags & 1u;
    const std::uint64_t per = out.complex ? 8 : 4;
    if (s.size() != 14 + rows * cols * per) throw FormatError("MDCM payload size mismatch");
    std::size_t at = 14;
    if (out.complex) {
        out.cplx.resize(Eigen::Index(rows), Eigen::Index(cols));
        for (std::uint64_t r = 0; r < rows; ++r)
            for (std::uint64_t c = 0; c < cols; ++c, at += 8)
                out.cplx(Eigen::Index(r), Eigen::Index(c)) = {detail::get_f32(s, at), detail::get_f32(s, at + 4)};
    } else {
        out.real.resize(Eigen::Index(rows), Eigen::Index(cols));
        for (std::uint64_t r = 0; r < rows; ++r)
            for (std::uint64_t c = 0; c < cols; ++c, at += 4)
                out.real(Eigen::Index(r), Eigen::Index(c)) = detail::get_f32(s, at);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Axis sidecar: "key = value" lines describing a stored map.

inline std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string encode_axis(const ProfileMap& m)
{
    std::ostringstream os;
    os << "kind = " << map_kind_name(m.kind) << '\n'
       << "rows = " << m.rows() << '\n'
       << "cols = " << m.cols() << '\n'
       << "time_step = " << fmt(m.time_step) << '\n'
       << "time_extent = " << fmt(m.time_step * std::max(m.cols() - 1, 0)) << '\n'
       << "normalized = " << (m.normalized ? 1 : 0) << '\n';
    if (m.kind == MapKind::Range || m.kind == MapKind::Doppler) {
        os << "axis_origin = " << fmt(m.axis_origin) << '\n'
           << "axis_step = " << fmt(m.axis_step) << '\n'
           << "value_min = " << fmt(m.axis_origin) << '\n'
           << "value_max = " << fmt(m.axis_origin + m.axis_step * std::max(m.rows() - 1, 0)) << '\n';
    } else {
        const SquaredAxis& a = m.squared;
        os << "source_origin = " << fmt(a.source_origin) << '\n'
           << "source_step = " << fmt(a.source_step) << '\n'
           << "source_rows = " << a.source_rows << '\n'
           << "full_rows = " << a.full_rows() << '\n'
           << "value_min = " << fmt(a.source_origin) << '\n'
           << "value_max = " << fmt(a.source_origin + a.source_step * std::max(a.source_rows - 1, 0)) << '\n';
    }
    return os.str();
}

inline std::map<std::string, std::string> parse_kv(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("malformed sidecar line '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

/// Rebuilds a map from its MDCM payload and sidecar.
inline ProfileMap decode_map(const std::string& mdcm, const std::string& axis)
{
    const MdcmMatrix m = decode_mdcm(mdcm);
    if (m.complex) throw FormatError("map payload must be real");
    const auto kv = parse_kv(axis);
    auto get = [&](const std::string& k) {
        const auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("sidecar lacks '" + k + "'");
        return it->second;
    };
    ProfileMap p;
    p.data = m.real;
    p.kind = map_kind_from_name(get("kind"));
    p.time_step = std::stod(get("time_step"));
    p.normalized = get("normalized") == "1";
    if (std::stoi(get("rows")) != p.rows() || std::stoi(get("cols")) != p.cols())
        throw FormatError("sidecar shape disagrees with payload");
    if (p.kind == MapKind::Range || p.kind == MapKind::Doppler) {
        p.axis_origin = std::stod(get("axis_origin"));
        p.axis_step = std::stod(get("axis_step"));
    } else {
        p.squared.kind = p.kind;
        p.squared.source_origin = std::stod(get("source_origin"));
        p.squared.source_step = std::stod(get("source_step"));
        p.squared.source_rows = std::stoi(get("source_rows"));
        p.squared.rows = p.rows();
    }
    return p;
}

// ---------------------------------------------------------------------------
// PGM heatmaps

/// 8-bit P5 image of a normalized map. With `flip` the last map row (top of
/// the value axis) is written first. Overlay corners become 3x3 white
/// crosses, clipped at the border.
inline std::string encode_pgm(const Eigen::MatrixXd& map, const std::vector<Corner>& overlay = {}, bool flip = true)
{
    const int rows = int(map.rows()), cols = int(map.cols());
    std::vector<std::uint8_t> px(std::size_t(rows) * cols);
    auto at = [&](int r, int c) -> std::uint8_t& { return px[std::size_t(flip ? rows - 1 - r : r) * cols + c]; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = std::isfinite(map(r, c)) ? std::clamp(map(r, c), 0.0, 1.0) : 0.0;
            at(r, c) = std::uint8_t(std::lround(v * 255.0));
        }
    for (const Corner& k : overlay) {
        const int r0 = int(std::lround(k.row)), c0 = int(std::lround(k.col));
        for (const auto& [dr, dc] : {std::pair{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
            const int r = r0 + dr, c = c0 + dc;
            if (r >= 0 && r < rows && c >= 0 && c < cols) at(r, c) = 255;
        }
    }
    std::string s = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    s.append(reinterpret_cast<const char*>(px.data()), px.size());
    return s;
}

// ---------------------------------------------------------------------------
// CSV tables

inline std::string encode_corners_csv(const CornerSet& cs)
{
    std::ostringstream os;
    os << "map_id,row,col,u,v,response,padded\n";
    for (const Corner& c : cs.corners)
        os << cs.map_id << ',' << fmt(c.row) << ',' << fmt(c.col) << ',' << fmt(c.u) << ',' << fmt(c.v) << ','
           << fmt(c.response) << ',' << (c.padded ? 1 : 0) << '\n';
    return os.str();
}

inline CornerSet decode_corners_csv(const std::string& text)
{
    CornerSet cs;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("map_id,", 0) != 0) throw FormatError("not a corner CSV");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        if (f.size() != 7) throw FormatError("corner CSV row needs 7 fields");
        cs.map_id = f[0];
        Corner c;
        c.row = std::stod(f[1]);
        c.col = std::stod(f[2]);
        c.u = std::stod(f[3]);
        c.v = std::stod(f[4]);
        c.response = std::stod(f[5]);
        c.padded = f[6] == "1";
        cs.corners.push_back(c);
    }
    return cs;
}

inline std::string encode_cloud_csv(const PointCloudRD& pc, std::size_t r_count)
{
    std::ostringstream os;
    os << "index,u,v,w,source\n";
    for (Eigen::Index i = 0; i < pc.points.rows(); ++i)
        os << i << ',' << fmt(pc.points(i, 0)) << ',' << fmt(pc.points(i, 1)) << ',' << fmt(pc.points(i, 2)) << ','
           << (std::size_t(i) < r_count ? 'R' : 'D') << '\n';
    return os.str();
}

}  // namespace mdc::io

#endif  // MDCORNER_IO_HPP
