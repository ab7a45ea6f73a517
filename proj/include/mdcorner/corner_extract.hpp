#ifndef MDCORNER_CORNER_EXTRACT_HPP
#define MDCORNER_CORNER_EXTRACT_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fft.hpp"
#include "geometry.hpp"
#include "motion_model.hpp"

namespace mdc {

struct DetectorConfig {
    int orientations = 8;
    double sigma = 3.0;       // px, along the derivative direction
    double anisotropy = 1.5;  // across/along scale ratio
    double nms_radius = 7.0;  // px
    int count = 30;
    double gain_floor = 0.01;  // column gain levelling; 0 disables

    int kernel_radius() const { return int(std::ceil(4.0 * sigma * std::max(anisotropy, 1.0))); }

    void validate() const
    {
        auto fail = [](const std::string& w) { throw std::invalid_argument("detector." + w); };
        if (orientations < 1) fail("orientations must be >= 1");
        if (!(sigma > 0.0)) fail("sigma must be > 0");
        if (!(anisotropy > 0.0)) fail("anisotropy must be > 0");
        if (!(nms_radius >= 0.0)) fail("nms_radius must be >= 0");
        if (count < 1) fail("count must be >= 1");
        if (!(gain_floor >= 0.0 && gain_floor <= 1.0)) fail("gain_floor must be in [0, 1]");
    }
};

/// Negated, scale-normalized second derivative of an anisotropic Gaussian
/// along direction theta, with zero mean over its support.
inline Eigen::MatrixXd directional_kernel(double theta, const DetectorConfig& cfg)
{
    const int r = cfg.kernel_radius();
    const double sa = cfg.sigma, sb = cfg.sigma * cfg.anisotropy;
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::MatrixXd k(2 * r + 1, 2 * r + 1);
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double a = x * c + y * s;
            const double b = -x * s + y * c;
            const double g = std::exp(-0.5 * (a * a / (sa * sa) + b * b / (sb * sb))) / (2.0 * kPi * sa * sb);
            k(y + r, x + r) = -(a * a / (sa * sa) - 1.0) * g;
        }
    k.array() -= k.mean();
    return k;
}

namespace detail {

/// Spectra of the oriented kernels for one padded image size.
struct FilterBank {
    int pr = 0, pc = 0;
    std::vector<std::vector<fft::cplx>> spectra;
};

inline std::shared_ptr<const FilterBank> filter_bank(int pr, int pc, const DetectorConfig& cfg)
{
    static std::mutex mtx;
    static std::map<std::tuple<int, int, int, double, double>, std::shared_ptr<const FilterBank>> cache;
    const auto key = std::make_tuple(pr, pc, cfg.orientations, cfg.sigma, cfg.anisotropy);
    {
        std::lock_guard<std::mutex> lock(mtx);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto bank = std::make_shared<FilterBank>();
    bank->pr = pr;
    bank->pc = pc;
    const int r = cfg.kernel_radius();
    for (int o = 0; o < cfg.orientations; ++o) {
        const Eigen::MatrixXd k = directional_kernel(kPi * o / cfg.orientations, cfg);
        std::vector<double> buf(std::size_t(pr) * pc, 0.0);
        // center the kernel on the origin with wrap-around
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x)
                buf[std::size_t((y + pr) % pr) * pc + std::size_t((x + pc) % pc)] = k(y + r, x + r);
        bank->spectra.push_back(fft::rdft2(buf, pr, pc));
    }
    std::lock_guard<std::mutex> lock(mtx);
    return cache.emplace(key, std::move(bank)).first->second;
}

}  // namespace detail

/// Oriented filter responses, one per orientation, same size as the image
/// (edges replicated outward).
inline std::vector<Eigen::MatrixXd> directional_responses(const Eigen::MatrixXd& img, const DetectorConfig& cfg = {})
{
    cfg.validate();
    const int r = cfg.kernel_radius();
    const int rows = int(img.rows()), cols = int(img.cols());
    if (rows < 2 * r + 1 || cols < 2 * r + 1)
        throw std::invalid_argument("map is smaller than the filter support");
    const int pr = fft::good_size(rows + 2 * r), pc = fft::good_size(cols + 2 * r);
    const auto bank = detail::filter_bank(pr, pc, cfg);
    // edge replication; the wrapped tail of the buffer stands for negative indices
    auto src = [r](int i, int n, int padded) { return i < n ? i : (i >= padded - r ? 0 : n - 1); };
    std::vector<double> buf(std::size_t(pr) * pc);
    for (int y = 0; y < pr; ++y)
        for (int x = 0; x < pc; ++x) buf[std::size_t(y) * pc + std::size_t(x)] = img(src(y, rows, pr), src(x, cols, pc));
    const auto spec = fft::rdft2(buf, pr, pc);
    const double scale = 1.0 / (double(pr) * pc);
    std::vector<Eigen::MatrixXd> out;
    std::vector<fft::cplx> prod(spec.size());
    for (const auto& ks : bank->spectra) {
        for (std::size_t i = 0; i < spec.size(); ++i) prod[i] = spec[i] * ks[i];
        const auto conv = fft::irdft2(prod, pr, pc);
        Eigen::MatrixXd resp(rows, cols);
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < cols; ++x) resp(y, x) = conv[std::size_t(y) * pc + std::size_t(x)] * scale;
        out.push_back(std::move(resp));
    }
    return out;
}

/// Divides each column by its peak, smoothed over the kernel width, so weak
/// motion segments compete with strong ones. Peaks below `floor` of the
/// global maximum are not amplified further.
inline Eigen::MatrixXd level_columns(const Eigen::MatrixXd& img, double floor, int radius)
{
    if (floor <= 0.0 || img.size() == 0) return img;
    const Eigen::Index cols = img.cols();
    const Eigen::VectorXd peak = img.colwise().maxCoeff().transpose();
    const double lo = floor * std::max(peak.maxCoeff(), 1e-300);
    Eigen::MatrixXd out = img;
    for (Eigen::Index c = 0; c < cols; ++c) {
        double env = 0.0;
        for (Eigen::Index k = std::max<Eigen::Index>(0, c - radius); k <= std::min(cols - 1, c + radius); ++k)
            env = std::max(env, peak[k]);
        out.col(c) /= std::max(env, lo);
    }
    return out;
}

/// Blob/corner strength: geometric mean over orientations of the squared
/// positive directional responses. Zero on straight ridges and flat areas.
inline Eigen::MatrixXd corner_response(const Eigen::MatrixXd& input, const DetectorConfig& cfg = {})
{
    const Eigen::MatrixXd img = level_columns(input, cfg.gain_floor, cfg.kernel_radius());
    const auto resp = directional_responses(img, cfg);
    Eigen::MatrixXd R = Eigen::MatrixXd::Ones(img.rows(), img.cols());
    const double e = 2.0 / double(resp.size());
    for (const auto& r : resp) R.array() *= r.array().max(0.0).pow(e);
    // round-off floor: filter outputs on a constant image are ~1e-17
    const double floor = 1e-12 * std::max(1.0, img.cwiseAbs().maxCoeff());
    return (R.array() < floor * floor).select(0.0, R);
}

/// 3x3 local maxima of a response map with positive value.
inline std::vector<Corner> local_maxima(const Eigen::MatrixXd& R)
{
    std::vector<Corner> out;
    const int rows = int(R.rows()), cols = int(R.cols());
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            const double v = R(y, x);
            if (!(v > 0.0)) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= rows || xx < 0 || xx >= cols) continue;
                    if (R(yy, xx) > v) {
                        peak = false;
                        break;
                    }
                }
            if (peak) out.push_back(make_corner(y, x, rows, cols, v));
        }
    return out;
}

/// Greedy non-maximum suppression: strongest first, ties by (row, col);
/// a candidate closer than `radius` to an accepted corner is dropped.
inline std::vector<Corner> suppress(std::vector<Corner> cand, double radius, int k)
{
    std::sort(cand.begin(), cand.end(), [](const Corner& a, const Corner& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
    std::vector<Corner> kept;
    for (const Corner& c : cand) {
        if (int(kept.size()) >= k) break;
        const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Corner& a) {
            return std::hypot(a.row - c.row, a.col - c.col) < radius;
        });
        if (clear) kept.push_back(c);
    }
    return kept;
}

/// Top-k corners of a normalized map. Short sets are padded with jittered
/// copies of the strongest corners; a map without maxima yields the uniform
/// grid. Padded entries are flagged.
inline CornerSet extract_corners(const Eigen::MatrixXd& img, const DetectorConfig& cfg = {},
                                 const std::string& map_id = "")
{
    CornerSet cs;
    cs.map_id = map_id;
    const int rows = int(img.rows()), cols = int(img.cols());
    const Eigen::MatrixXd R = corner_response(img, cfg);
    cs.corners = suppress(local_maxima(R), cfg.nms_radius, cfg.count);
    if (cs.corners.empty()) {
        cs.corners = uniform_corner_grid(cfg.count, rows, cols);
        return cs;
    }
    static const int jitter[][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
    const std::size_t real = cs.corners.size();
    for (std::size_t i = 0; int(cs.corners.size()) < cfg.count; ++i) {
        const Corner& src = cs.corners[i % real];
        const int* j = jitter[(i / real) % 8];
        const int step = 1 + int(i / (real * 8));
        const double r = std::clamp(src.row + j[0] * step, 0.0, double(rows - 1));
        const double c = std::clamp(src.col + j[1] * step, 0.0, double(cols - 1));
        cs.corners.push_back(make_corner(r, c, rows, cols, src.response, true));
    }
    return cs;
}

/// Fused 60x3 cloud (u: slow time, v: range^2, w: Doppler^2). Rows 0..29
/// come from PC-R, rows 30..59 from PC-D.
struct PointCloudRD {
    Eigen::MatrixXd points;
    std::vector<bool> flagged;  // looked-up column was all zero
};

namespace detail {

/// Normalized argmax row of a map column; lowest row wins ties. An all-zero
/// column gives the axis center.
inline double column_peak(const Eigen::MatrixXd& map, double col, bool& flagged)
{
    const int c = std::clamp(int(std::lround(col)), 0, int(map.cols()) - 1);
    Eigen::Index best = 0;
    double bv = map(0, c);
    for (Eigen::Index r = 1; r < map.rows(); ++r)
        if (map(r, c) > bv) bv = map(r, c), best = r;
    if (!(bv > 0.0)) {
        flagged = true;
        return 0.5;
    }
    flagged = false;
    return map.rows() > 1 ? double(best) / double(map.rows() - 1) : 0.0;
}

}  // namespace detail

inline PointCloudRD fuse_pc_rd(const CornerSet& pc_r, const CornerSet& pc_d, const Eigen::MatrixXd& r2tm,
                               const Eigen::MatrixXd& d2tm)
{
    if (r2tm.cols() != d2tm.cols()) throw std::invalid_argument("R2TM and D2TM must share the slow-time axis");
    PointCloudRD pc;
    const std::size_t n = pc_r.corners.size() + pc_d.corners.size();
    pc.points.resize(Eigen::Index(n), 3);
    pc.flagged.assign(n, false);
    Eigen::Index i = 0;
    for (const Corner& c : pc_r.corners) {
        bool f = false;
        pc.points.row(i) << c.u, c.v, detail::column_peak(d2tm, c.col, f);
        pc.flagged[std::size_t(i++)] = f;
    }
    for (const Corner& c : pc_d.corners) {
        bool f = false;
        pc.points.row(i) << c.u, detail::column_peak(r2tm, c.col, f), c.v;
        pc.flagged[std::size_t(i++)] = f;
    }
    return pc;
}

/// (u, v) coordinates of a corner set as an n x 2 matrix.
inline Eigen::MatrixXd corner_cloud(const CornerSet& cs)
{
    Eigen::MatrixXd m(Eigen::Index(cs.corners.size()), 2);
    for (std::size_t i = 0; i < cs.corners.size(); ++i) m.row(Eigen::Index(i)) << cs.corners[i].u, cs.corners[i].v;
    return m;
}

}  // namespace mdc

#endif  // MDCORNER_CORNER_EXTRACT_HPP
