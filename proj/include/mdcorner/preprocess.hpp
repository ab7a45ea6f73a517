#ifndef MDCORNER_PREPROCESS_HPP
#define MDCORNER_PREPROCESS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include "echo_synth.hpp"
#include "fft.hpp"
#include "geometry.hpp"

namespace mdc {

/// Real map with rows on a value axis and columns on slow time. Row k sits
/// at axis_origin + k * axis_step for linear kinds; squared kinds carry the
/// geometry of their source axis in `squared`.
struct ProfileMap {
    Eigen::MatrixXd data;
    MapKind kind = MapKind::Range;
    double axis_origin = 0.0;
    double axis_step = 1.0;
    double time_step = 4.0 / 1024;
    SquaredAxis squared;
    bool normalized = false;

    int rows() const { return int(data.rows()); }
    int cols() const { return int(data.cols()); }
};

/// Complex range profiles: rows are range bins, columns are chirps.
struct RangeProfiles {
    Eigen::MatrixXcd data;
    double range_step = 0.0;  // m per row, row 0 at 0 m
    double time_step = 0.0;
};

enum class WindowKind { Rectangular, Hann };

struct PreprocessConfig {
    WindowKind range_window = WindowKind::Hann;
    int zero_pad = 2;
    double max_range = 5.0;
    bool mti = true;
    bool emd_rtm = true;
    bool emd_dtm = true;
    bool coherent_sum = true;
    int stft_window = 128;
    int stft_hop = 4;
    int stft_nfft = 256;
    double doppler_max = 64.0;
    // EMD sifting
    double emd_sd = 0.3;
    int emd_max_sift = 10;
    int emd_max_imfs = 8;

    void validate() const
    {
        auto fail = [](const std::string& w) { throw std::invalid_argument("preprocess." + w); };
        if (zero_pad < 1) fail("zero_pad must be >= 1");
        if (!(max_range > 0.0)) fail("max_range must be > 0");
        if (stft_window < 2) fail("stft_window must be >= 2");
        if (stft_hop < 1) fail("stft_hop must be >= 1");
        if (stft_nfft < stft_window) fail("stft_nfft must be >= stft_window");
        if (!(doppler_max > 0.0)) fail("doppler_max must be > 0");
        if (!(emd_sd > 0.0)) fail("emd_sd must be > 0");
        if (emd_max_sift < 1) fail("emd_max_sift must be >= 1");
        if (emd_max_imfs < 1) fail("emd_max_imfs must be >= 1");
    }
};

inline std::vector<double> hann(int n)
{
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[std::size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    return w;
}

/// Windowed, zero-padded beat spectrum per chirp, cropped to [0, max_range].
inline RangeProfiles range_profiles(const EchoFrame& frame, const PreprocessConfig& cfg = {})
{
    const RadarConfig& rc = frame.radar;
    const int M = int(frame.data.rows()), N = int(frame.data.cols());
    const int nfft = N * cfg.zero_pad;
    RangeProfiles out;
    out.range_step = rc.range_resolution() * N / nfft;
    out.time_step = rc.pri();
    const int keep = std::min(nfft, int(std::floor(cfg.max_range / out.range_step + 1e-9)) + 1);
    out.data.resize(keep, M);
    const auto w = cfg.range_window == WindowKind::Hann ? hann(N) : std::vector<double>(std::size_t(N), 1.0);
    std::vector<cplx> buf(static_cast<std::size_t>(nfft));
    for (int m = 0; m < M; ++m) {
        std::fill(buf.begin(), buf.end(), cplx{});
        for (int i = 0; i < N; ++i) buf[std::size_t(i)] = frame.data(m, i) * w[std::size_t(i)];
        fft::dft(buf.data(), buf.data(), nfft);
        for (int k = 0; k < keep; ++k) out.data(k, m) = buf[std::size_t(k)] / double(N);
    }
    return out;
}

/// Two-pulse canceller along slow time; column 0 is zero.
inline RangeProfiles mti_filter(const RangeProfiles& in)
{
    if (in.data.cols() < 2) throw std::invalid_argument("MTI needs at least two chirps");
    RangeProfiles out = in;
    out.data.col(0).setZero();
    for (Eigen::Index m = in.data.cols() - 1; m >= 1; --m) out.data.col(m) = in.data.col(m) - in.data.col(m - 1);
    return out;
}

inline ProfileMap magnitude_map(const RangeProfiles& rp)
{
    ProfileMap map;
    map.kind = MapKind::Range;
    map.data = rp.data.cwiseAbs();
    map.axis_origin = 0.0;
    map.axis_step = rp.range_step;
    map.time_step = rp.time_step;
    return map;
}

/// Magnitude RTM of a frame (no clutter suppression).
inline ProfileMap range_compress(const EchoFrame& frame, const PreprocessConfig& cfg = {})
{
    return magnitude_map(range_profiles(frame, cfg));
}

/// Min-max to [0, 1]; a constant map becomes all zeros.
inline Eigen::MatrixXd normalize(const Eigen::MatrixXd& x)
{
    if (x.size() == 0) return x;
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    if (!(hi > lo)) return Eigen::MatrixXd::Zero(x.rows(), x.cols());
    return (x.array() - lo) / (hi - lo);
}

inline ProfileMap normalize(ProfileMap map)
{
    map.data = normalize(map.data);
    map.normalized = true;
    return map;
}

// ---------------------------------------------------------------------------
// Empirical mode decomposition

struct EmdConfig {
    double sd_threshold = 0.3;
    int max_sift = 10;
    int max_imfs = 8;
    /// IMF1 is dropped only when its zero-crossing rate (cycles per sample)
    /// reaches this value; 0 always drops it.
    double noise_rate = 0.0;
};

namespace detail {

struct Extrema {
    std::vector<double> max_x, max_y, min_x, min_y;
};

inline Extrema find_extrema(std::span<const double> x)
{
    Extrema e;
    const std::size_t n = x.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (x[i] > x[i - 1] && x[i] >= x[i + 1]) {
            e.max_x.push_back(double(i));
            e.max_y.push_back(x[i]);
        } else if (x[i] < x[i - 1] && x[i] <= x[i + 1]) {
            e.min_x.push_back(double(i));
            e.min_y.push_back(x[i]);
        }
    }
    return e;
}

/// Cubic spline through the knots with the sequence endpoints pinned.
inline void envelope(std::vector<double> kx, std::vector<double> ky, std::span<const double> x, std::vector<double>& out)
{
    const std::size_t n = x.size();
    if (kx.empty() || kx.front() > 0.0) {
        kx.insert(kx.begin(), 0.0);
        ky.insert(ky.begin(), x[0]);
    }
    if (kx.back() < double(n - 1)) {
        kx.push_back(double(n - 1));
        ky.push_back(x[n - 1]);
    }
    out.resize(n);
    const gsl_interp_type* type = kx.size() >= 3 ? gsl_interp_cspline : gsl_interp_linear;
    gsl_interp* interp = gsl_interp_alloc(type, kx.size());
    gsl_interp_accel* acc = gsl_interp_accel_alloc();
    gsl_interp_init(interp, kx.data(), ky.data(), kx.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = gsl_interp_eval(interp, kx.data(), ky.data(), double(i), acc);
    gsl_interp_accel_free(acc);
    gsl_interp_free(interp);
}

}  // namespace detail

/// Intrinsic mode functions by sifting; the last element is the residue.
inline std::vector<std::vector<double>> emd_decompose(std::span<const double> x, const EmdConfig& cfg = {})
{
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("EMD input must be finite");
    static const bool quiet = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)quiet;

    std::vector<std::vector<double>> imfs;
    std::vector<double> residue(x.begin(), x.end());
    std::vector<double> upper, lower;
    for (int k = 0; k < cfg.max_imfs; ++k) {
        auto ext = detail::find_extrema(residue);
        if (ext.max_x.size() < 2 || ext.min_x.size() < 2) break;
        std::vector<double> h = residue;
        for (int it = 0; it < cfg.max_sift; ++it) {
            ext = detail::find_extrema(h);
            if (ext.max_x.size() < 2 || ext.min_x.size() < 2) break;
            detail::envelope(ext.max_x, ext.max_y, h, upper);
            detail::envelope(ext.min_x, ext.min_y, h, lower);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < h.size(); ++i) {
                const double mean = 0.5 * (upper[i] + lower[i]);
                num += mean * mean;
                den += h[i] * h[i];
                h[i] -= mean;
            }
            if (den == 0.0 || num / den < cfg.sd_threshold) break;
        }
        for (std::size_t i = 0; i < h.size(); ++i) residue[i] -= h[i];
        imfs.push_back(std::move(h));
    }
    imfs.push_back(std::move(residue));
    return imfs;
}

namespace detail {

inline double crossing_rate(const std::vector<double>& x)
{
    int n = 0;
    for (std::size_t i = 1; i < x.size(); ++i) n += (x[i - 1] < 0.0) != (x[i] < 0.0);
    return x.size() > 1 ? 0.5 * n / double(x.size() - 1) : 0.0;
}

}  // namespace detail

/// Drops the first (highest-frequency) IMF. Sequences with fewer than three
/// IMFs are returned unchanged, as are sequences whose IMF1 oscillates slower
/// than `cfg.noise_rate`.
inline std::vector<double> emd_denoise(std::span<const double> x, const EmdConfig& cfg = {})
{
    if (x.size() < 8) throw std::invalid_argument("EMD denoising needs at least 8 samples");
    const auto parts = emd_decompose(x, cfg);
    const std::size_t nimf = parts.size() - 1;
    if (nimf < 3) return {x.begin(), x.end()};
    // a narrowband signal puts its own carrier into IMF1
    if (detail::crossing_rate(parts[0]) < cfg.noise_rate) return {x.begin(), x.end()};
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t k = 1; k < parts.size(); ++k)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += parts[k][i];
    return out;
}

/// Real and imaginary parts denoised independently.
inline std::vector<cplx> emd_denoise(std::span<const cplx> x, const EmdConfig& cfg = {})
{
    std::vector<double> re(x.size()), im(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) re[i] = x[i].real(), im[i] = x[i].imag();
    re = emd_denoise(re, cfg);
    im = emd_denoise(im, cfg);
    std::vector<cplx> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = {re[i], im[i]};
    return out;
}

inline EmdConfig emd_config(const PreprocessConfig& c) { return {c.emd_sd, c.emd_max_sift, c.emd_max_imfs}; }

/// RTM: magnitude of (MTI-filtered) range profiles, each range row denoised
/// along slow time.
inline ProfileMap make_rtm(const RangeProfiles& rp, const PreprocessConfig& cfg = {})
{
    ProfileMap map = magnitude_map(rp);
    if (cfg.emd_rtm) {
        const EmdConfig ec = emd_config(cfg);
        std::vector<double> row(static_cast<std::size_t>(map.cols()));
        for (int r = 0; r < map.rows(); ++r) {
            for (int c = 0; c < map.cols(); ++c) row[std::size_t(c)] = map.data(r, c);
            const auto d = emd_denoise(row, ec);
            for (int c = 0; c < map.cols(); ++c) map.data(r, c) = std::max(d[std::size_t(c)], 0.0);
        }
    }
    return map;
}

// ---------------------------------------------------------------------------
// Doppler-time map

/// Centered STFT magnitude of a slow-time sequence sampled every `dt`
/// seconds. Rows cover [-doppler_max, doppler_max) with zero Doppler at
/// row rows/2; frame k is centered on sample k*hop and column m shows the
/// frame nearest to sample m.
inline ProfileMap stft_map(std::span<const cplx> x, double dt, const PreprocessConfig& cfg = {})
{
    const int M = int(x.size());
    const int L = cfg.stft_window, hop = cfg.stft_hop, nfft = cfg.stft_nfft;
    const double df = 1.0 / (dt * nfft);
    const int half = std::min(nfft / 2, int(std::floor(cfg.doppler_max / df + 1e-9)));
    const int rows = 2 * half;
    const int frames = (M + hop - 1) / hop;
    const auto w = hann(L);
    Eigen::MatrixXd spec(rows, frames);
    std::vector<cplx> buf(static_cast<std::size_t>(nfft));
    for (int f = 0; f < frames; ++f) {
        std::fill(buf.begin(), buf.end(), cplx{});
        // edge frames stay inside the record; a window cut at its center leaks into every bin
        const int start = M >= L ? std::clamp(f * hop - L / 2, 0, M - L) : 0;
        for (int i = 0; i < L; ++i) {
            const int s = start + i;
            if (s < M) buf[std::size_t(i)] = x[std::size_t(s)] * w[std::size_t(i)];
        }
        fft::dft(buf.data(), buf.data(), nfft);
        for (int r = 0; r < rows; ++r) {
            const int k = ((r - half) % nfft + nfft) % nfft;
            spec(r, f) = std::abs(buf[std::size_t(k)]);
        }
    }
    ProfileMap map;
    map.kind = MapKind::Doppler;
    map.axis_origin = -half * df;
    map.axis_step = df;
    map.time_step = dt;
    map.data.resize(rows, M);
    for (int m = 0; m < M; ++m) {
        const int f = std::min(frames - 1, (m + hop / 2) / hop);
        map.data.col(m) = spec.col(f);
    }
    return map;
}

/// Slow-time sequence of the range gate [0, max_range]: the sum of its
/// unwindowed beat-spectrum cells, which reads the gate at the chirp start.
/// There the beat phase advances with the carrier Doppler 2 fc v / c; a
/// tapered or centred sum would either cancel across a target's cells or pick
/// up the swept frequency.
inline std::vector<cplx> gate_sequence(const EchoFrame& frame, const PreprocessConfig& cfg = {})
{
    const int M = int(frame.data.rows()), N = int(frame.data.cols());
    const int nfft = N * cfg.zero_pad;
    const double step = frame.radar.range_resolution() * N / nfft;
    const int keep = std::min(nfft, int(std::floor(cfg.max_range / step + 1e-9)) + 1);
    std::vector<cplx> g(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        cplx acc{};
        for (int k = 0; k < keep; ++k) acc += std::polar(1.0, -2.0 * kPi * double(k) * n / nfft);
        g[std::size_t(n)] = acc / double(N);
    }
    std::vector<cplx> s(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        cplx acc{};
        for (int n = 0; n < N; ++n) acc += frame.data(m, n) * g[std::size_t(n)];
        s[std::size_t(m)] = acc;
    }
    return s;
}

/// Two-pulse canceller on a slow-time sequence; sample 0 is zero.
inline std::vector<cplx> mti_filter(std::vector<cplx> s)
{
    if (s.size() < 2) throw std::invalid_argument("MTI needs at least two chirps");
    for (std::size_t m = s.size() - 1; m >= 1; --m) s[m] -= s[m - 1];
    s[0] = cplx{};
    return s;
}

/// Slow-time sequence from range profiles: magnitudes summed per chirp.
inline std::vector<cplx> magnitude_sum(const RangeProfiles& rp)
{
    std::vector<cplx> s(static_cast<std::size_t>(rp.data.cols()));
    for (Eigen::Index m = 0; m < rp.data.cols(); ++m) s[std::size_t(m)] = cplx(rp.data.col(m).cwiseAbs().sum(), 0.0);
    return s;
}

/// DTM from a clutter-suppressed slow-time sequence.
inline ProfileMap make_dtm(std::vector<cplx> s, double dt, const PreprocessConfig& cfg = {})
{
    if (cfg.emd_dtm && s.size() >= 8) {
        // only out-of-band IMF1 content counts as noise
        EmdConfig ec = emd_config(cfg);
        ec.noise_rate = cfg.doppler_max * dt;
        s = emd_denoise(std::span<const cplx>(s), ec);
    }
    return stft_map(s, dt, cfg);
}

struct Profiles {
    ProfileMap rtm;
    ProfileMap dtm;
};

/// Frame to normalized RTM and DTM.
inline Profiles preprocess(const EchoFrame& frame, const PreprocessConfig& cfg = {})
{
    cfg.validate();
    RangeProfiles rp = range_profiles(frame, cfg);
    if (cfg.mti) rp = mti_filter(rp);
    std::vector<cplx> s;
    if (cfg.coherent_sum) {
        s = gate_sequence(frame, cfg);
        if (cfg.mti) s = mti_filter(std::move(s));
    } else {
        s = magnitude_sum(rp);
    }
    return {normalize(make_rtm(rp, cfg)), normalize(make_dtm(std::move(s), rp.time_step, cfg))};
}

}  // namespace mdc

#endif  // MDCORNER_PREPROCESS_HPP
