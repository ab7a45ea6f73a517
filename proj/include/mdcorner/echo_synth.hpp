#ifndef MDCORNER_ECHO_SYNTH_HPP
#define MDCORNER_ECHO_SYNTH_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motion_model.hpp"

namespace mdc {

using cplx = std::complex<double>;

/// LFMCW radar parameters. Ts is derived from the observation window so
/// that M chirps span it exactly.
struct RadarConfig {
    double carrier = 1.5e9;
    double bandwidth = 2.0e9;
    double window = 4.0;
    int slow_samples = 1024;
    int fast_samples = 1024;
    double tx_amplitude = 1.0;
    std::array<double, 6> reflectivity{0.6, 1.0, 0.3, 0.3, 0.3, 0.3};
    double wall_reflectivity = 10.0;

    double pri() const { return window / slow_samples; }
    double chirp_rate() const { return bandwidth / pri(); }
    double fast_rate() const { return fast_samples / pri(); }
    double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth); }

    /// Beat amplitude of a scatterer with reflectivity eta.
    double beat_amplitude(double eta) const { return 0.5 * eta * tx_amplitude * tx_amplitude; }

    void validate() const
    {
        auto fail = [](const std::string& what) { throw std::invalid_argument("radar." + what); };
        if (!(carrier > 0.0)) fail("carrier must be > 0");
        if (!(bandwidth > 0.0)) fail("bandwidth must be > 0");
        if (!(window > 0.0)) fail("window must be > 0");
        if (slow_samples < 2) fail("slow_samples must be >= 2");
        if (fast_samples < 2) fail("fast_samples must be >= 2");
        if (!(tx_amplitude >= 0.0)) fail("tx_amplitude must be >= 0");
        for (double r : reflectivity)
            if (!(r >= 0.0)) fail("reflectivity must be >= 0");
        if (!(wall_reflectivity >= 0.0)) fail("wall_reflectivity must be >= 0");
    }
};

struct NoiseConfig {
    double target_snr_db = -15.0;
    std::uint64_t seed = 0;
    bool enabled = true;
};

/// M x N base-band samples: rows are chirps (slow time), columns fast time.
struct EchoFrame {
    Eigen::MatrixXcd data;
    RadarConfig radar;
    std::uint64_t seed = 0;
    double noise_variance = 0.0;
};

class RangeAmbiguityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Adds the beat signal of a point scatterer at one-way distance `range`
/// (m) to `row`. Delay is frozen over the chirp.
inline void add_scatterer(std::span<cplx> row, double range, double amplitude, const RadarConfig& cfg)
{
    if (amplitude == 0.0) return;
    const double tau = 2.0 * range / kSpeedOfLight;
    const double ts = cfg.pri();
    const double mu = cfg.chirp_rate();
    const int n = int(row.size());
    if (tau >= ts || mu * tau * ts >= n)
        throw RangeAmbiguityError("scatterer at " + std::to_string(range) + " m exceeds the unambiguous range");
    const double phase0 = 2.0 * kPi * (cfg.carrier * tau - 0.5 * mu * tau * tau);
    const double dphi = 2.0 * kPi * mu * tau * ts / n;
    for (int i = 0; i < n; ++i) row[i] += std::polar(amplitude, phase0 + dphi * i);
}

/// Beat signal of one node for chirp m.
inline std::vector<cplx> synth_node_echo(NodeId node, const SceneParams& p, const ActivitySpec& act,
                                         const RadarConfig& cfg, int m)
{
    if (m < 0 || m >= cfg.slow_samples) throw std::out_of_range("chirp index out of range");
    std::vector<cplx> row(std::size_t(cfg.fast_samples), cplx{});
    const double t = m * cfg.pri();
    if (act.state(node, t / p.window) == MotionState::Inactive) return row;
    const double xi = std::sqrt(node_distance_sq(node, p, act, t));
    add_scatterer(row, xi, cfg.beat_amplitude(cfg.reflectivity[node_index(node)]), cfg);
    return row;
}

/// Static return from the wall's front face; identical for every chirp.
inline std::vector<cplx> wall_clutter(const RadarConfig& cfg, const SceneParams& p)
{
    std::vector<cplx> row(std::size_t(cfg.fast_samples), cplx{});
    if (p.through_wall) add_scatterer(row, p.wall.standoff, cfg.beat_amplitude(cfg.wall_reflectivity), cfg);
    return row;
}

/// Node echoes plus wall clutter, no noise.
inline Eigen::MatrixXcd synth_clean(const SceneParams& p, const ActivitySpec& act, const RadarConfig& cfg,
                                    bool with_wall = true)
{
    cfg.validate();
    if (std::abs(p.window - cfg.window) > 1e-12) throw std::invalid_argument("scene and radar windows differ");
    const int M = cfg.slow_samples, N = cfg.fast_samples;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(M, N);
    const auto wall = with_wall ? wall_clutter(cfg, p) : std::vector<cplx>(std::size_t(N));
    std::vector<cplx> row(static_cast<std::size_t>(N));
    for (int m = 0; m < M; ++m) {
        std::fill(row.begin(), row.end(), cplx{});
        const double t = m * cfg.pri();
        for (NodeId n : kNodes) {
            if (act.state(n, t / p.window) == MotionState::Inactive) continue;
            add_scatterer(row, std::sqrt(node_distance_sq(n, p, act, t)),
                          cfg.beat_amplitude(cfg.reflectivity[node_index(n)]), cfg);
        }
        for (int i = 0; i < N; ++i) out(m, i) = row[std::size_t(i)] + wall[std::size_t(i)];
    }
    return out;
}

/// Complex circular Gaussian noise, variance `var` per sample. Chirp m draws
/// from its own generator so the realization does not depend on evaluation order.
inline Eigen::MatrixXcd synth_noise(int M, int N, double var, std::uint64_t seed)
{
    Eigen::MatrixXcd out(M, N);
    const double s = std::sqrt(var / 2.0);
    for (int m = 0; m < M; ++m) {
        std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(m)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int i = 0; i < N; ++i) {
            const double re = g(rng);
            const double im = g(rng);
            out(m, i) = cplx(s * re, s * im);
        }
    }
    return out;
}

/// Mean per-sample power of the node echoes; used as the SNR reference.
inline double signal_power(const SceneParams& p, const ActivitySpec& act, const RadarConfig& cfg)
{
    const Eigen::MatrixXcd s = synth_clean(p, act, cfg, false);
    return s.squaredNorm() / double(s.size());
}

/// Complete frame: node echoes, wall clutter and noise at the target SNR.
/// When no node echo exists the reference is a unit-reflectivity scatterer.
inline EchoFrame synth_frame(const SceneParams& p, const ActivitySpec& act, const RadarConfig& cfg,
                             const NoiseConfig& noise)
{
    EchoFrame f;
    f.radar = cfg;
    f.seed = noise.seed;
    const Eigen::MatrixXcd nodes = synth_clean(p, act, cfg, false);
    const auto wall = wall_clutter(cfg, p);
    f.data = nodes;
    for (int m = 0; m < cfg.slow_samples; ++m)
        for (int i = 0; i < cfg.fast_samples; ++i) f.data(m, i) += wall[std::size_t(i)];
    if (noise.enabled) {
        double ps = nodes.squaredNorm() / double(nodes.size());
        if (ps == 0.0) ps = std::pow(cfg.beat_amplitude(1.0), 2);
        f.noise_variance = ps / std::pow(10.0, noise.target_snr_db / 10.0);
        f.data += synth_noise(cfg.slow_samples, cfg.fast_samples, f.noise_variance, noise.seed);
    }
    return f;
}

}  // namespace mdc

#endif  // MDCORNER_ECHO_SYNTH_HPP
