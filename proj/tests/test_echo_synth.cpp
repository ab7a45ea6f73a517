#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include <mdcorner/echo_synth.hpp>
#include <mdcorner/preprocess.hpp>

using namespace mdc;
using cd = std::complex<double>;

namespace {

// head parked at radar height, `range` metres straight ahead
SceneParams point_scene(double range, double v = 0.0)
{
    SceneParams p;
    p.x1 = range, p.y1 = 0.0, p.v1x = v, p.v1y = 0.0;
    p.undulation = 0.0;
    p.torso_upper = p.radar_height - 0.15;
    p.through_wall = false;
    return p;
}

const ActivitySpec& walking() { static const ActivitySpec a = canonical_activity(ActivityClass::Walking); return a; }

// plain O(N^2) DFT peak, kept apart from the FFTW path
int dft_peak(const std::vector<cd>& x)
{
    const int n = int(x.size());
    int best = 0;
    double bv = -1.0;
    for (int k = 0; k < n; ++k) {
        cd s = 0;
        for (int i = 0; i < n; ++i) s += x[std::size_t(i)] * std::polar(1.0, -2.0 * kPi * double(k) * i / n);
        if (std::abs(s) > bv) bv = std::abs(s), best = k;
    }
    return best;
}

double mean_power(const Eigen::MatrixXcd& m) { return m.squaredNorm() / double(m.size()); }

}  // namespace

TEST(NodeEcho, ZeroReflectivityGivesZeroRow)
{
    RadarConfig rc;
    rc.reflectivity.fill(0.0);
    const auto row = synth_node_echo(NodeId::Torso, point_scene(3.0), walking(), rc, 10);
    for (const auto& v : row) EXPECT_EQ(v, cd(0.0, 0.0));
}

TEST(NodeEcho, StaticPointBeatBin)
{
    const RadarConfig rc;
    const double xi = 3.0;
    const auto row = synth_node_echo(NodeId::Head, point_scene(xi), walking(), rc, 0);
    const double beat = rc.chirp_rate() * 2.0 * xi / kSpeedOfLight;
    EXPECT_EQ(dft_peak(row), int(std::lround(rc.fast_samples * beat / rc.fast_rate())));
    EXPECT_EQ(dft_peak(row), 40);
    EXPECT_NEAR(std::abs(row[5]), rc.beat_amplitude(rc.reflectivity[0]), 1e-12);
}

TEST(NodeEcho, WallShiftsBeatTone)
{
    const RadarConfig rc;
    SceneParams p = point_scene(3.0);
    p.through_wall = true;
    const double extra = 0.12 * (std::sqrt(6.0) - 1.0);
    EXPECT_NEAR(extra, 0.174, 1e-3);
    const auto row = synth_node_echo(NodeId::Head, p, walking(), rc, 0);
    const double beat = rc.chirp_rate() * 2.0 * (3.0 + extra) / kSpeedOfLight;
    EXPECT_EQ(dft_peak(row), int(std::lround(beat / rc.fast_rate() * rc.fast_samples)));
    EXPECT_EQ(dft_peak(row), 42);
}

TEST(NodeEcho, BeyondUnambiguousRangeIsRejected)
{
    const RadarConfig rc;
    EXPECT_THROW(synth_node_echo(NodeId::Head, point_scene(100.0), walking(), rc, 0), RangeAmbiguityError);
    EXPECT_THROW(synth_node_echo(NodeId::Head, point_scene(3.0), walking(), rc, rc.slow_samples), std::out_of_range);
}

TEST(NodeEcho, InterChirpPhaseFollowsRadialVelocity)
{
    const RadarConfig rc;
    const double v = -1.0;
    const SceneParams p = point_scene(3.0, v);
    const double expected = 4.0 * kPi * rc.carrier * v * rc.pri() / kSpeedOfLight;
    for (int m : {0, 100, 700}) {
        const auto a = synth_node_echo(NodeId::Head, p, walking(), rc, m);
        const auto b = synth_node_echo(NodeId::Head, p, walking(), rc, m + 1);
        EXPECT_NEAR(std::arg(b[0] * std::conj(a[0])), expected, 1e-4);
    }
}

TEST(Wall, ZeroReflectivityAndStaticRows)
{
    RadarConfig rc;
    const SceneParams p;
    rc.wall_reflectivity = 0.0;
    for (const auto& v : wall_clutter(rc, p)) EXPECT_EQ(v, cd(0.0, 0.0));

    const RadarConfig def;
    NoiseConfig off;
    off.enabled = false;
    const EchoFrame f = synth_frame(p, activity(1), def, off);
    EXPECT_TRUE(f.data.row(0) == f.data.row(500));
    const Eigen::MatrixXcd diff = f.data.bottomRows(def.slow_samples - 1) - f.data.topRows(def.slow_samples - 1);
    EXPECT_EQ(diff.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(f.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Frame, PureNoiseHitsTargetPower)
{
    RadarConfig rc;
    rc.reflectivity.fill(0.0);
    rc.wall_reflectivity = 0.0;
    NoiseConfig nc;
    nc.target_snr_db = -15.0;
    nc.seed = 7;
    const EchoFrame f = synth_frame(SceneParams{}, activity(8), rc, nc);
    const double target = std::pow(rc.beat_amplitude(1.0), 2) / std::pow(10.0, -1.5);
    EXPECT_NEAR(10.0 * std::log10(mean_power(f.data) / target), 0.0, 0.1);
}

TEST(Frame, MeasuredSnrMatchesTarget)
{
    const RadarConfig rc;
    const SceneParams p;
    for (double snr : {-19.85, -15.0, -12.46}) {
        NoiseConfig nc;
        nc.target_snr_db = snr;
        nc.seed = 11;
        const EchoFrame f = synth_frame(p, activity(8), rc, nc);
        const Eigen::MatrixXcd clean = synth_clean(p, activity(8), rc, true);
        const double ps = mean_power(synth_clean(p, activity(8), rc, false));
        const double pn = mean_power(f.data - clean);
        EXPECT_NEAR(10.0 * std::log10(ps / pn), snr, 0.1);
    }
}

TEST(Frame, EmptySceneClutterCancelsToNoiseFloor)
{
    const RadarConfig rc;
    const SceneParams p;
    NoiseConfig nc;
    nc.seed = 3;
    const EchoFrame with_wall = synth_frame(p, activity(1), rc, nc);
    RadarConfig no_wall = rc;
    no_wall.wall_reflectivity = 0.0;
    const EchoFrame noise_only = synth_frame(p, activity(1), no_wall, nc);
    const auto a = mti_filter(range_profiles(with_wall)), b = mti_filter(range_profiles(noise_only));
    const double after = a.data.squaredNorm(), floor = b.data.squaredNorm();
    EXPECT_LE(10.0 * std::log10(after / floor), 1.0);
}

TEST(Frame, DeterministicForFixedSeed)
{
    const RadarConfig rc;
    NoiseConfig nc;
    nc.seed = 42;
    const EchoFrame a = synth_frame(SceneParams{}, activity(9), rc, nc);
    const EchoFrame b = synth_frame(SceneParams{}, activity(9), rc, nc);
    EXPECT_TRUE(a.data == b.data);
    nc.seed = 43;
    const EchoFrame c = synth_frame(SceneParams{}, activity(9), rc, nc);
    EXPECT_FALSE(a.data == c.data);
}

TEST(Frame, LinearInReflectivity)
{
    RadarConfig rc;
    RadarConfig twice = rc;
    for (double& r : twice.reflectivity) r *= 2.0;
    twice.wall_reflectivity *= 2.0;
    const SceneParams p;
    const Eigen::MatrixXcd a = synth_clean(p, activity(8), rc), b = synth_clean(p, activity(8), twice);
    EXPECT_LE((b - 2.0 * a).cwiseAbs().maxCoeff(), 1e-12 * b.cwiseAbs().maxCoeff());
}

TEST(Radar, ValidationNamesField)
{
    RadarConfig rc;
    rc.bandwidth = 0.0;
    try {
        rc.validate();
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("radar.bandwidth"), std::string::npos);
    }
    const RadarConfig d;
    EXPECT_DOUBLE_EQ(d.chirp_rate(), d.bandwidth / d.pri());
    EXPECT_NEAR(d.range_resolution(), 0.075, 1e-4);
}
