#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include <mdcorner/preprocess.hpp>

using namespace mdc;
using cd = std::complex<double>;

namespace {

EchoFrame scatterers(const std::vector<double>& ranges, const RadarConfig& rc = {}, int chirps = 8)
{
    EchoFrame f;
    f.radar = rc;
    f.data = Eigen::MatrixXcd::Zero(chirps, rc.fast_samples);
    std::vector<cplx> row(std::size_t(rc.fast_samples));
    for (int m = 0; m < chirps; ++m) {
        std::fill(row.begin(), row.end(), cplx{});
        for (double r : ranges) add_scatterer(row, r, 1.0, rc);
        for (int i = 0; i < rc.fast_samples; ++i) f.data(m, i) = row[std::size_t(i)];
    }
    return f;
}

int argmax_row(const Eigen::MatrixXd& m, int col)
{
    Eigen::Index r = 0;
    m.col(col).maxCoeff(&r);
    return int(r);
}

std::vector<int> local_peaks(const Eigen::VectorXd& x, double rel)
{
    std::vector<int> out;
    const double thr = rel * x.maxCoeff();
    for (int i = 1; i + 1 < x.size(); ++i)
        if (x(i) >= thr && x(i) > x(i - 1) && x(i) >= x(i + 1)) out.push_back(i);
    return out;
}

}  // namespace

TEST(RangeCompress, ZeroFrame)
{
    EchoFrame f;
    f.data = Eigen::MatrixXcd::Zero(4, f.radar.fast_samples);
    EXPECT_EQ(range_compress(f).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RangeCompress, StaticScattererRow)
{
    const RadarConfig rc;
    const auto rtm = range_compress(scatterers({3.0}, rc));
    const int want = int(std::lround(3.0 / rtm.axis_step));
    for (int m = 0; m < rtm.cols(); ++m) EXPECT_EQ(argmax_row(rtm.data, m), want);
    EXPECT_NEAR(rtm.axis_step, rc.range_resolution() / 2.0, 1e-15);
    EXPECT_LE((rtm.rows() - 1) * rtm.axis_step, 5.0 + 1e-9);
}

TEST(RangeCompress, ResolutionMatchesBandwidth)
{
    const RadarConfig rc;
    const double res = kSpeedOfLight / (2.0 * rc.bandwidth);
    EXPECT_NEAR(res, 0.075, 1e-3);
    PreprocessConfig rect;
    rect.range_window = WindowKind::Rectangular;
    rect.zero_pad = 8;

    // half-power width of a rectangular-window response is 0.886 c/2B
    const Eigen::VectorXd one = range_compress(scatterers({2.0}, rc, 1), rect).data.col(0);
    const double step = res / rect.zero_pad;
    const double half = one.maxCoeff() / std::sqrt(2.0);
    const int above = int((one.array() >= half).count());
    EXPECT_NEAR(above * step, 0.886 * res, 1.5 * step);

    auto resolved = [&](double sep, const PreprocessConfig& cfg) {
        const Eigen::VectorXd x = range_compress(scatterers({2.0, 2.0 + sep}, rc, 1), cfg).data.col(0);
        // two peaks separated by a valley at least 3 dB down
        const auto pk = local_peaks(x, 0.5);
        if (pk.size() < 2) return false;
        const double valley = x.segment(pk.front(), pk.back() - pk.front() + 1).minCoeff();
        return valley <= std::min(x(pk.front()), x(pk.back())) / std::sqrt(2.0);
    };
    EXPECT_TRUE(resolved(0.5, PreprocessConfig{}));
    EXPECT_TRUE(resolved(1.5 * res, rect));
    EXPECT_FALSE(resolved(0.5 * res, rect));
}

TEST(Mti, ConstantInputCancelsExactly)
{
    RangeProfiles rp;
    rp.data = Eigen::MatrixXcd::Constant(5, 16, cd(0.3, -1.2));
    const auto out = mti_filter(rp);
    EXPECT_EQ(out.data.cwiseAbs().maxCoeff(), 0.0);
    rp.data.resize(5, 1);
    EXPECT_THROW(mti_filter(rp), std::invalid_argument);
}

TEST(Mti, WallSuppression)
{
    const RadarConfig rc;
    NoiseConfig off;
    off.enabled = false;
    const EchoFrame f = synth_frame(SceneParams{}, activity(1), rc, off);
    const auto rp = range_profiles(f);
    const double before = rp.data.squaredNorm();
    const double after = mti_filter(rp).data.squaredNorm();
    ASSERT_GT(before, 0.0);
    EXPECT_GE(10.0 * std::log10(before / std::max(after, 1e-300)), 40.0);
}

TEST(Mti, DopplerToneResponse)
{
    const double ts = 4.0 / 1024, f = 20.0;
    RangeProfiles rp;
    rp.time_step = ts;
    rp.data.resize(3, 64);
    for (int m = 0; m < 64; ++m) rp.data.col(m).setConstant(std::polar(1.0, 2.0 * kPi * f * m * ts));
    const double gain = std::abs(cd(1.0) - std::polar(1.0, -2.0 * kPi * f * ts));
    const auto out = mti_filter(rp);
    for (int m = 1; m < 64; ++m) EXPECT_NEAR(std::abs(out.data(1, m)), gain, 1e-12);
}

TEST(Emd, ConstantUnchanged)
{
    const std::vector<double> x(64, 2.5);
    EXPECT_EQ(emd_denoise(x), x);
    const std::vector<double> bad{1, 2, NAN, 4, 5, 6, 7, 8};
    EXPECT_THROW(emd_denoise(bad), std::invalid_argument);
}

TEST(Emd, RampPlusNoiseImproves)
{
    const int n = 512;
    double in_sum = 0.0, out_sum = 0.0;
    int wins = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 0.2);
        std::vector<double> clean(n), noisy(n);
        for (int i = 0; i < n; ++i) clean[std::size_t(i)] = double(i) / n, noisy[std::size_t(i)] = clean[std::size_t(i)] + g(rng);
        const auto den = emd_denoise(noisy);
        double ein = 0.0, eout = 0.0;
        for (int i = 0; i < n; ++i) {
            ein += std::pow(noisy[std::size_t(i)] - clean[std::size_t(i)], 2);
            eout += std::pow(den[std::size_t(i)] - clean[std::size_t(i)], 2);
        }
        in_sum += ein, out_sum += eout;
        wins += eout < ein;
    }
    EXPECT_LT(out_sum, in_sum);
    EXPECT_EQ(wins, 100);
}

TEST(Emd, PureNoiseLosesPower)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(1024);
    for (double& v : x) v = g(rng);
    const auto y = emd_denoise(x);
    double px = 0.0, py = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) px += x[i] * x[i], py += y[i] * y[i];
    EXPECT_LT(py, px);
}

TEST(Dtm, ZeroSignal)
{
    const std::vector<cplx> x(256, cplx{});
    EXPECT_EQ(stft_map(x, 1.0 / 256).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dtm, ToneRidge)
{
    const double dt = 1.0 / 256;
    std::vector<cplx> x(1024);
    for (int m = 0; m < 1024; ++m) x[std::size_t(m)] = std::polar(1.0, 2.0 * kPi * 32.0 * m * dt);
    const auto map = stft_map(x, dt);
    EXPECT_EQ(map.cols(), 1024);
    EXPECT_EQ(map.rows() & (map.rows() - 1), 0);
    for (int m = 0; m < map.cols(); ++m)
        EXPECT_NEAR(map.axis_origin + argmax_row(map.data, m) * map.axis_step, 32.0, 1e-9);
}

TEST(Dtm, ChirpRidgeSlope)
{
    const double dt = 1.0 / 256;
    std::vector<cplx> x(1024);
    for (int m = 0; m < 1024; ++m) {
        const double t = m * dt;
        x[std::size_t(m)] = std::polar(1.0, 2.0 * kPi * 8.0 * t * t);  // 16 Hz/s
    }
    const auto map = stft_map(x, dt);
    double st = 0, sf = 0, stt = 0, stf = 0;
    int n = 0;
    for (int m = 64; m < 1024 - 64; ++m) {
        const double t = m * dt, f = map.axis_origin + argmax_row(map.data, m) * map.axis_step;
        st += t, sf += f, stt += t * t, stf += t * f, ++n;
    }
    const double slope = (n * stf - st * sf) / (n * stt - st * st);
    EXPECT_NEAR(slope, 16.0, 0.05 * 16.0);
}

TEST(Dtm, ConstantVelocityDoppler)
{
    SceneParams p;
    p.x1 = 3.0, p.y1 = 0.0, p.v1x = -0.5, p.v1y = 0.0, p.undulation = 0.0;
    p.torso_upper = p.radar_height - 0.15;
    p.through_wall = false;
    RadarConfig rc;
    rc.reflectivity = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    NoiseConfig off;
    off.enabled = false;
    const auto act = canonical_activity(ActivityClass::Walking);
    const auto pr = preprocess(synth_frame(p, act, rc, off));
    const double fd = 2.0 * rc.carrier * p.v1x / kSpeedOfLight;
    for (int m = 64; m < pr.dtm.cols() - 64; m += 16) {
        const double f = pr.dtm.axis_origin + argmax_row(pr.dtm.data, m) * pr.dtm.axis_step;
        EXPECT_LE(std::abs(f - fd), pr.dtm.axis_step + 1e-9) << m;
    }
}

TEST(Normalize, AffineConstantIdempotent)
{
    Eigen::MatrixXd x(2, 2);
    x << 2, 4, 6, 3;
    const Eigen::MatrixXd n = normalize(x);
    EXPECT_DOUBLE_EQ(n(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(n(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(n(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(n(1, 1), 0.25);
    EXPECT_EQ(normalize(Eigen::MatrixXd::Constant(3, 3, 7.0)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(normalize(n) == n);
    Eigen::Index r0, c0, r1, c1;
    x.maxCoeff(&r0, &c0);
    n.maxCoeff(&r1, &c1);
    EXPECT_EQ(r0, r1);
    EXPECT_EQ(c0, c1);
}

TEST(Pipeline, DeterministicMaps)
{
    const RadarConfig rc;
    NoiseConfig nc;
    nc.seed = 9;
    const EchoFrame f = synth_frame(SceneParams{}, activity(8), rc, nc);
    const auto a = preprocess(f), b = preprocess(f);
    EXPECT_TRUE(a.rtm.data == b.rtm.data);
    EXPECT_TRUE(a.dtm.data == b.dtm.data);
    EXPECT_EQ(a.rtm.cols(), rc.slow_samples);
    EXPECT_EQ(a.dtm.cols(), rc.slow_samples);
    EXPECT_GE(a.rtm.data.minCoeff(), 0.0);
    EXPECT_LE(a.dtm.data.maxCoeff(), 1.0);
}
