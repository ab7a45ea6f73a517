#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <mdcorner/eval_metrics.hpp>

using namespace mdc;

namespace {

Eigen::MatrixXd random_cloud(std::mt19937_64& rng, int n, int d)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

double brute_force_emd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    std::vector<int> perm(std::size_t(a.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double s = 0.0;
        for (Eigen::Index i = 0; i < a.rows(); ++i) s += (a.row(i) - b.row(perm[std::size_t(i)])).norm();
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / double(a.rows());
}

}  // namespace

TEST(Emd, IdenticalCloudsAreZero)
{
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd a = random_cloud(rng, 30, 2);
    EXPECT_EQ(emd_distance(a, a), 0.0);
    Eigen::MatrixXd shuffled = a;
    std::swap_ranges(shuffled.row(0).begin(), shuffled.row(0).end(), shuffled.row(7).begin());
    EXPECT_NEAR(emd_distance(a, shuffled), 0.0, 1e-15);
}

TEST(Emd, TwoPointExample)
{
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0, 0, 1, 0;
    b << 0, 1, 1, 1;
    EXPECT_NEAR(emd_distance(a, b), 1.0, 1e-15);
    const TransportPlan tp = transport_plan(a, b);
    EXPECT_EQ(tp.flow(0, 0), 1.0);
    EXPECT_EQ(tp.flow(1, 1), 1.0);
    EXPECT_NEAR(tp.total_cost, 2.0, 1e-15);
}

TEST(Emd, MatchesPermutationOracle)
{
    std::mt19937_64 rng(2);
    for (int n = 1; n <= 6; ++n)
        for (int trial = 0; trial < 30; ++trial) {
            const Eigen::MatrixXd a = random_cloud(rng, n, 2), b = random_cloud(rng, n, 2);
            ASSERT_NEAR(emd_distance(a, b), brute_force_emd(a, b), 1e-9) << n << ' ' << trial;
        }
}

TEST(Emd, PlanMarginals)
{
    std::mt19937_64 rng(3);
    const TransportPlan tp = transport_plan(random_cloud(rng, 30, 3), random_cloud(rng, 30, 3));
    EXPECT_TRUE((tp.flow.rowwise().sum().array() <= tp.source_mass.array()).all());
    EXPECT_TRUE((tp.flow.colwise().sum().transpose().array() <= tp.sink_mass.array()).all());
    EXPECT_DOUBLE_EQ(tp.flow.sum(), 30.0);
    EXPECT_GE(tp.flow.minCoeff(), 0.0);
}

TEST(Emd, Errors)
{
    const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 2);
    EXPECT_THROW(emd_distance(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)), std::invalid_argument);
    EXPECT_THROW(emd_distance(a, Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
    EXPECT_THROW(emd_distance(a, Eigen::MatrixXd::Zero(4, 2)), std::invalid_argument);
}

TEST(Emd, Axioms)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 2 + trial % 2;
        const Eigen::MatrixXd a = random_cloud(rng, 30, d), b = random_cloud(rng, 30, d);
        const double ab = emd_distance(a, b);
        ASSERT_GE(ab, 0.0);
        ASSERT_NEAR(ab, emd_distance(b, a), 1e-12);
        ASSERT_LE(ab, std::sqrt(double(d)) + 1e-12);
        ASSERT_GT(ab, 0.0);
        for (double s : {0.5, 2.0}) ASSERT_NEAR(emd_distance(s * a, s * b), s * ab, 1e-12);
    }
}

TEST(Psnr, CapAndClosedForm)
{
    const Eigen::MatrixXd ref = Eigen::MatrixXd::Constant(10, 10, 0.5);
    EXPECT_EQ(psnr(ref, ref), 99.0);
    // MSE 0.01 and 0.001 from a uniform offset
    EXPECT_NEAR(psnr((ref.array() + 0.1).matrix(), ref), 20.0, 1e-12);
    EXPECT_NEAR(psnr((ref.array() + std::sqrt(0.001)).matrix(), ref), 30.0, 1e-12);
    EXPECT_THROW(psnr(ref, Eigen::MatrixXd::Zero(10, 11)), std::invalid_argument);
}

TEST(Psnr, DecreasesWithNoisePower)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd ref(64, 64);
    for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data()[i] = u(rng);
    for (int seed = 0; seed < 20; ++seed) {
        double prev = 1e300;
        for (double sd : {0.01, 0.02, 0.05, 0.1, 0.2}) {
            std::mt19937_64 g{std::uint64_t(seed)};
            std::normal_distribution<double> n(0.0, sd);
            Eigen::MatrixXd x = ref;
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += n(g);
            const double p = psnr(x, ref);
            ASSERT_LT(p, prev) << seed << ' ' << sd;
            prev = p;
        }
    }
}

TEST(Fit, QuadraticThroughThreePoints)
{
    const CurveModel m = make_curve_model(NodeId::Head, CurveKind::DistanceSq, ActivityClass::Walking, SceneParams{});
    ASSERT_EQ(m.family, CurveFamily::QuadraticRange);
    const std::vector<KeyPoint> pts{{0.0, 1.0}, {1.0, 3.0}, {2.0, 7.0}};
    const FitReport r = fit_curve_model(m, pts);
    ASSERT_EQ(r.coefficients.size(), 3u);
    for (double c : r.coefficients) EXPECT_NEAR(c, 1.0, 1e-10);
    EXPECT_LT(r.point_rms, 1e-12);
    EXPECT_EQ(r.rank, 3);
    EXPECT_TRUE(r.sufficient);

    const std::vector<KeyPoint> two{{0.0, 1.0}, {1.0, 3.0}};
    const FitReport d = fit_curve_model(m, two);
    EXPECT_EQ(d.rank, 2);
    EXPECT_FALSE(d.sufficient);
}

TEST(Fit, NoiselessOwnFamilyIsExact)
{
    // samples of a known member of the hand R2 basis, more points than unknowns
    const SceneParams p;
    const CurveModel m = make_curve_model(NodeId::HandLeft, CurveKind::DistanceSq, ActivityClass::Walking, p);
    ASSERT_EQ(m.nonlinear_count, 0);
    const std::vector<double> coef{2.0, -0.5, 0.3, 0.2, -0.1, 0.4};
    ASSERT_EQ(int(coef.size()), m.linear_count);
    auto member = [&](double t) {
        std::vector<double> b(coef.size());
        m.basis(t, {}, b);
        return std::inner_product(coef.begin(), coef.end(), b.begin(), 0.0);
    };
    std::vector<KeyPoint> pts;
    for (int i = 0; i < 9; ++i) pts.push_back({0.45 * i, member(0.45 * i)});
    const FitReport r = fit_curve_model(m, pts, member);
    EXPECT_LT(r.condition, 1e8);
    EXPECT_LT(r.point_rms, 1e-8);
    EXPECT_LT(r.validation_rms, 1e-8);
}

TEST(Mncp, HeadAndHandRange)
{
    // the wall term breaks the polynomial form, so reconstruction is checked in free space
    SceneParams free;
    free.through_wall = false;
    const auto act = canonical_activity(ActivityClass::Walking);
    const MncpReport head =
        verify_mncp(make_curve_model(NodeId::Head, CurveKind::DistanceSq, ActivityClass::Walking, free),
                    NodeCurve{NodeId::Head, CurveKind::DistanceSq, free, act});
    EXPECT_EQ(head.mncp, 3);
    EXPECT_TRUE(head.sufficient_at_mncp);
    EXPECT_TRUE(head.deficiency_asserted);
    EXPECT_TRUE(head.deficient_below);

    const MncpReport hand =
        verify_mncp(make_curve_model(NodeId::HandLeft, CurveKind::DistanceSq, ActivityClass::Walking, free),
                    NodeCurve{NodeId::HandLeft, CurveKind::DistanceSq, free, act});
    EXPECT_EQ(hand.mncp, 6);
    EXPECT_TRUE(hand.sufficient_at_mncp);
    EXPECT_LT(hand.at_mncp.validation_rms, 1e-6);
    EXPECT_TRUE(hand.deficient_below);
}

TEST(Mncp, TorsoDopplerConstant)
{
    for (const FamilyCase& fc : family_cases(ActivityClass::Walking, SceneParams{})) {
        if (fc.model.node != NodeId::Torso || fc.model.kind != CurveKind::VelocitySq) continue;
        const MncpReport r = verify_mncp(fc.model, fc.curve);
        EXPECT_EQ(r.mncp, 1);
        EXPECT_TRUE(r.sufficient_at_mncp);
        const SceneParams p;
        EXPECT_NEAR(r.at_mncp.eval(fc.model, 1.7), p.v1x * p.v1x + p.v1y * p.v1y, 1e-12);
    }
}

TEST(Mncp, EveryFamilySufficient)
{
    for (ActivityClass c : {ActivityClass::Walking, ActivityClass::InSitu})
        for (const FamilyCase& fc : family_cases(c, SceneParams{})) {
            const MncpReport r = verify_mncp(fc.model, fc.curve);
            EXPECT_TRUE(r.sufficient_at_mncp) << int(c) << ' ' << int(fc.model.node) << ' ' << int(fc.model.kind);
            if (r.deficiency_asserted && r.mncp > 1) EXPECT_TRUE(r.deficient_below);
        }
}

TEST(Degrade, ZeroDeltaIsIdentityAndSeedsAreStable)
{
    std::mt19937_64 rng(6);
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(64, 64);
    img.block(20, 20, 10, 10) = random_cloud(rng, 10, 10);
    img = normalize(img);
    EXPECT_TRUE(degrade_image(img, 0.0, 1) == img);
    EXPECT_TRUE(degrade_image(img, 8.0, 3) == degrade_image(img, 8.0, 3));
    EXPECT_FALSE(degrade_image(img, 8.0, 3) == degrade_image(img, 8.0, 4));
    const Eigen::MatrixXd d = degrade_image(img, 4.0, 3);
    EXPECT_GE(d.minCoeff(), 0.0);
    EXPECT_LE(d.maxCoeff(), 1.0);
}

TEST(Degrade, RegionSnrDropsByDelta)
{
    std::mt19937_64 rng(7);
    Eigen::MatrixXd img = Eigen::MatrixXd::Constant(128, 128, 0.05);
    img.block(30, 30, 40, 40) = random_cloud(rng, 40, 40).array() * 0.5 + 0.5;
    const ImageEnergy e = image_energy(img);
    const double nt = double(e.target_pixels), nb = double(e.background_pixels);
    for (double delta : {4.0, 8.0, 12.0}) {
        const Eigen::MatrixXd d = degrade_image(img, delta, 11);
        // d = a (img + n) + b; noise is independent of img, so regression recovers a and b
        const double mx = img.mean(), my = d.mean();
        const double a = ((img.array() - mx) * (d.array() - my)).sum() / (img.array() - mx).square().sum();
        const double b = my - a * mx;
        const Eigen::ArrayXXd n = (d.array() - b) / a - img.array();
        const double var = n.square().mean();
        const double snr = 10.0 * std::log10((e.target + nt * var) / (e.background + nb * var));
        EXPECT_NEAR(snr, e.snr_db() - delta, 0.2) << delta;
    }
}

TEST(Sweep, ZeroDeltaEqualsBaseline)
{
    NoiseConfig off;
    off.enabled = false;
    const SceneParams p;
    const RadarConfig rc;
    const ActivitySpec act = activity(8);
    const Profiles pr = preprocess(synth_frame(p, act, rc, off));
    const SquaredMaps sq = square_profiles(pr.rtm, pr.dtm);
    const Profiles gt = groundtruth_profiles(act, p, rc, pr.rtm, pr.dtm);
    const SquaredMaps gsq = square_profiles(gt.rtm, gt.dtm);
    SweepInput in{8, sq.r2tm.data, sq.d2tm.data, extract_corners(gsq.r2tm.data), extract_corners(gsq.d2tm.data)};
    const DetectorConfig det;
    const auto rows = robustness_sweep({in}, {0.0, 4.0}, 3, 42, det);
    ASSERT_EQ(rows.size(), 4u);
    const SweepRow base = corner_fidelity(in.r2tm, in.d2tm, in.gt_r, in.gt_d, det);
    EXPECT_EQ(rows[0].emd(), base.emd());
    EXPECT_EQ(rows[0].delta_db, 0.0);
    const auto sm = summarize_sweep(rows, {0.0, 4.0});
    ASSERT_EQ(sm.size(), 2u);
    EXPECT_EQ(sm[0].mean, base.emd());
    EXPECT_EQ(sm[0].std_error, 0.0);
    EXPECT_GT(sm[1].std_error, 0.0);
}
