#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <mdcorner/axis_square.hpp>
#include <mdcorner/corner_extract.hpp>

using namespace mdc;

namespace {

void add_blob(Eigen::MatrixXd& img, double r0, double c0, double amp = 1.0, double s = 3.0)
{
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c)
            img(r, c) += amp * std::exp(-((r - r0) * (r - r0) + (c - c0) * (c - c0)) / (2.0 * s * s));
}

// 6 x 5 lattice of blob centres 40 px apart
std::vector<std::pair<int, int>> lattice()
{
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j) out.emplace_back(30 + 40 * i, 30 + 40 * j);
    return out;
}

bool near_any(const Corner& c, const std::vector<std::pair<int, int>>& centres, double tol)
{
    return std::any_of(centres.begin(), centres.end(), [&](const auto& p) {
        return std::abs(c.row - p.first) <= tol && std::abs(c.col - p.second) <= tol;
    });
}

}  // namespace

TEST(Response, BlobMaximumAtCentre)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(96, 96);
    add_blob(img, 40, 55);
    const Eigen::MatrixXd R = corner_response(img);
    Eigen::Index r, c;
    R.maxCoeff(&r, &c);
    EXPECT_LE(std::abs(r - 40), 1);
    EXPECT_LE(std::abs(c - 55), 1);
    EXPECT_GE(R.minCoeff(), 0.0);
}

TEST(Response, ConstantImageIsZero)
{
    for (double v : {0.0, 0.3, 1.0})
        EXPECT_EQ(corner_response(Eigen::MatrixXd::Constant(64, 80, v)).cwiseAbs().maxCoeff(), 0.0) << v;
}

TEST(Response, StraightRidgeWeakerThanBlob)
{
    Eigen::MatrixXd ridge = Eigen::MatrixXd::Zero(96, 96), blob = ridge;
    for (int r = 0; r < 96; ++r)
        for (int c = 0; c < 96; ++c) ridge(r, c) = std::exp(-(r - 48.0) * (r - 48.0) / 18.0);
    add_blob(blob, 48, 48);
    DetectorConfig cfg;
    cfg.gain_floor = 0.0;
    const double rr = corner_response(ridge, cfg).block(20, 20, 56, 56).maxCoeff();
    EXPECT_LT(rr, 1e-2 * corner_response(blob, cfg).maxCoeff());
}

TEST(Response, StrongerBlobScoresHigher)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(96, 128);
    add_blob(img, 30, 60, 1.0);
    add_blob(img, 70, 60, 0.4);  // same column band, so levelling scales both alike
    const Eigen::MatrixXd R = corner_response(img);
    EXPECT_GT(R(30, 60), R(70, 60));
}

TEST(Extract, LatticeCentresRecovered)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(200, 240);
    const auto centres = lattice();
    for (const auto& p : centres) add_blob(img, p.first, p.second);
    img = normalize(img);
    const CornerSet cs = extract_corners(img, {}, "x");
    ASSERT_EQ(cs.corners.size(), 30u);
    std::vector<int> hit(centres.size(), 0);
    for (const Corner& c : cs.corners) {
        EXPECT_FALSE(c.padded);
        EXPECT_TRUE(near_any(c, centres, 1.0)) << c.row << ' ' << c.col;
        for (std::size_t i = 0; i < centres.size(); ++i)
            if (std::abs(c.row - centres[i].first) <= 1 && std::abs(c.col - centres[i].second) <= 1) ++hit[i];
        EXPECT_NEAR(c.u, c.col / 239.0, 1e-15);
        EXPECT_NEAR(c.v, c.row / 199.0, 1e-15);
    }
    for (int h : hit) EXPECT_EQ(h, 1);
}

TEST(Extract, FlatImageGivesPaddedGrid)
{
    const CornerSet cs = extract_corners(Eigen::MatrixXd::Zero(64, 64));
    ASSERT_EQ(cs.corners.size(), 30u);
    for (const Corner& c : cs.corners) {
        EXPECT_TRUE(c.padded);
        EXPECT_GE(c.u, 0.0);
        EXPECT_LE(c.u, 1.0);
        EXPECT_GE(c.v, 0.0);
        EXPECT_LE(c.v, 1.0);
    }
}

TEST(Extract, ShortSetIsPaddedWithFlags)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(96, 96);
    add_blob(img, 48, 48);
    const CornerSet cs = extract_corners(img);
    ASSERT_EQ(cs.corners.size(), 30u);
    EXPECT_FALSE(cs.corners[0].padded);
    const auto n_pad = std::count_if(cs.corners.begin(), cs.corners.end(), [](const Corner& c) { return c.padded; });
    EXPECT_GE(n_pad, 1);
    for (const Corner& c : cs.corners) {
        EXPECT_GE(c.row, 0.0);
        EXPECT_LE(c.row, 95.0);
    }
}

TEST(Extract, TopThirtyOfForty)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(200, 320);
    std::vector<std::pair<int, int>> centres;
    std::vector<double> amp;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 8; ++j) centres.emplace_back(30 + 40 * i, 20 + 40 * j);
    std::mt19937_64 rng(4);
    for (std::size_t i = 0; i < centres.size(); ++i) amp.push_back(0.2 + 0.02 * double(i));
    std::shuffle(amp.begin(), amp.end(), rng);
    for (std::size_t i = 0; i < centres.size(); ++i) add_blob(img, centres[i].first, centres[i].second, amp[i]);
    DetectorConfig cfg;
    cfg.gain_floor = 0.0;
    const CornerSet cs = extract_corners(normalize(img), cfg);
    ASSERT_EQ(cs.corners.size(), 30u);
    std::vector<double> sorted = amp;
    std::sort(sorted.begin(), sorted.end());
    const double cut = sorted[10];  // the ten weakest are left out
    for (const Corner& c : cs.corners) {
        std::size_t k = 0;
        while (k < centres.size() && !(std::abs(c.row - centres[k].first) <= 1 && std::abs(c.col - centres[k].second) <= 1)) ++k;
        ASSERT_LT(k, centres.size());
        EXPECT_GE(amp[k], cut);
    }
}

TEST(Extract, TranslationEquivariant)
{
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(160, 160), b = a;
    const std::vector<std::pair<int, int>> pts{{50, 50}, {50, 100}, {100, 70}, {90, 110}};
    const std::vector<double> amp{1.0, 0.8, 0.6, 0.9};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        add_blob(a, pts[i].first, pts[i].second, amp[i]);
        add_blob(b, pts[i].first + 7, pts[i].second - 5, amp[i]);
    }
    DetectorConfig cfg;
    cfg.gain_floor = 0.0;
    cfg.count = 4;
    const CornerSet ca = extract_corners(a, cfg), cb = extract_corners(b, cfg);
    ASSERT_EQ(ca.corners.size(), cb.corners.size());
    for (std::size_t i = 0; i < ca.corners.size(); ++i) {
        EXPECT_EQ(cb.corners[i].row, ca.corners[i].row + 7);
        EXPECT_EQ(cb.corners[i].col, ca.corners[i].col - 5);
    }
}

TEST(Extract, PositiveScalingInvariantAndDeterministic)
{
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(200, 240);
    for (const auto& p : lattice()) add_blob(img, p.first, p.second, 0.5 + 0.01 * p.first + 0.003 * p.second);
    const CornerSet a = extract_corners(img), b = extract_corners(img), c = extract_corners(3.0 * img);
    for (std::size_t i = 0; i < a.corners.size(); ++i) {
        EXPECT_EQ(a.corners[i].row, b.corners[i].row);
        EXPECT_EQ(a.corners[i].col, b.corners[i].col);
        EXPECT_EQ(a.corners[i].response, b.corners[i].response);
    }
    // levelled columns tie, so only the selected set is compared
    auto keys = [](const CornerSet& cs) {
        std::vector<std::pair<double, double>> k;
        for (const Corner& x : cs.corners) k.emplace_back(x.row, x.col);
        std::sort(k.begin(), k.end());
        return k;
    };
    EXPECT_EQ(keys(a), keys(c));
}

TEST(Fuse, ColumnPeakLookup)
{
    Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(1024, 8), d2 = r2;
    d2(700, 3) = 1.0;
    d2(100, 5) = d2(900, 5) = 0.8;  // tie: lower row wins
    r2(0, 2) = 0.5;
    CornerSet pr, pd;
    pr.corners = {make_corner(10, 3, 1024, 8, 1.0), make_corner(20, 5, 1024, 8, 1.0), make_corner(30, 6, 1024, 8, 1.0)};
    pd.corners = {make_corner(40, 2, 1024, 8, 1.0)};
    const PointCloudRD pc = fuse_pc_rd(pr, pd, r2, d2);
    ASSERT_EQ(pc.points.rows(), 4);
    EXPECT_DOUBLE_EQ(pc.points(0, 2), 700.0 / 1023.0);
    EXPECT_DOUBLE_EQ(pc.points(1, 2), 100.0 / 1023.0);
    EXPECT_DOUBLE_EQ(pc.points(2, 2), 0.5);
    EXPECT_TRUE(pc.flagged[2]);
    EXPECT_FALSE(pc.flagged[0]);
    EXPECT_DOUBLE_EQ(pc.points(3, 1), 0.0);
    EXPECT_DOUBLE_EQ(pc.points(3, 2), 40.0 / 1023.0);
    EXPECT_DOUBLE_EQ(pc.points(0, 0), 3.0 / 7.0);
    EXPECT_THROW(fuse_pc_rd(pr, pd, r2, Eigen::MatrixXd::Zero(1024, 9)), std::invalid_argument);
}

TEST(Fuse, SimulatedActivityCloud)
{
    NoiseConfig off;
    off.enabled = false;
    const Profiles pr = preprocess(synth_frame(SceneParams{}, activity(8), RadarConfig{}, off));
    const SquaredMaps sq = square_profiles(pr.rtm, pr.dtm);
    const CornerSet cr = extract_corners(sq.r2tm.data, {}, "r2tm"), cd = extract_corners(sq.d2tm.data, {}, "d2tm");
    const PointCloudRD pc = fuse_pc_rd(cr, cd, sq.r2tm.data, sq.d2tm.data);
    ASSERT_EQ(pc.points.rows(), 60);
    ASSERT_EQ(pc.points.cols(), 3);
    EXPECT_GE(pc.points.minCoeff(), 0.0);
    EXPECT_LE(pc.points.maxCoeff(), 1.0);
    const Eigen::MatrixXd cloud = corner_cloud(cr);
    EXPECT_EQ(cloud.rows(), 30);
    EXPECT_TRUE(cloud.col(0) == pc.points.topRows(30).col(0));
}
