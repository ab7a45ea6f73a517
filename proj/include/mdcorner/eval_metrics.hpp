#ifndef MDCORNER_EVAL_METRICS_HPP
#define MDCORNER_EVAL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "axis_square.hpp"
#include "corner_extract.hpp"
#include "echo_synth.hpp"
#include "motion_model.hpp"
#include "preprocess.hpp"

namespace mdc {

// ---------------------------------------------------------------------------
// Assignment and transport

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting paths with potentials, O(n^3)). Returns col[i] for row i.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost)
{
    const int n = int(cost.rows());
    if (n != cost.cols()) throw std::invalid_argument("assignment needs a square cost matrix");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based internal arrays; p[j] is the row matched to column j
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) minv[j] = cur, way[j] = j0;
                if (minv[j] < delta) delta = minv[j], j1 = j;
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(n, -1);
    for (int j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
    return match;
}

inline Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd d(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
    return d;
}

/// Flow between two equal-mass clouds with unit weight per point.
struct TransportPlan {
    Eigen::MatrixXd flow;
    Eigen::VectorXd source_mass, sink_mass;
    double total_cost = 0.0;
    double mean_cost = 0.0;
};

inline void check_clouds(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("EMD of an empty cloud");
    if (a.cols() != b.cols()) throw std::invalid_argument("EMD clouds differ in dimensionality");
    if (a.rows() != b.rows()) throw std::invalid_argument("EMD clouds must have equal cardinality");
}

inline TransportPlan transport_plan(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    check_clouds(a, b);
    const Eigen::MatrixXd d = distance_matrix(a, b);
    const auto match = hungarian(d);
    TransportPlan tp;
    tp.flow = Eigen::MatrixXd::Zero(a.rows(), b.rows());
    tp.source_mass = Eigen::VectorXd::Ones(a.rows());
    tp.sink_mass = Eigen::VectorXd::Ones(b.rows());
    for (std::size_t i = 0; i < match.size(); ++i) {
        tp.flow(Eigen::Index(i), match[i]) = 1.0;
        tp.total_cost += d(Eigen::Index(i), match[i]);
    }
    tp.mean_cost = tp.total_cost / double(a.rows());
    return tp;
}

/// Earth mover's distance between equal-size clouds (rows are points):
/// mean Euclidean length of the optimal matching.
inline double emd_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return transport_plan(a, b).mean_cost;
}

// ---------------------------------------------------------------------------
// Image metrics

inline constexpr double kPsnrCap = 99.0;

inline double psnr(const Eigen::MatrixXd& img, const Eigen::MatrixXd& ref, double peak = 1.0)
{
    if (img.rows() != ref.rows() || img.cols() != ref.cols()) throw std::invalid_argument("PSNR shape mismatch");
    const double mse = (img - ref).squaredNorm() / double(img.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

/// Region-based image SNR: total energy of the target region over total
/// energy of the rest. The target region is every pixel at or above
/// `kTargetLevel` of the image peak.
inline constexpr double kTargetLevel = 0.1;

struct ImageEnergy {
    double target = 0.0, background = 0.0;  // summed squared pixel values
    std::size_t target_pixels = 0, background_pixels = 0;
    double snr_db() const
    {
        if (background <= 0.0) return std::numeric_limits<double>::infinity();
        return 10.0 * std::log10(target / background);
    }
};

inline ImageEnergy image_energy(const Eigen::MatrixXd& img, double level = kTargetLevel)
{
    ImageEnergy e;
    if (img.size() == 0) return e;
    const double thr = level * img.maxCoeff();
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        const double v = img.data()[i];
        if (v >= thr) {
            e.target += v * v;
            ++e.target_pixels;
        } else {
            e.background += v * v;
            ++e.background_pixels;
        }
    }
    return e;
}

/// Adds white Gaussian noise that lowers the image SNR by `delta_db`, then
/// renormalizes to [0, 1]. The variance solves
/// (Et + Nt s2) / (Eb + Nb s2) = SNR0 / 10^(delta/10) over the clean regions.
inline Eigen::MatrixXd degrade_image(const Eigen::MatrixXd& img, double delta_db, std::uint64_t seed)
{
    if (delta_db <= 0.0) return img;
    const ImageEnergy e = image_energy(img);
    const double nt = double(e.target_pixels), nb = double(e.background_pixels);
    double var = 0.0;
    if (e.target > 0.0 && nb > 0.0) {
        const double r = e.target / std::max(e.background, 1e-300) / std::pow(10.0, delta_db / 10.0);
        // r * nb <= nt: the ratio cannot fall that far; saturate at the target's mean energy
        var = r * nb > nt ? (e.target - r * e.background) / (r * nb - nt) : e.target / std::max(nt, 1.0);
    }
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(std::lround(delta_db * 1000))};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> g(0.0, std::sqrt(std::max(var, 0.0)));
    Eigen::MatrixXd out = img;
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += g(rng);
    return normalize(out);
}

// ---------------------------------------------------------------------------
// Ground-truth maps

struct GroundTruthConfig {
    double range_width = 0.075;   // Gaussian sigma on the range axis, m
    double doppler_width = 2.0;   // Gaussian sigma on the Doppler axis, Hz
};

/// Reference RTM/DTM drawn from the node trajectories: each active node
/// leaves a Gaussian ridge weighted by its reflectivity. Axes match `rtm` and
/// `dtm`.
inline Profiles groundtruth_profiles(const ActivitySpec& act, const SceneParams& p, const RadarConfig& radar,
                                     const ProfileMap& rtm, const ProfileMap& dtm, const GroundTruthConfig& g = {})
{
    Profiles out{rtm, dtm};
    out.rtm.data.setZero();
    out.dtm.data.setZero();
    const int M = rtm.cols();
    for (int m = 0; m < M; ++m) {
        const double t = std::min(m * rtm.time_step, p.window);
        for (NodeId n : kNodes) {
            if (act.state(n, t / p.window) == MotionState::Inactive) continue;
            const double eta = radar.reflectivity[node_index(n)];
            const NodeCurve dist{n, CurveKind::DistanceSq, p, act};
            const double xi = std::sqrt(dist(t));
            const double rate = derivative1(dist, t) / (2.0 * xi);
            const double fd = 2.0 * radar.carrier * rate / kSpeedOfLight;
            for (int r = 0; r < out.rtm.rows(); ++r) {
                const double x = (rtm.axis_origin + r * rtm.axis_step - xi) / g.range_width;
                out.rtm.data(r, m) += eta * std::exp(-0.5 * x * x);
            }
            for (int r = 0; r < out.dtm.rows(); ++r) {
                const double x = (dtm.axis_origin + r * dtm.axis_step - fd) / g.doppler_width;
                out.dtm.data(r, m) += eta * std::exp(-0.5 * x * x);
            }
        }
    }
    out.rtm = normalize(out.rtm);
    out.dtm = normalize(out.dtm);
    return out;
}

// ---------------------------------------------------------------------------
// Curve fitting

struct FitReport {
    CurveFamily family = CurveFamily::QuadraticRange;
    std::vector<double> coefficients;
    std::vector<double> nonlinear;
    int points = 0;
    int rank = 0;
    double condition = 0.0;        // Gram matrix at the solution
    double point_rms = 0.0;        // residual at the fitted points
    double validation_rms = -1.0;  // against a reference curve, if given
    double validation_rel = -1.0;  // validation_rms / rms(reference)
    bool sufficient = false;

    double eval(const CurveModel& m, double t) const
    {
        std::vector<double> b(static_cast<std::size_t>(m.linear_count));
        m.basis(t, nonlinear, b);
        double s = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) s += coefficients[k] * b[k];
        return s;
    }
};

struct FitOptions {
    int starts = 32;
    double gradient_tol = 1e-10;
    int max_iterations = 300;
    double linear_tol = 1e-6;     // absolute validation RMS for linear families
    double nonlinear_tol = 1e-4;  // relative validation RMS for nonlinear families
    int validation_samples = 4096;
};

namespace detail {

struct LinearSolve {
    Eigen::VectorXd coef;
    Eigen::VectorXd residual;
    int rank = 0;
    double condition = 0.0;
};

inline Eigen::MatrixXd design(const CurveModel& m, std::span<const KeyPoint> pts, std::span<const double> nl)
{
    Eigen::MatrixXd A(Eigen::Index(pts.size()), m.linear_count);
    std::vector<double> row(static_cast<std::size_t>(m.linear_count));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        m.basis(pts[i].t, nl, row);
        for (int j = 0; j < m.linear_count; ++j) A(Eigen::Index(i), j) = row[std::size_t(j)];
    }
    return A;
}

inline LinearSolve solve_linear(const Eigen::MatrixXd& A, const Eigen::VectorXd& y)
{
    LinearSolve s;
    if (A.rows() == 0) {
        s.coef = Eigen::VectorXd::Zero(A.cols());
        s.residual = y;
        return s;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(A.rows(), A.cols()) * std::numeric_limits<double>::epsilon() * 1e3 *
                       (sv.size() ? sv(0) : 0.0);
    svd.setThreshold(sv.size() && sv(0) > 0 ? tol / sv(0) : 0.0);
    s.rank = int(svd.rank());
    s.coef = svd.solve(y);
    s.residual = y - A * s.coef;
    const double smin = sv.size() == A.cols() && sv.size() ? sv(sv.size() - 1) : 0.0;
    s.condition = smin > 0.0 ? (sv(0) / smin) * (sv(0) / smin) : std::numeric_limits<double>::infinity();
    return s;
}

/// Integral of the squared second derivative (finite differences); used to
/// prefer the smoothest among equally exact nonlinear fits.
inline double roughness(const CurveModel& m, const FitReport& f)
{
    const int n = 512;
    const double h = m.window / n;
    double acc = 0.0;
    double a = f.eval(m, 0.0), b = f.eval(m, h);
    for (int i = 2; i <= n; ++i) {
        const double c = f.eval(m, i * h);
        const double d2 = (a - 2.0 * b + c) / (h * h);
        acc += d2 * d2 * h;
        a = b;
        b = c;
    }
    return acc;
}

}  // namespace detail

/// Least-squares fit of a curve family to key points. Nonlinear parameters
/// are found by variable projection with box-constrained Levenberg-Marquardt
/// from a deterministic grid of starts; among fits that interpolate equally
/// well the smoothest is kept. `reference`, when given, is compared on a
/// uniform validation grid.
inline FitReport fit_curve_model(const CurveModel& m, std::span<const KeyPoint> pts,
                                 const std::function<double(double)>& reference = {}, const FitOptions& opt = {})
{
    FitReport rep;
    rep.family = m.family;
    rep.points = int(pts.size());
    Eigen::VectorXd y(Eigen::Index(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) y(Eigen::Index(i)) = pts[i].value;
    // residuals are measured against the variation of the data, not its offset
    double yscale = y.size() ? (y.array() - y.mean()).abs().maxCoeff() : 0.0;
    if (!(yscale > 0.0)) yscale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    if (!(yscale > 0.0)) yscale = 1.0;

    auto finish = [&](const std::vector<double>& nl, const detail::LinearSolve& s) {
        rep.nonlinear = nl;
        rep.coefficients.assign(s.coef.data(), s.coef.data() + s.coef.size());
        rep.rank = s.rank;
        rep.condition = s.condition;
        rep.point_rms = pts.empty() ? 0.0 : std::sqrt(s.residual.squaredNorm() / double(pts.size()));
    };

    if (m.nonlinear_count == 0) {
        finish({}, detail::solve_linear(detail::design(m, pts, {}), y));
    } else {
        const int k = m.nonlinear_count;
        auto cost_at = [&](const std::vector<double>& nl, detail::LinearSolve* out = nullptr) {
            const auto s = detail::solve_linear(detail::design(m, pts, nl), y / yscale);
            if (out) *out = s;
            return s.residual;
        };
        auto clamp_box = [&](std::vector<double>& nl) {
            for (int i = 0; i < k; ++i) nl[std::size_t(i)] = std::clamp(nl[std::size_t(i)], m.nl_lower[std::size_t(i)], m.nl_upper[std::size_t(i)]);
        };
        struct Candidate {
            std::vector<double> nl;
            double cost;
        };
        std::vector<Candidate> found;
        // starts: a grid over the box (2 parameters: 8 x 4)
        const int g0 = k == 2 ? 8 : opt.starts, g1 = k == 2 ? std::max(1, opt.starts / 8) : 1;
        for (int a = 0; a < g0; ++a)
            for (int b = 0; b < g1; ++b) {
                std::vector<double> nl(static_cast<std::size_t>(k));
                const double fr[2] = {(a + 0.5) / g0, (b + 0.5) / g1};
                for (int i = 0; i < k; ++i)
                    nl[std::size_t(i)] = m.nl_lower[std::size_t(i)] +
                                         fr[std::min(i, 1)] * (m.nl_upper[std::size_t(i)] - m.nl_lower[std::size_t(i)]);
                double lambda = 1e-3;
                Eigen::VectorXd r = cost_at(nl);
                double cost = r.squaredNorm();
                for (int it = 0; it < opt.max_iterations; ++it) {
                    Eigen::MatrixXd J(r.size(), k);
                    for (int i = 0; i < k; ++i) {
                        const double span = m.nl_upper[std::size_t(i)] - m.nl_lower[std::size_t(i)];
                        const double h = 1e-7 * span;
                        auto lo = nl, hi = nl;
                        hi[std::size_t(i)] += h;
                        lo[std::size_t(i)] -= h;
                        J.col(i) = (cost_at(hi) - cost_at(lo)) / (2.0 * h);
                    }
                    const Eigen::VectorXd grad = J.transpose() * r;
                    if (grad.norm() < opt.gradient_tol || cost < 1e-30) break;
                    Eigen::MatrixXd H = J.transpose() * J;
                    bool improved = false;
                    for (int tries = 0; tries < 20 && !improved; ++tries) {
                        Eigen::MatrixXd Hd = H;
                        Hd.diagonal().array() += lambda * (1.0 + H.diagonal().array());
                        const Eigen::VectorXd step = Hd.ldlt().solve(-grad);
                        auto trial = nl;
                        for (int i = 0; i < k; ++i) trial[std::size_t(i)] += step(i);
                        clamp_box(trial);
                        const Eigen::VectorXd rt = cost_at(trial);
                        if (rt.squaredNorm() < cost) {
                            nl = trial;
                            r = rt;
                            cost = rt.squaredNorm();
                            lambda = std::max(lambda / 3.0, 1e-12);
                            improved = true;
                        } else {
                            lambda *= 4.0;
                        }
                    }
                    if (!improved) break;
                }
                found.push_back({nl, cost});
            }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : found) best = std::min(best, c.cost);
        const double accept = std::max(best * 10.0, 1e-16);
        double best_rough = std::numeric_limits<double>::infinity();
        for (const auto& c : found) {
            if (c.cost > accept) continue;
            detail::LinearSolve s;
            cost_at(c.nl, &s);
            FitReport trial;
            trial.nonlinear = c.nl;
            trial.coefficients.assign(s.coef.data(), s.coef.data() + s.coef.size());
            const double rough = detail::roughness(m, trial);
            if (rough < best_rough) {
                best_rough = rough;
                s.coef *= yscale;
                s.residual *= yscale;
                finish(c.nl, s);
            }
        }
    }

    const double tol = m.nonlinear_count == 0 ? opt.linear_tol : opt.nonlinear_tol;
    double measure = rep.point_rms / (m.nonlinear_count == 0 ? 1.0 : yscale);
    if (reference) {
        double se = 0.0, ref2 = 0.0;
        const int n = opt.validation_samples;
        for (int i = 0; i < n; ++i) {
            const double t = m.window * i / (n - 1);
            const double yr = reference(t);
            const double e = rep.eval(m, t) - yr;
            se += e * e;
            ref2 += yr * yr;
        }
        rep.validation_rms = std::sqrt(se / n);
        rep.validation_rel = ref2 > 0.0 ? std::sqrt(se / ref2) : rep.validation_rms;
        measure = m.nonlinear_count == 0 ? rep.validation_rms : rep.validation_rel;
    }
    rep.sufficient = rep.rank == m.linear_count && measure < tol;
    return rep;
}

struct MncpReport {
    CurveFamily family = CurveFamily::QuadraticRange;
    NodeId node = NodeId::Head;
    CurveKind kind = CurveKind::DistanceSq;
    int mncp = 0;
    FitReport at_mncp;
    FitReport below;
    bool sufficient_at_mncp = false;
    bool deficiency_asserted = false;  // only for linear families
    bool deficient_below = false;
};

/// Key points at the MNCP count reconstruct the curve; with one point fewer a
/// linear family loses rank.
inline MncpReport verify_mncp(const CurveModel& model, const NodeCurve& curve, const FitOptions& opt = {})
{
    MncpReport r;
    r.family = model.family;
    r.node = model.node;
    r.kind = model.kind;
    r.mncp = model.mncp;
    const auto ref = [&](double t) { return curve(t); };
    const KeyPointSet kp = keypoint_select(curve, model.mncp);
    r.at_mncp = fit_curve_model(model, kp.points, ref, opt);
    r.sufficient_at_mncp = r.at_mncp.sufficient;
    std::vector<KeyPoint> fewer(kp.points.begin(), kp.points.end());
    if (!fewer.empty()) fewer.pop_back();
    r.below = fit_curve_model(model, fewer, ref, opt);
    r.deficiency_asserted = model.nonlinear_count == 0;
    r.deficient_below = r.below.rank < model.linear_count;
    return r;
}

/// Every curve family of a motion class with its model and reference curve.
struct FamilyCase {
    CurveModel model;
    NodeCurve curve;
};

inline std::vector<FamilyCase> family_cases(ActivityClass c, const SceneParams& base)
{
    SceneParams p = base;
    p.through_wall = false;
    const ActivitySpec act = canonical_activity(c);
    std::vector<FamilyCase> out;
    for (CurveKind k : {CurveKind::DistanceSq, CurveKind::VelocitySq})
        for (NodeId n : kNodes) out.push_back({make_curve_model(n, k, c, p), NodeCurve{n, k, p, act}});
    return out;
}

// ---------------------------------------------------------------------------
// Noise robustness

struct SweepInput {
    int label = 0;
    Eigen::MatrixXd r2tm, d2tm;
    CornerSet gt_r, gt_d;
};

struct SweepRow {
    int label = 0;
    double delta_db = 0.0;
    int seed = 0;
    double emd_r = 0.0, emd_d = 0.0;
    double emd() const { return 0.5 * (emd_r + emd_d); }
};

/// Corner EMD of an activity: mean of the R2TM and D2TM cloud distances.
inline SweepRow corner_fidelity(const Eigen::MatrixXd& r2tm, const Eigen::MatrixXd& d2tm, const CornerSet& gt_r,
                                const CornerSet& gt_d, const DetectorConfig& det)
{
    SweepRow row;
    row.emd_r = emd_distance(corner_cloud(extract_corners(r2tm, det)), corner_cloud(gt_r));
    row.emd_d = emd_distance(corner_cloud(extract_corners(d2tm, det)), corner_cloud(gt_d));
    return row;
}

/// Re-detects corners on degraded copies of each map. Delta 0 is evaluated
/// once per activity (no noise is added).
inline std::vector<SweepRow> robustness_sweep(const std::vector<SweepInput>& in, const std::vector<double>& deltas,
                                              int seeds, std::uint64_t base_seed, const DetectorConfig& det)
{
    std::vector<SweepRow> rows;
    for (const auto& a : in)
        for (double d : deltas) {
            const int ns = d > 0.0 ? seeds : 1;
            for (int s = 0; s < ns; ++s) {
                const std::uint64_t sd = base_seed + std::uint64_t(a.label) * 1000 + std::uint64_t(s);
                SweepRow r = corner_fidelity(degrade_image(a.r2tm, d, sd), degrade_image(a.d2tm, d, sd + 500),
                                             a.gt_r, a.gt_d, det);
                r.label = a.label;
                r.delta_db = d;
                r.seed = s;
                rows.push_back(r);
            }
        }
    return rows;
}

struct SweepSummary {
    double delta_db = 0.0;
    double mean = 0.0;       // over activities and seeds
    double std_error = 0.0;  // of the per-seed activity means
};

inline std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows, const std::vector<double>& deltas)
{
    std::vector<SweepSummary> out;
    for (double d : deltas) {
        std::map<int, std::pair<double, int>> per_seed;
        for (const auto& r : rows)
            if (r.delta_db == d) {
                auto& acc = per_seed[r.seed];
                acc.first += r.emd();
                acc.second += 1;
            }
        std::vector<double> means;
        for (const auto& [s, acc] : per_seed) means.push_back(acc.first / acc.second);
        SweepSummary sm;
        sm.delta_db = d;
        if (!means.empty()) {
            sm.mean = std::accumulate(means.begin(), means.end(), 0.0) / double(means.size());
            if (means.size() > 1) {
                double v = 0.0;
                for (double x : means) v += (x - sm.mean) * (x - sm.mean);
                v /= double(means.size() - 1);
                sm.std_error = std::sqrt(v / double(means.size()));
            }
        }
        out.push_back(sm);
    }
    return out;
}

}  // namespace mdc

#endif  // MDCORNER_EVAL_METRICS_HPP
