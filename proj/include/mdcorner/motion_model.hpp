#ifndef MDCORNER_MOTION_MODEL_HPP
#define MDCORNER_MOTION_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dual.hpp"
#include "geometry.hpp"

namespace mdc {

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kPi = std::numbers::pi;

enum class NodeId : int { Head = 0, Torso, HandLeft, HandRight, FootLeft, FootRight };

inline constexpr std::array<NodeId, 6> kNodes{NodeId::Head,     NodeId::Torso,    NodeId::HandLeft,
                                              NodeId::HandRight, NodeId::FootLeft, NodeId::FootRight};

inline int node_index(NodeId n) { return static_cast<int>(n); }

inline const char* node_label(NodeId n)
{
    static const char* labels[] = {"N1", "N2", "N3", "N4", "N5", "N6"};
    return labels[node_index(n)];
}

inline bool is_hand(NodeId n) { return n == NodeId::HandLeft || n == NodeId::HandRight; }
inline bool is_foot(NodeId n) { return n == NodeId::FootLeft || n == NodeId::FootRight; }
inline bool is_limb(NodeId n) { return is_hand(n) || is_foot(n); }

/// N4 and N6 swing half a cycle behind N3 and N5.
inline double pendulum_phase(NodeId n) { return (n == NodeId::HandRight || n == NodeId::FootRight) ? kPi : 0.0; }

struct WallParams {
    double thickness = 0.12;     // m
    double permittivity = 6.0;   // relative
    double standoff = 0.3;       // radar to the wall's front face, m

    /// Additional one-way path through the wall.
    double extra_path() const { return thickness * (std::sqrt(permittivity) - 1.0); }
};

/// Anthropometric, gait, geometry and wall parameters. Defaults describe a
/// 1.8 m tester walking diagonally past a radar at 1.5 m height.
struct SceneParams {
    double radar_height = 1.5;
    double x1 = 3.6;
    double y1 = 1.2;
    double torso_upper = 1.5;
    double torso_lower = 0.95;
    double arm_length = 0.65;
    double leg_length = 0.9;
    double v1x = -0.85;
    double v1y = -0.85;
    double undulation = 0.05;
    double gait_frequency = 2.0 * kPi;
    double arm_max_angle = kPi / 6.0;
    double leg_max_angle = kPi / 4.0;
    double in_situ_drop = 0.4;
    double in_situ_quarter = 1.0;
    double window = 4.0;
    WallParams wall;
    bool through_wall = true;
    bool exact_undulation = false;

    double speed_sq() const { return v1x * v1x + v1y * v1y; }
    double speed() const { return std::sqrt(speed_sq()); }

    /// Throws std::invalid_argument naming the first violated constraint;
    /// returns soft warnings.
    std::vector<std::string> validate() const
    {
        auto fail = [](const std::string& what) { throw std::invalid_argument("scene." + what); };
        if (!(torso_lower > 0.0)) fail("torso_lower must be > 0");
        if (!(torso_upper > torso_lower)) fail("torso_upper must exceed torso_lower");
        if (!(arm_length > 0.0)) fail("arm_length must be > 0");
        if (!(leg_length > 0.0)) fail("leg_length must be > 0");
        if (!(undulation >= 0.0)) fail("undulation must be >= 0");
        if (!(window > 0.0)) fail("window must be > 0");
        if (!(window * gait_frequency / kPi >= 2.0)) fail("window*gait_frequency/pi must be >= 2");
        if (!(in_situ_drop < torso_upper)) fail("in_situ_drop must be < torso_upper");
        if (!(in_situ_quarter > 0.0)) fail("in_situ_quarter must be > 0");
        if (!(wall.thickness >= 0.0)) fail("wall_thickness must be >= 0");
        if (!(wall.permittivity >= 1.0)) fail("wall_permittivity must be >= 1");
        std::vector<std::string> warnings;
        const double head_offset = std::abs(torso_upper - radar_height + 0.15);
        if (undulation >= 0.1 * head_offset)
            warnings.push_back("undulation is not small relative to |torso_upper - radar_height + 0.15|");
        return warnings;
    }

    /// Uniform scaling of body heights and lengths (testers of other heights).
    SceneParams scaled(double factor) const
    {
        SceneParams s = *this;
        s.torso_upper *= factor;
        s.torso_lower *= factor;
        s.arm_length *= factor;
        s.leg_length *= factor;
        s.in_situ_drop *= factor;
        return s;
    }
};

enum class MotionState { Free, Pendulum, Sudden, Inactive };
enum class ActivityClass { Empty, Walking, InSitu, Combination };
enum class CurveKind { DistanceSq, VelocitySq };

inline const char* curve_kind_name(CurveKind k) { return k == CurveKind::DistanceSq ? "R2" : "D2"; }

/// A time slice of an activity, given as fractions of the window.
struct Segment {
    double begin = 0.0;
    double end = 1.0;
    std::array<MotionState, 6> states{};

    bool moving() const { return states[0] == MotionState::Free; }
};

struct ActivitySpec {
    int label = 1;
    std::string name;
    ActivityClass activity_class = ActivityClass::Empty;
    std::vector<Segment> segments;

    std::optional<double> v1x, v1y, arm_max_angle, leg_max_angle, gait_frequency, in_situ_drop;
    /// Per-node fraction of the in-situ height drop.
    std::array<double, 6> drop_scale{1.0, 0.8, 0.6, 0.6, 0.15, 0.15};
    /// -1: in-situ nodes start at the top pose and dip; +1: start low and rise.
    int in_situ_sign = -1;

    std::string id() const { return "S" + std::to_string(label); }

    SceneParams apply(const SceneParams& base) const
    {
        SceneParams p = base;
        if (v1x) p.v1x = *v1x;
        if (v1y) p.v1y = *v1y;
        if (arm_max_angle) p.arm_max_angle = *arm_max_angle;
        if (leg_max_angle) p.leg_max_angle = *leg_max_angle;
        if (gait_frequency) p.gait_frequency = *gait_frequency;
        if (in_situ_drop) p.in_situ_drop = *in_situ_drop;
        return p;
    }

    MotionState state(NodeId n, double t_frac) const
    {
        return segment_at(t_frac).states[node_index(n)];
    }

    const Segment& segment_at(double t_frac) const
    {
        for (std::size_t i = 0; i + 1 < segments.size(); ++i)
            if (t_frac < segments[i].end) return segments[i];
        return segments.back();
    }
};

namespace detail {

inline Segment walking_segment(double b, double e)
{
    using S = MotionState;
    return {b, e, {S::Free, S::Free, S::Pendulum, S::Pendulum, S::Pendulum, S::Pendulum}};
}

inline Segment in_situ_segment(double b, double e)
{
    Segment s{b, e, {}};
    s.states.fill(MotionState::Sudden);
    return s;
}

inline std::vector<ActivitySpec> build_activity_table()
{
    std::vector<ActivitySpec> t;
    auto add = [&](int label, const char* name, ActivityClass c, std::vector<Segment> segs) -> ActivitySpec& {
        ActivitySpec a;
        a.label = label;
        a.name = name;
        a.activity_class = c;
        a.segments = std::move(segs);
        t.push_back(a);
        return t.back();
    };
    using C = ActivityClass;
    {
        Segment empty{0.0, 1.0, {}};
        empty.states.fill(MotionState::Inactive);
        add(1, "Empty", C::Empty, {empty});
    }
    {
        auto& a = add(2, "Punching", C::Walking, {walking_segment(0, 1)});
        a.v1x = -0.25, a.v1y = -0.1, a.arm_max_angle = kPi / 3.0, a.leg_max_angle = 0.15;
    }
    {
        auto& a = add(3, "Kicking", C::Walking, {walking_segment(0, 1)});
        a.v1x = -0.25, a.v1y = -0.1, a.arm_max_angle = 0.2, a.leg_max_angle = kPi / 3.0, a.gait_frequency = 1.5 * kPi;
    }
    {
        auto& a = add(4, "Grabbing", C::InSitu, {in_situ_segment(0, 1)});
        a.in_situ_drop = 0.35;
        a.drop_scale = {0.5, 0.4, 1.0, 1.0, 0.1, 0.1};
    }
    {
        auto& a = add(5, "Sitting Down", C::InSitu, {in_situ_segment(0, 1)});
        a.in_situ_drop = 0.45;
        a.drop_scale = {1.0, 1.0, 0.9, 0.9, 0.15, 0.15};
    }
    {
        auto& a = add(6, "Standing Up", C::InSitu, {in_situ_segment(0, 1)});
        a.in_situ_drop = 0.45;
        a.drop_scale = {1.0, 1.0, 0.9, 0.9, 0.15, 0.15};
        a.in_situ_sign = +1;
    }
    {
        auto& a = add(7, "Rotating", C::Walking, {walking_segment(0, 1)});
        a.v1x = 0.2, a.v1y = -0.4, a.arm_max_angle = kPi / 5.0, a.leg_max_angle = kPi / 8.0, a.gait_frequency = kPi;
    }
    add(8, "Walking", C::Walking, {walking_segment(0, 1)});
    add(9, "Sitting to Walking", C::Combination, {in_situ_segment(0, 0.5), walking_segment(0.5, 1)});
    add(10, "Walking to Sitting", C::Combination, {walking_segment(0, 0.5), in_situ_segment(0.5, 1)});
    {
        auto& a = add(11, "Falling to Walking", C::Combination, {in_situ_segment(0, 0.5), walking_segment(0.5, 1)});
        a.in_situ_drop = 0.9;
        a.drop_scale = {1.0, 1.0, 0.9, 0.9, 0.3, 0.3};
    }
    {
        auto& a = add(12, "Walking to Falling", C::Combination, {walking_segment(0, 0.5), in_situ_segment(0.5, 1)});
        a.in_situ_drop = 0.9;
        a.drop_scale = {1.0, 1.0, 0.9, 0.9, 0.3, 0.3};
    }
    return t;
}

}  // namespace detail

/// The twelve activities S1..S12.
inline const std::vector<ActivitySpec>& activity_table()
{
    static const std::vector<ActivitySpec> table = detail::build_activity_table();
    return table;
}

inline const ActivitySpec& activity(int label)
{
    if (label < 1 || label > 12) throw std::invalid_argument("activity label must be S1..S12");
    return activity_table()[label - 1];
}

inline const ActivitySpec& activity(const std::string& id)
{
    if (id.size() < 2 || (id[0] != 'S' && id[0] != 's')) throw std::invalid_argument("bad activity id '" + id + "'");
    return activity(std::stoi(id.substr(1)));
}

/// Activity used when a curve family is studied on its own with the plain
/// scene parameters (no per-activity overrides).
inline ActivitySpec canonical_activity(ActivityClass c)
{
    ActivitySpec a;
    a.activity_class = c;
    if (c == ActivityClass::Walking) {
        a.label = 8;
        a.name = "Walking";
        a.segments = {detail::walking_segment(0, 1)};
    } else if (c == ActivityClass::InSitu) {
        a.label = 5;
        a.name = "In-situ";
        a.segments = {detail::in_situ_segment(0, 1)};
    } else {
        throw std::invalid_argument("canonical activity exists for walking and in-situ classes only");
    }
    return a;
}

namespace detail {

/// Kinematic context of the segment containing t.
struct SegmentFrame {
    const Segment* seg = nullptr;
    double t_begin = 0.0;   // seconds
    double duration = 0.0;  // seconds
    double xs = 0.0, ys = 0.0;
};

inline SegmentFrame segment_frame(const ActivitySpec& a, const SceneParams& p, double t)
{
    SegmentFrame f;
    f.xs = p.x1;
    f.ys = p.y1;
    const double frac = t / p.window;
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        const Segment& s = a.segments[i];
        const bool last = i + 1 == a.segments.size();
        if (last || frac < s.end) {
            f.seg = &s;
            f.t_begin = s.begin * p.window;
            f.duration = (s.end - s.begin) * p.window;
            return f;
        }
        if (s.moving()) {
            const double d = (s.end - s.begin) * p.window;
            f.xs += p.v1x * d;
            f.ys += p.v1y * d;
        }
    }
    throw std::logic_error("activity without segments");
}

/// Shoulder (hands) or hip (feet) height, limb length and swing amplitude.
struct LimbGeometry {
    double pivot_height, length, max_angle;
};

inline LimbGeometry limb_geometry(NodeId n, const SceneParams& p)
{
    if (is_hand(n)) return {p.torso_upper, p.arm_length, p.arm_max_angle};
    return {p.torso_lower, p.leg_length, p.leg_max_angle};
}

/// Node height in the standing pose.
inline double rest_height(NodeId n, const SceneParams& p)
{
    switch (n) {
    case NodeId::Head: return p.torso_upper + 0.15;
    case NodeId::Torso: return 0.5 * (p.torso_upper + p.torso_lower);
    case NodeId::HandLeft:
    case NodeId::HandRight: return p.torso_upper - p.arm_length;
    default: return p.torso_lower - p.leg_length;
    }
}

/// Horizontal unit direction of the pendulum swing plane.
inline std::array<double, 2> swing_direction(const SceneParams& p, double xs, double ys)
{
    const double v = p.speed();
    if (v > 1e-12) return {p.v1x / v, p.v1y / v};
    const double r = std::hypot(xs, ys);
    if (r > 1e-12) return {-xs / r, -ys / r};
    return {1.0, 0.0};
}

template <class S>
S free_space_distance_sq(NodeId n, const SceneParams& p, const ActivitySpec& a, S t)
{
    using std::cos;
    using std::sin;
    const SegmentFrame f = segment_frame(a, p, value_of(t));
    const MotionState st = f.seg->states[node_index(n)];
    const S tau = t - f.t_begin;
    const double h0 = p.radar_height;

    if (st == MotionState::Inactive) {
        const double z = rest_height(n, p) - h0;
        return S{} * 0.0 + (p.x1 * p.x1 + p.y1 * p.y1 + z * z);
    }

    if (st == MotionState::Sudden) {
        const double t0 = p.in_situ_quarter * f.duration / p.window;
        const double omega = kPi / (2.0 * t0);
        const double drop = p.in_situ_drop * a.drop_scale[node_index(n)];
        const double c = rest_height(n, p) - h0 - 0.5 * drop;
        const double horiz = f.xs * f.xs + f.ys * f.ys;
        const S arg = omega * (tau - t0);
        return (horiz + c * c + drop * drop / 8.0) + (a.in_situ_sign * drop * c) * sin(arg) -
               (drop * drop / 8.0) * cos(2.0 * arg);
    }

    const double v2 = p.speed_sq();
    const double proj0 = f.xs * p.v1x + f.ys * p.v1y;
    const S planar = v2 * tau * tau + 2.0 * proj0 * tau + (f.xs * f.xs + f.ys * f.ys);

    if (st == MotionState::Free || !is_limb(n)) {
        if (is_limb(n)) {
            const double z = rest_height(n, p) - h0;
            return planar + z * z;
        }
        const double z = rest_height(n, p) - h0;
        if (p.exact_undulation) {
            const S zt = z + p.undulation * sin(p.gait_frequency * tau);
            return planar + zt * zt;
        }
        return planar + z * z;
    }

    // Pendulum limb: pivot moves with the body, the limb swings in the
    // vertical plane containing the walking direction.
    const LimbGeometry g = limb_geometry(n, p);
    const double s = g.pivot_height - h0;
    const S theta = g.max_angle * sin(p.gait_frequency * tau + pendulum_phase(n));
    const auto u = swing_direction(p, f.xs, f.ys);
    const S along = (f.xs + p.v1x * tau) * u[0] + (f.ys + p.v1y * tau) * u[1];
    return planar + (s * s + g.length * g.length) + 2.0 * g.length * sin(theta) * along -
           2.0 * s * g.length * cos(theta);
}

template <class S>
S velocity_sq(NodeId n, const SceneParams& p, const ActivitySpec& a, S t)
{
    using std::cos;
    using std::sin;
    const SegmentFrame f = segment_frame(a, p, value_of(t));
    const MotionState st = f.seg->states[node_index(n)];
    const S tau = t - f.t_begin;

    if (st == MotionState::Inactive) return S{} * 0.0;

    if (st == MotionState::Sudden) {
        const double t0 = p.in_situ_quarter * f.duration / p.window;
        const double drop = p.in_situ_drop * a.drop_scale[node_index(n)];
        return (kPi / (32.0 * t0 * t0)) * drop * drop * (1.0 + cos((kPi / t0) * (tau - t0)));
    }

    const double v2 = p.speed_sq();
    if (st == MotionState::Free || !is_limb(n)) {
        if (p.exact_undulation && !is_limb(n)) {
            const S w = p.undulation * p.gait_frequency * cos(p.gait_frequency * tau);
            return v2 + w * w;
        }
        return S{} * 0.0 + v2;
    }

    const LimbGeometry g = limb_geometry(n, p);
    const double v = std::sqrt(v2);
    const double phi = p.gait_frequency;
    const S ph = phi * tau + pendulum_phase(n);
    const S c = cos(ph);
    const double k = g.length * g.max_angle * phi;
    return v2 - (2.0 * v * k) * c * cos(g.max_angle * sin(ph)) + (k * k) * c * c;
}

inline void check_time(const SceneParams& p, double t)
{
    if (!(t >= -1e-12 && t <= p.window + 1e-12))
        throw std::domain_error("t = " + std::to_string(t) + " s outside [0, T]");
}

}  // namespace detail

struct ModelOptions {};

/// Squared one-way propagation distance (m^2) of a node at time t.
/// `p` holds the base scene; the activity's overrides are applied here.
template <class S = double>
S node_distance_sq(NodeId n, const SceneParams& p, const ActivitySpec& a, S t)
{
    detail::check_time(p, value_of(t));
    const SceneParams q = a.apply(p);
    S d2 = detail::free_space_distance_sq(n, q, a, t);
    if (q.through_wall) {
        using std::sqrt;
        const S d = sqrt(d2) + q.wall.extra_path();
        return d * d;
    }
    return d2;
}

/// Squared speed ((m/s)^2) of a node at time t.
template <class S = double>
S node_velocity_sq(NodeId n, const SceneParams& p, const ActivitySpec& a, S t)
{
    detail::check_time(p, value_of(t));
    return detail::velocity_sq(n, a.apply(p), a, t);
}

/// Scalar curve t -> xi^2(t) or chi^2(t) for one node of one activity.
struct NodeCurve {
    NodeId node = NodeId::Head;
    CurveKind kind = CurveKind::DistanceSq;
    SceneParams params;
    ActivitySpec act;

    template <class S>
    S operator()(S t) const
    {
        return kind == CurveKind::DistanceSq ? node_distance_sq(node, params, act, t)
                                             : node_velocity_sq(node, params, act, t);
    }
};

// ---------------------------------------------------------------------------
// Key points

struct KeyPoint {
    double t = 0.0;
    double value = 0.0;
};

struct KeyPointSet {
    NodeId node = NodeId::Head;
    CurveKind kind = CurveKind::DistanceSq;
    std::vector<KeyPoint> points;
};

class DegenerateCurveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Zeros of g on (0, T) by sign-change scan and bisection.
template <class G>
std::vector<double> scan_zeros(const G& g, double T, int grid = 4096, double tol = 1e-9)
{
    std::vector<double> roots;
    double t_prev = 0.0;
    double g_prev = g(0.0);
    for (int i = 1; i <= grid; ++i) {
        const double t = T * i / grid;
        const double gv = g(t);
        if ((g_prev < 0.0 && gv > 0.0) || (g_prev > 0.0 && gv < 0.0)) {
            double lo = t_prev, hi = t, glo = g_prev;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                if (gm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((gm < 0.0) == (glo < 0.0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        } else if (gv == 0.0 && i < grid) {
            // exact zero on the grid: accept if the sign changes across it
            const double g_next = g(T * (i + 1) / grid);
            if ((g_prev < 0.0 && g_next > 0.0) || (g_prev > 0.0 && g_next < 0.0)) roots.push_back(t);
        }
        t_prev = t;
        g_prev = gv;
    }
    std::vector<double> inner;
    for (double r : roots)
        if (r > tol && r < T - tol) inner.push_back(r);
    return inner;
}

inline bool near_any(const std::vector<double>& ts, double t, double tol)
{
    return std::any_of(ts.begin(), ts.end(), [&](double s) { return std::abs(s - t) < tol; });
}

}  // namespace detail

/// Selects `count` time instants on [0, T]: the window edges, then extrema,
/// then inflection points, then midpoints of the widest remaining gaps.
/// Candidates are drawn nearest to evenly spread targets. An extremum whose
/// curve value repeats one already chosen is deferred until the inflections
/// are exhausted, and such an inflection is never taken: on periodic or
/// symmetric curves these points mirror a chosen one and add nothing to a
/// reconstruction.
template <class F>
std::vector<double> select_key_times(const F& curve, int count, double T)
{
    if (count <= 0) return {};
    if (!(T > 0.0)) throw std::invalid_argument("window must be positive");
    constexpr double kDistinct = 1e-6;
    std::vector<double> ts{0.0};
    if (count >= 2) ts.push_back(T);

    auto value_is_new = [&](double t) {
        const double v = curve(t);
        return std::none_of(ts.begin(), ts.end(), [&](double s) {
            const double w = curve(s);
            return std::abs(v - w) <= 1e-7 * std::max(std::abs(v), std::abs(w)) + 1e-12;
        });
    };
    auto take = [&](const std::vector<double>& cand, bool distinct_values) {
        const int need = count - int(ts.size());
        for (int k = 1; k <= need; ++k) {
            const double target = T * k / (need + 1);
            double best = -1.0;
            for (double c : cand) {
                if (detail::near_any(ts, c, kDistinct)) continue;
                if (distinct_values && !value_is_new(c)) continue;
                if (best < 0.0 || std::abs(c - target) < std::abs(best - target)) best = c;
            }
            if (best >= 0.0) ts.push_back(best);
        }
    };

    std::vector<double> d1, d2;
    if (int(ts.size()) < count) d1 = detail::scan_zeros([&](double t) { return derivative1(curve, t); }, T);
    if (int(ts.size()) < count) take(d1, true);
    if (int(ts.size()) < count) d2 = detail::scan_zeros([&](double t) { return derivative2(curve, t); }, T);
    if (int(ts.size()) < count) take(d2, true);
    if (int(ts.size()) < count) take(d1, false);

    while (int(ts.size()) < count) {
        std::sort(ts.begin(), ts.end());
        if (ts.size() == 1) ts.push_back(T);  // count==1 never reaches here
        double best_gap = 0.0, best_mid = 0.0;
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            const double gap = ts[i + 1] - ts[i];
            if (gap > best_gap) {
                best_gap = gap;
                best_mid = 0.5 * (ts[i] + ts[i + 1]);
            }
        }
        if (best_gap < 2.0 * kDistinct) throw DegenerateCurveError("cannot find enough distinct key points");
        ts.push_back(best_mid);
    }
    std::sort(ts.begin(), ts.end());
    return ts;
}

/// Key points of one node curve.
inline KeyPointSet keypoint_select(const NodeCurve& curve, int count)
{
    KeyPointSet out;
    out.node = curve.node;
    out.kind = curve.kind;
    const double T = curve.params.window;
    for (double t : select_key_times(curve, count, T)) out.points.push_back({t, curve(t)});
    return out;
}

// ---------------------------------------------------------------------------
// Minimum number of corner points

/// Per-node MNCP counts for a motion class.
inline std::array<int, 6> mncp_table(ActivityClass c, CurveKind k)
{
    switch (c) {
    case ActivityClass::Walking:
        return k == CurveKind::DistanceSq ? std::array<int, 6>{3, 3, 6, 6, 6, 6} : std::array<int, 6>{1, 1, 5, 5, 5, 5};
    case ActivityClass::InSitu:
    case ActivityClass::Combination: return {5, 5, 5, 5, 5, 5};
    case ActivityClass::Empty: return {0, 0, 0, 0, 0, 0};
    }
    return {};
}

/// Per-node point budget for a 30-point ground-truth corner set. Walking D2
/// needs only 22 points; the remaining eight go to the pendulum limbs.
inline std::array<int, 6> corner_budget(ActivityClass c, CurveKind k)
{
    auto b = mncp_table(c, k);
    if (c == ActivityClass::Walking && k == CurveKind::VelocitySq) b = {1, 1, 7, 7, 7, 7};
    return b;
}

enum class CurveFamily { QuadraticRange, PendulumRange, ConstantDoppler, PendulumDoppler, InSituRange, InSituDoppler };

inline const char* curve_family_name(CurveFamily f)
{
    switch (f) {
    case CurveFamily::QuadraticRange: return "quadratic-range";
    case CurveFamily::PendulumRange: return "pendulum-range";
    case CurveFamily::ConstantDoppler: return "constant-doppler";
    case CurveFamily::PendulumDoppler: return "pendulum-doppler";
    case CurveFamily::InSituRange: return "in-situ-range";
    case CurveFamily::InSituDoppler: return "in-situ-doppler";
    }
    return "?";
}

/// Parametric family f(t) = sum_k c_k * basis_k(t; nl) with linear
/// coefficients c and nonlinear parameters nl searched inside a box.
struct CurveModel {
    CurveFamily family = CurveFamily::QuadraticRange;
    NodeId node = NodeId::Head;
    CurveKind kind = CurveKind::DistanceSq;
    ActivityClass activity_class = ActivityClass::Walking;
    int linear_count = 0;
    int nonlinear_count = 0;
    int mncp = 0;
    double window = 4.0;
    std::vector<double> nl_lower, nl_upper;
    std::function<void(double t, std::span<const double> nl, std::span<double> out)> basis;

    int unknowns() const { return linear_count + nonlinear_count; }
};

inline CurveModel make_curve_model(NodeId n, CurveKind k, ActivityClass c, const SceneParams& p)
{
    CurveModel m;
    m.node = n;
    m.kind = k;
    m.activity_class = c;
    m.window = p.window;
    m.mncp = mncp_table(c, k)[node_index(n)];
    if (c == ActivityClass::Walking) {
        if (!is_limb(n)) {
            if (k == CurveKind::DistanceSq) {
                m.family = CurveFamily::QuadraticRange;
                m.linear_count = 3;
                m.basis = [](double t, std::span<const double>, std::span<double> o) {
                    o[0] = 1.0, o[1] = t, o[2] = t * t;
                };
            } else {
                m.family = CurveFamily::ConstantDoppler;
                m.linear_count = 1;
                m.basis = [](double, std::span<const double>, std::span<double> o) { o[0] = 1.0; };
            }
            return m;
        }
        const auto g = detail::limb_geometry(n, p);
        const double phi = p.gait_frequency, ph = pendulum_phase(n);
        if (k == CurveKind::DistanceSq) {
            m.family = CurveFamily::PendulumRange;
            m.linear_count = 6;
            const double th = g.max_angle;
            m.basis = [phi, ph, th](double t, std::span<const double>, std::span<double> o) {
                const double a = th * std::sin(phi * t + ph);
                const double s = std::sin(a);
                o[0] = 1.0, o[1] = t, o[2] = t * t, o[3] = s, o[4] = t * s, o[5] = std::cos(a);
            };
        } else {
            m.family = CurveFamily::PendulumDoppler;
            m.linear_count = 3;
            m.nonlinear_count = 2;
            m.nl_lower = {kPi, 0.01};
            m.nl_upper = {4.0 * kPi, kPi / 2.0 - 0.01};
            m.basis = [ph](double t, std::span<const double> nl, std::span<double> o) {
                const double w = nl[0] * t + ph;
                const double c = std::cos(w);
                o[0] = 1.0, o[1] = c * std::cos(nl[1] * std::sin(w)), o[2] = c * c;
            };
        }
        return m;
    }
    if (c == ActivityClass::InSitu) {
        // phase origin t'' = t - t0 is fixed by T = 4 t0; the frequencies are unknown
        const double t0 = p.in_situ_quarter;
        if (k == CurveKind::DistanceSq) {
            m.family = CurveFamily::InSituRange;
            m.linear_count = 3;
            // the cosine runs at twice the sine frequency; left free the two
            // frequencies admit several exact 5-point interpolants
            m.nonlinear_count = 1;
            m.nl_lower = {kPi / 4.0};
            m.nl_upper = {2.0 * kPi};
            m.basis = [t0](double t, std::span<const double> nl, std::span<double> o) {
                o[0] = 1.0, o[1] = std::sin(nl[0] * (t - t0)), o[2] = std::cos(2.0 * nl[0] * (t - t0));
            };
        } else {
            m.family = CurveFamily::InSituDoppler;
            m.linear_count = 2;
            m.nonlinear_count = 1;
            m.nl_lower = {kPi / 2.0};
            m.nl_upper = {4.0 * kPi};
            m.basis = [t0](double t, std::span<const double> nl, std::span<double> o) {
                o[0] = 1.0, o[1] = std::cos(nl[0] * (t - t0));
            };
        }
        return m;
    }
    throw std::invalid_argument("curve models exist for walking and in-situ classes only");
}

/// Numerical rank of the basis Gram matrix sampled on [0, T] (nonlinear
/// parameters fixed at `nl`).
inline int basis_rank(const CurveModel& m, std::span<const double> nl, int samples = 512)
{
    Eigen::MatrixXd A(samples, m.linear_count);
    std::vector<double> row(m.linear_count);
    for (int i = 0; i < samples; ++i) {
        m.basis(m.window * i / (samples - 1), nl, row);
        for (int j = 0; j < m.linear_count; ++j) A(i, j) = row[j];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.transpose() * A);
    svd.setThreshold(1e-12);
    return int(svd.rank());
}

// ---------------------------------------------------------------------------
// Ground-truth corners

/// Pixel grid shared by the ground truth and the rendered squared maps.
struct MapGrid {
    SquaredAxis range_axis;
    SquaredAxis doppler_axis;
    int cols = 1024;
    double time_step = 4.0 / 1024;  // seconds per column
    double carrier = 1.5e9;
};

inline double time_to_col(const MapGrid& g, double t)
{
    return std::clamp(t / g.time_step, 0.0, double(g.cols - 1));
}

/// Signed Doppler (Hz) placed at a D2 key point: magnitude from the speed,
/// sign from the range rate.
inline double keypoint_doppler(const NodeCurve& distance_curve, double speed_sq, double carrier, double t)
{
    const double rate = derivative1(distance_curve, t);
    const double f = 2.0 * carrier * std::sqrt(std::max(speed_sq, 0.0)) / kSpeedOfLight;
    return rate < 0.0 ? -f : f;
}

/// Key points of every node and both curve kinds for an activity.
inline std::vector<KeyPointSet> activity_keypoints(const ActivitySpec& a, const SceneParams& p, CurveKind k)
{
    std::vector<KeyPointSet> out;
    const auto budget = corner_budget(a.activity_class, k);
    for (NodeId n : kNodes) {
        if (budget[node_index(n)] == 0) continue;
        out.push_back(keypoint_select(NodeCurve{n, k, p, a}, budget[node_index(n)]));
    }
    return out;
}

/// Analytic corners on R2TM and D2TM: 30 per map for S2..S12, a flagged
/// placeholder grid for S1.
inline std::pair<CornerSet, CornerSet> groundtruth_corners(const ActivitySpec& a, const SceneParams& p,
                                                           const MapGrid& g)
{
    CornerSet r2{"R2TM-GT", {}, 0, false}, d2{"D2TM-GT", {}, 0, false};
    const int rr = g.range_axis.rows, dr = g.doppler_axis.rows;
    if (a.activity_class == ActivityClass::Empty) {
        r2.corners = uniform_corner_grid(30, rr, g.cols);
        d2.corners = uniform_corner_grid(30, dr, g.cols);
        r2.placeholder = d2.placeholder = true;
        return {r2, d2};
    }
    auto place = [](CornerSet& cs, double row, double col, int rows, int cols) {
        if (row < 0.0 || row > rows - 1) {
            ++cs.clamped;
            row = std::clamp(row, 0.0, double(rows - 1));
        }
        cs.corners.push_back(make_corner(row, col, rows, cols));
    };
    for (const auto& kp : activity_keypoints(a, p, CurveKind::DistanceSq))
        for (const auto& pt : kp.points)
            place(r2, g.range_axis.row_of(std::sqrt(pt.value)), time_to_col(g, pt.t), rr, g.cols);
    for (const auto& kp : activity_keypoints(a, p, CurveKind::VelocitySq)) {
        const NodeCurve dist{kp.node, CurveKind::DistanceSq, p, a};
        for (const auto& pt : kp.points) {
            const double f = keypoint_doppler(dist, pt.value, g.carrier, pt.t);
            place(d2, g.doppler_axis.row_of(f), time_to_col(g, pt.t), dr, g.cols);
        }
    }
    return {r2, d2};
}

/// CSV export: node, t_seconds, value, map.
inline void write_keypoints_csv(std::ostream& os, const std::vector<KeyPointSet>& sets)
{
    os << "node,t_seconds,value,map\n";
    os.precision(12);
    for (const auto& s : sets)
        for (const auto& p : s.points)
            os << node_label(s.node) << ',' << p.t << ',' << p.value << ',' << curve_kind_name(s.kind) << '\n';
}

}  // namespace mdc

#endif  // MDCORNER_MOTION_MODEL_HPP
