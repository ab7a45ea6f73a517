#ifndef MDCORNER_CONFIG_HPP
#define MDCORNER_CONFIG_HPP

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "axis_square.hpp"
#include "corner_extract.hpp"
#include "echo_synth.hpp"
#include "eval_metrics.hpp"
#include "motion_model.hpp"
#include "preprocess.hpp"

namespace mdc {

/// Invalid or unparsable configuration; the message names the field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EvaluationConfig {
    GroundTruthConfig truth;
    bool mncp = true;  // include the reconstruction check in `run`
    bool sweep = false;
    std::vector<double> sweep_deltas{4.0, 8.0, 12.0};
    int sweep_seeds = 10;
};

struct RunConfig {
    std::string out = "mdcl-out";
    std::uint64_t seed = 42;
    std::vector<int> activities{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    bool stage_dump = false;
};

struct PipelineConfig {
    SceneParams scene;
    RadarConfig radar;
    NoiseConfig noise;
    PreprocessConfig preprocess;
    SquareConfig square;
    DetectorConfig detector;
    EvaluationConfig evaluation;
    RunConfig run;

    /// Radar settings with the observation window taken from the scene.
    RadarConfig radar_config() const
    {
        RadarConfig r = radar;
        r.window = scene.window;
        return r;
    }

    /// Throws ConfigError naming the first bad field; returns warnings.
    std::vector<std::string> validate() const
    {
        try {
            auto warn = scene.validate();
            radar_config().validate();
            preprocess.validate();
            square.validate();
            detector.validate();
            for (double d : evaluation.sweep_deltas)
                if (!(d >= 0.0)) throw std::invalid_argument("evaluation.sweep_deltas must be >= 0");
            if (evaluation.sweep_seeds < 1) throw std::invalid_argument("evaluation.sweep_seeds must be >= 1");
            if (!(evaluation.truth.range_width > 0.0)) throw std::invalid_argument("evaluation.range_width must be > 0");
            if (!(evaluation.truth.doppler_width > 0.0))
                throw std::invalid_argument("evaluation.doppler_width must be > 0");
            if (run.out.empty()) throw std::invalid_argument("run.out must not be empty");
            if (run.activities.empty()) throw std::invalid_argument("run.activities must not be empty");
            std::set<int> seen;
            for (int a : run.activities) {
                if (a < 1 || a > 12) throw std::invalid_argument("run.activities must lie in S1..S12");
                if (!seen.insert(a).second) throw std::invalid_argument("run.activities lists S" + std::to_string(a) + " twice");
            }
            if (const double top = preprocess.max_range; top > radar_config().range_resolution() * radar.fast_samples)
                warn.push_back("preprocess.max_range exceeds the unambiguous range");
            return warn;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string fmt_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& v)
{
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

inline long long parse_integer(const std::string& key, const std::string& v)
{
    errno = 0;
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    if (v.empty()) return out;
    for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
    return out;
}

inline std::string join_doubles(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
    return s;
}

/// Activity list: "all" or comma-separated S-labels.
inline std::vector<int> parse_activities(const std::string& key, const std::string& v)
{
    if (v == "all") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<int> out;
    for (const auto& s : split_list(v)) {
        if (s.size() < 2 || (s[0] != 'S' && s[0] != 's')) throw ConfigError(key + ": bad activity '" + s + "'");
        out.push_back(int(parse_integer(key, s.substr(1))));
    }
    return out;
}

inline std::string join_activities(const std::vector<int>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", S" : "S") + std::to_string(v[i]);
    return s;
}

struct Field {
    std::string section, key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

inline Field num(const char* sec, const char* key, double& x)
{
    const std::string k = std::string(sec) + "." + key;
    return {sec, key, [&x] { return fmt_double(x); }, [&x, k](const std::string& v) { x = parse_double(k, v); }};
}

inline Field integer(const char* sec, const char* key, int& x)
{
    const std::string k = std::string(sec) + "." + key;
    return {sec, key, [&x] { return std::to_string(x); }, [&x, k](const std::string& v) {
                const long long y = parse_integer(k, v);
                if (y < INT32_MIN || y > INT32_MAX) throw ConfigError(k + ": out of range");
                x = int(y);
            }};
}

inline Field flag(const char* sec, const char* key, bool& x)
{
    const std::string k = std::string(sec) + "." + key;
    return {sec, key, [&x] { return std::string(x ? "true" : "false"); },
            [&x, k](const std::string& v) { x = parse_bool(k, v); }};
}

inline Field seed(const char* sec, const char* key, std::uint64_t& x)
{
    const std::string k = std::string(sec) + "." + key;
    return {sec, key, [&x] { return std::to_string(x); }, [&x, k](const std::string& v) {
                errno = 0;
                char* end = nullptr;
                const unsigned long long y = std::strtoull(v.c_str(), &end, 10);
                if (v.empty() || v[0] == '-' || end != v.c_str() + v.size() || errno == ERANGE)
                    throw ConfigError(k + ": expected a non-negative integer, got '" + v + "'");
                x = y;
            }};
}

/// Field table in serialization order. The references bind to `c`.
inline std::vector<Field> fields(PipelineConfig& c)
{
    auto& s = c.scene;
    auto& r = c.radar;
    auto& p = c.preprocess;
    auto& e = c.evaluation;
    std::vector<Field> f{
        num("scene", "radar_height", s.radar_height),
        num("scene", "x1", s.x1),
        num("scene", "y1", s.y1),
        num("scene", "torso_upper", s.torso_upper),
        num("scene", "torso_lower", s.torso_lower),
        num("scene", "arm_length", s.arm_length),
        num("scene", "leg_length", s.leg_length),
        num("scene", "v1x", s.v1x),
        num("scene", "v1y", s.v1y),
        num("scene", "undulation", s.undulation),
        num("scene", "gait_frequency", s.gait_frequency),
        num("scene", "arm_max_angle", s.arm_max_angle),
        num("scene", "leg_max_angle", s.leg_max_angle),
        num("scene", "in_situ_drop", s.in_situ_drop),
        num("scene", "in_situ_quarter", s.in_situ_quarter),
        num("scene", "window", s.window),
        num("scene", "wall_thickness", s.wall.thickness),
        num("scene", "wall_permittivity", s.wall.permittivity),
        num("scene", "wall_standoff", s.wall.standoff),
        flag("scene", "through_wall", s.through_wall),
        flag("scene", "exact_undulation", s.exact_undulation),

        num("radar", "carrier", r.carrier),
        num("radar", "bandwidth", r.bandwidth),
        integer("radar", "slow_samples", r.slow_samples),
        integer("radar", "fast_samples", r.fast_samples),
        num("radar", "tx_amplitude", r.tx_amplitude),
        {"radar", "reflectivity",
         [&r] { return join_doubles(std::vector<double>(r.reflectivity.begin(), r.reflectivity.end())); },
         [&r](const std::string& v) {
             const auto xs = parse_doubles("radar.reflectivity", v);
             if (xs.size() != r.reflectivity.size())
                 throw ConfigError("radar.reflectivity: expected 6 values (N1..N6)");
             std::copy(xs.begin(), xs.end(), r.reflectivity.begin());
         }},
        num("radar", "wall_reflectivity", r.wall_reflectivity),

        flag("noise", "enabled", c.noise.enabled),
        num("noise", "target_snr_db", c.noise.target_snr_db),

        {"preprocess", "range_window",
         [&p] { return std::string(p.range_window == WindowKind::Hann ? "hann" : "rectangular"); },
         [&p](const std::string& v) {
             if (v == "hann") p.range_window = WindowKind::Hann;
             else if (v == "rectangular") p.range_window = WindowKind::Rectangular;
             else throw ConfigError("preprocess.range_window: expected hann or rectangular");
         }},
        integer("preprocess", "zero_pad", p.zero_pad),
        num("preprocess", "max_range", p.max_range),
        flag("preprocess", "mti", p.mti),
        flag("preprocess", "emd_rtm", p.emd_rtm),
        flag("preprocess", "emd_dtm", p.emd_dtm),
        flag("preprocess", "coherent_sum", p.coherent_sum),
        integer("preprocess", "stft_window", p.stft_window),
        integer("preprocess", "stft_hop", p.stft_hop),
        integer("preprocess", "stft_nfft", p.stft_nfft),
        num("preprocess", "doppler_max", p.doppler_max),
        num("preprocess", "emd_sd", p.emd_sd),
        integer("preprocess", "emd_max_sift", p.emd_max_sift),
        integer("preprocess", "emd_max_imfs", p.emd_max_imfs),

        integer("square", "range_rows", c.square.range_rows),
        integer("square", "doppler_rows", c.square.doppler_rows),
        integer("square", "render_rows", c.square.render_rows),

        integer("detector", "orientations", c.detector.orientations),
        num("detector", "sigma", c.detector.sigma),
        num("detector", "anisotropy", c.detector.anisotropy),
        num("detector", "nms_radius", c.detector.nms_radius),
        integer("detector", "count", c.detector.count),
        num("detector", "gain_floor", c.detector.gain_floor),

        num("evaluation", "range_width", e.truth.range_width),
        num("evaluation", "doppler_width", e.truth.doppler_width),
        flag("evaluation", "mncp", e.mncp),
        flag("evaluation", "sweep", e.sweep),
        {"evaluation", "sweep_deltas", [&e] { return join_doubles(e.sweep_deltas); },
         [&e](const std::string& v) { e.sweep_deltas = parse_doubles("evaluation.sweep_deltas", v); }},
        integer("evaluation", "sweep_seeds", e.sweep_seeds),

        {"run", "out", [&c] { return c.run.out; }, [&c](const std::string& v) { c.run.out = v; }},
        seed("run", "seed", c.run.seed),
        {"run", "activities", [&c] { return join_activities(c.run.activities); },
         [&c](const std::string& v) { c.run.activities = parse_activities("run.activities", v); }},
        flag("run", "stage_dump", c.run.stage_dump),
    };
    return f;
}

}  // namespace detail

/// Parses the line-oriented format: "[section]" headers, "key = value"
/// pairs, '#' comments. Keys absent from the text keep their defaults.
/// Does not validate ranges; call validate().
inline PipelineConfig parse_config(const std::string& text)
{
    PipelineConfig c;
    auto table = detail::fields(c);
    std::map<std::string, detail::Field*> index;
    std::set<std::string> sections;
    for (auto& f : table) {
        index[f.section + "." + f.key] = &f;
        sections.insert(f.section);
    }
    auto trim = [](const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::istringstream is(text);
    std::string line, section;
    std::set<std::string> assigned;
    for (int no = 1; std::getline(is, line); ++no) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        if (section.empty()) throw ConfigError(where + "key outside a section");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const auto it = index.find(key);
        if (it == index.end()) throw ConfigError(where + "unknown key " + key);
        if (!assigned.insert(key).second) throw ConfigError(where + key + " set twice");
        it->second->set(trim(line.substr(eq + 1)));
    }
    return c;
}

/// Canonical text; parse_config(serialize_config(c)) reproduces c exactly.
inline std::string serialize_config(const PipelineConfig& cfg)
{
    PipelineConfig c = cfg;
    std::string out, section;
    for (const auto& f : detail::fields(c)) {
        if (f.section != section) {
            out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
            section = f.section;
        }
        out += f.key + " = " + f.get() + "\n";
    }
    return out;
}

}  // namespace mdc

#endif  // MDCORNER_CONFIG_HPP
