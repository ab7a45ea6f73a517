#ifndef MDCORNER_PIPELINE_HPP
#define MDCORNER_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "axis_square.hpp"
#include "config.hpp"
#include "corner_extract.hpp"
#include "echo_synth.hpp"
#include "eval_metrics.hpp"
#include "io.hpp"
#include "motion_model.hpp"
#include "preprocess.hpp"

namespace mdc {

inline constexpr const char* kToolVersion = "mdcl 1.0.0";

namespace fs = std::filesystem;

struct ArtifactEntry {
    std::string path;  // relative to the output directory, '/' separated
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct StageTiming {
    std::string activity, stage;
    double seconds = 0.0;
};

/// Timings are kept in memory only so that reruns produce identical
/// manifest files.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    bool ok = true;
    std::string failed_stage;  // "S<n>:<stage>" of the first failure
    std::string error;
    std::vector<ArtifactEntry> artifacts;
    std::vector<StageTiming> timings;

    std::string encode() const
    {
        std::ostringstream os;
        os << "tool_version = " << tool_version << '\n'
           << "config_sha256 = " << config_hash << '\n'
           << "status = " << (ok ? "ok" : "failed") << '\n'
           << "failed_stage = " << failed_stage << '\n'
           << "artifacts = " << artifacts.size() << '\n';
        for (const auto& a : artifacts) os << a.sha256 << "  " << a.bytes << "  " << a.path << '\n';
        return os.str();
    }
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Parses the artifact list of a manifest file.
inline std::vector<ArtifactEntry> read_manifest_artifacts(const std::string& text)
{
    std::vector<ArtifactEntry> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.find(" = ") != std::string::npos || line.empty()) continue;
        std::istringstream ls(line);
        ArtifactEntry e;
        if (ls >> e.sha256 >> e.bytes >> e.path) out.push_back(e);
    }
    return out;
}

/// Writes files under one root and records their digests.
class ArtifactSink {
public:
    explicit ArtifactSink(fs::path root, std::string prefix = "") : root_(std::move(root)), prefix_(std::move(prefix)) {}

    void put(const std::string& name, const std::string& bytes)
    {
        const std::string rel = prefix_.empty() ? name : prefix_ + "/" + name;
        io::write_file(root_ / rel, bytes);
        entries_.push_back({rel, io::sha256_hex(bytes), bytes.size()});
    }

    void put_map(const std::string& stem, const ProfileMap& m)
    {
        put(stem + ".mdcm", io::encode_mdcm(m.data));
        put(stem + ".axis", io::encode_axis(m));
    }

    const std::vector<ArtifactEntry>& entries() const { return entries_; }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::string prefix_;
    std::vector<ArtifactEntry> entries_;
};

struct MetricRow {
    std::string activity, metric;
    double value = 0.0;
    std::uint64_t seed = 0;
};

inline std::string encode_metrics_csv(const std::vector<MetricRow>& rows)
{
    std::string s = "activity,metric,value,seed\n";
    for (const auto& r : rows) s += r.activity + "," + r.metric + "," + io::fmt(r.value) + "," + std::to_string(r.seed) + "\n";
    return s;
}

inline std::string activity_dir(int label) { return "S" + std::to_string(label); }

// ---------------------------------------------------------------------------
// Stages

inline EchoFrame stage_simulate(const PipelineConfig& cfg, const ActivitySpec& act, std::uint64_t seed)
{
    NoiseConfig noise = cfg.noise;
    noise.seed = seed;
    return synth_frame(act.apply(cfg.scene), act, cfg.radar_config(), noise);
}

inline Profiles stage_preprocess(const PipelineConfig& cfg, const EchoFrame& frame)
{
    return preprocess(frame, cfg.preprocess);
}

inline SquaredMaps stage_square(const PipelineConfig& cfg, const Profiles& maps)
{
    return square_profiles(maps.rtm, maps.dtm, cfg.square);
}

struct Extracted {
    CornerSet pc_r, pc_d;
};

inline Extracted stage_extract(const PipelineConfig& cfg, const SquaredMaps& sq)
{
    return {extract_corners(sq.r2tm.data, cfg.detector, "R2TM"), extract_corners(sq.d2tm.data, cfg.detector, "D2TM")};
}

inline PointCloudRD stage_fuse(const Extracted& ex, const SquaredMaps& sq)
{
    return fuse_pc_rd(ex.pc_r, ex.pc_d, sq.r2tm.data, sq.d2tm.data);
}

inline MapGrid map_grid(const PipelineConfig& cfg, const SquaredMaps& sq)
{
    MapGrid g;
    g.range_axis = sq.r2tm.squared;
    g.doppler_axis = sq.d2tm.squared;
    g.cols = sq.r2tm.cols();
    g.time_step = sq.r2tm.time_step;
    g.carrier = cfg.radar.carrier;
    return g;
}

struct Evaluation {
    CornerSet gt_r, gt_d;
    std::vector<MetricRow> metrics;
};

/// Corner fidelity against the analytic corners and PSNR against
/// ground-truth maps drawn from the same trajectories.
inline Evaluation stage_evaluate(const PipelineConfig& cfg, const ActivitySpec& act, const Profiles& maps,
                                 const SquaredMaps& sq, const Extracted& ex, std::uint64_t seed)
{
    Evaluation ev;
    const SceneParams p = act.apply(cfg.scene);
    std::tie(ev.gt_r, ev.gt_d) = groundtruth_corners(act, p, map_grid(cfg, sq));
    const Profiles gt = groundtruth_profiles(act, p, cfg.radar_config(), maps.rtm, maps.dtm, cfg.evaluation.truth);
    const SquaredMaps gsq = square_profiles(gt.rtm, gt.dtm, cfg.square);
    const double er = emd_distance(corner_cloud(ex.pc_r), corner_cloud(ev.gt_r));
    const double ed = emd_distance(corner_cloud(ex.pc_d), corner_cloud(ev.gt_d));
    auto padded = [](const CornerSet& cs) {
        return double(std::count_if(cs.corners.begin(), cs.corners.end(), [](const Corner& c) { return c.padded; }));
    };
    const std::string a = act.id();
    ev.metrics = {
        {a, "emd_r2tm", er, seed},
        {a, "emd_d2tm", ed, seed},
        {a, "emd", 0.5 * (er + ed), seed},
        {a, "psnr_rtm", psnr(maps.rtm.data, gt.rtm.data), seed},
        {a, "psnr_dtm", psnr(maps.dtm.data, gt.dtm.data), seed},
        {a, "psnr_r2tm", psnr(sq.r2tm.data, gsq.r2tm.data), seed},
        {a, "psnr_d2tm", psnr(sq.d2tm.data, gsq.d2tm.data), seed},
        {a, "image_snr_r2tm", image_energy(sq.r2tm.data).snr_db(), seed},
        {a, "image_snr_d2tm", image_energy(sq.d2tm.data).snr_db(), seed},
        {a, "padded_r2tm", padded(ex.pc_r), seed},
        {a, "padded_d2tm", padded(ex.pc_d), seed},
        {a, "gt_clamped_r2tm", double(ev.gt_r.clamped), seed},
        {a, "gt_clamped_d2tm", double(ev.gt_d.clamped), seed},
    };
    return ev;
}

inline std::string encode_keypoints(const ActivitySpec& act, const SceneParams& scene)
{
    std::ostringstream os;
    const SceneParams p = act.apply(scene);
    auto sets = activity_keypoints(act, p, CurveKind::DistanceSq);
    for (auto& s : activity_keypoints(act, p, CurveKind::VelocitySq)) sets.push_back(std::move(s));
    write_keypoints_csv(os, sets);
    return os.str();
}

inline std::string encode_mncp_csv(const std::vector<MncpReport>& reps)
{
    std::string s = "family,node,map,mncp,rank,condition,validation_rms,validation_rel,sufficient,below_rank,"
                    "deficiency_asserted,deficient_below\n";
    for (const auto& r : reps)
        s += std::string(curve_family_name(r.family)) + "," + node_label(r.node) + "," + curve_kind_name(r.kind) + "," +
             std::to_string(r.mncp) + "," + std::to_string(r.at_mncp.rank) + "," + io::fmt(r.at_mncp.condition) + "," +
             io::fmt(r.at_mncp.validation_rms) + "," + io::fmt(r.at_mncp.validation_rel) + "," +
             (r.sufficient_at_mncp ? "1" : "0") + "," + std::to_string(r.below.rank) + "," +
             (r.deficiency_asserted ? "1" : "0") + "," + (r.deficient_below ? "1" : "0") + "\n";
    return s;
}

/// Table III check for the walking and in-situ classes.
inline std::vector<MncpReport> mncp_reports(const SceneParams& scene)
{
    std::vector<MncpReport> out;
    for (ActivityClass c : {ActivityClass::Walking, ActivityClass::InSitu})
        for (const auto& fc : family_cases(c, scene)) out.push_back(verify_mncp(fc.model, fc.curve));
    return out;
}

inline std::string encode_sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string s = "activity,delta_db,seed,emd_r2tm,emd_d2tm,emd\n";
    for (const auto& r : rows)
        s += "S" + std::to_string(r.label) + "," + io::fmt(r.delta_db) + "," + std::to_string(r.seed) + "," +
             io::fmt(r.emd_r) + "," + io::fmt(r.emd_d) + "," + io::fmt(r.emd()) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Orchestration

/// Worker count: min(hardware threads, 4), overridden by MDCL_THREADS.
inline int worker_count()
{
    int n = int(std::min(std::max(std::thread::hardware_concurrency(), 1u), 4u));
    if (const char* env = std::getenv("MDCL_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 256) throw ConfigError("MDCL_THREADS must be an integer in [1, 256]");
        n = int(v);
    }
    return n;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn)
{
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct ActivityRun {
    int label = 0;
    std::uint64_t seed = 0;
    std::vector<ArtifactEntry> files;
    std::vector<StageTiming> timings;
    std::vector<MetricRow> metrics;
    std::string failed_stage, error;
    SweepInput sweep;
};

inline ActivityRun run_activity(const PipelineConfig& cfg, int label, const fs::path& root)
{
    ActivityRun run;
    run.label = label;
    run.seed = cfg.run.seed + std::uint64_t(label);
    const ActivitySpec& act = activity(label);
    ArtifactSink sink(root, activity_dir(label));
    std::string stage;
    auto timed = [&](const char* name, auto&& fn) {
        stage = name;
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        run.timings.push_back(
            {act.id(), name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    try {
        EchoFrame frame;
        Profiles maps;
        SquaredMaps sq;
        Extracted ex;
        PointCloudRD pc;
        timed("simulate", [&] {
            frame = stage_simulate(cfg, act, run.seed);
            sink.put("echo.mdcm", io::encode_mdcm(frame.data));
            sink.put("keypoints.csv", encode_keypoints(act, cfg.scene));
        });
        timed("preprocess", [&] {
            maps = stage_preprocess(cfg, frame);
            sink.put_map("rtm", maps.rtm);
            sink.put_map("dtm", maps.dtm);
        });
        timed("square", [&] {
            sq = stage_square(cfg, maps);
            sink.put_map("r2tm", sq.r2tm);
            sink.put_map("d2tm", sq.d2tm);
        });
        timed("extract", [&] {
            ex = stage_extract(cfg, sq);
            sink.put("pc_r.csv", io::encode_corners_csv(ex.pc_r));
            sink.put("pc_d.csv", io::encode_corners_csv(ex.pc_d));
        });
        timed("fuse", [&] {
            pc = stage_fuse(ex, sq);
            sink.put("pc_rd.csv", io::encode_cloud_csv(pc, ex.pc_r.corners.size()));
        });
        timed("evaluate", [&] {
            Evaluation ev = stage_evaluate(cfg, act, maps, sq, ex, run.seed);
            sink.put("gt_r.csv", io::encode_corners_csv(ev.gt_r));
            sink.put("gt_d.csv", io::encode_corners_csv(ev.gt_d));
            sink.put("metrics.csv", encode_metrics_csv(ev.metrics));
            run.metrics = std::move(ev.metrics);
            run.sweep = {label, sq.r2tm.data, sq.d2tm.data, ev.gt_r, ev.gt_d};
        });
        if (cfg.run.stage_dump)
            timed("render", [&] {
                sink.put("rtm.pgm", io::encode_pgm(maps.rtm.data));
                sink.put("dtm.pgm", io::encode_pgm(maps.dtm.data));
                sink.put("r2tm.pgm", io::encode_pgm(sq.r2tm.data, ex.pc_r.corners));
                sink.put("d2tm.pgm", io::encode_pgm(sq.d2tm.data, ex.pc_d.corners));
            });
    } catch (const std::exception& e) {
        run.failed_stage = act.id() + ":" + stage;
        run.error = e.what();
    }
    run.files = sink.entries();
    return run;
}

inline double metric_of(const std::vector<MetricRow>& rows, const std::string& name)
{
    for (const auto& r : rows)
        if (r.metric == name) return r.value;
    return std::nan("");
}

inline const char* emd_band(double d)
{
    if (d < 0.3) return "good";
    if (d < 0.5) return "similar";
    if (d < 1.0) return "valid";
    return "poor";
}

/// Text report: per-activity corner EMD and PSNR, then the sweep.
inline std::string summary_report(const std::vector<ActivityRun>& runs, const std::vector<SweepSummary>& sweep)
{
    std::ostringstream os;
    char line[256];
    os << "activity  emd_r2tm  emd_d2tm  emd     band     psnr_r2tm  psnr_d2tm\n";
    double acc = 0.0;
    int n = 0;
    for (const auto& r : runs) {
        if (!r.error.empty()) {
            os << "S" << r.label << "  failed at " << r.failed_stage << '\n';
            continue;
        }
        const double e = metric_of(r.metrics, "emd");
        std::snprintf(line, sizeof line, "%-8s  %8.4f  %8.4f  %6.4f  %-7s  %9.2f  %9.2f\n",
                      ("S" + std::to_string(r.label)).c_str(), metric_of(r.metrics, "emd_r2tm"),
                      metric_of(r.metrics, "emd_d2tm"), e, emd_band(e), metric_of(r.metrics, "psnr_r2tm"),
                      metric_of(r.metrics, "psnr_d2tm"));
        os << line;
        if (r.label != 1) acc += e, ++n;
    }
    if (n) {
        std::snprintf(line, sizeof line, "mean over S2..S12 (S1 excluded): %.4f\n", acc / n);
        os << line;
    }
    if (!sweep.empty()) {
        os << "\nnoise sweep (image SNR reduction, S2..S12)\ndelta_db  mean_emd  std_error\n";
        for (const auto& s : sweep) {
            std::snprintf(line, sizeof line, "%8.1f  %8.4f  %9.4f\n", s.delta_db, s.mean, s.std_error);
            os << line;
        }
    }
    return os.str();
}

/// Removes artifacts recorded by a previous run so the directory holds only
/// what this run lists. Refuses directories that mdcl did not create.
inline void prepare_output_dir(const fs::path& out)
{
    if (!fs::exists(out)) {
        fs::create_directories(out);
        return;
    }
    if (!fs::is_directory(out)) throw ConfigError("run.out is not a directory: " + out.string());
    if (fs::is_empty(out)) return;
    const fs::path manifest = out / kManifestName;
    if (!fs::exists(manifest)) throw ConfigError("run.out is not empty and holds no mdcl manifest: " + out.string());
    for (const auto& a : read_manifest_artifacts(io::read_file(manifest))) fs::remove(out / a.path);
    fs::remove(manifest);
    for (int label = 1; label <= 12; ++label) {
        const fs::path d = out / activity_dir(label);
        if (fs::is_directory(d) && fs::is_empty(d)) fs::remove(d);
    }
}

/// simulate -> preprocess -> square -> extract -> fuse -> evaluate for each
/// selected activity, then the optional MNCP check and noise sweep. Throws
/// ConfigError before any work on invalid input; stage failures are
/// recorded in the manifest.
inline RunManifest run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr)
{
    cfg.validate();
    const int threads = worker_count();
    const fs::path root(cfg.run.out);
    prepare_output_dir(root);

    // the stored config names its own directory, so runs into different
    // directories stay byte-identical
    PipelineConfig stored = cfg;
    stored.run.out = ".";
    const std::string config_text = serialize_config(stored);
    RunManifest man;
    man.config_hash = io::sha256_hex(config_text);

    std::vector<int> labels = cfg.run.activities;
    std::sort(labels.begin(), labels.end());
    std::vector<ActivityRun> runs(labels.size());
    parallel_for(int(labels.size()), threads,
                 [&](int i) { runs[std::size_t(i)] = run_activity(cfg, labels[std::size_t(i)], root); });

    ArtifactSink top(root);
    top.put("config.txt", config_text);
    std::vector<MetricRow> all;
    for (const auto& r : runs) {
        man.artifacts.insert(man.artifacts.end(), r.files.begin(), r.files.end());
        man.timings.insert(man.timings.end(), r.timings.begin(), r.timings.end());
        all.insert(all.end(), r.metrics.begin(), r.metrics.end());
        if (!r.error.empty() && man.ok) {
            man.ok = false;
            man.failed_stage = r.failed_stage;
            man.error = r.error;
        }
        if (!r.error.empty() && log) *log << "error: " << r.failed_stage << ": " << r.error << '\n';
    }
    top.put("metrics.csv", encode_metrics_csv(all));

    if (cfg.evaluation.mncp) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            top.put("mncp.csv", encode_mncp_csv(mncp_reports(cfg.scene)));
        } catch (const std::exception& e) {
            if (man.ok) man.ok = false, man.failed_stage = "mncp", man.error = e.what();
        }
        man.timings.push_back({"all", "mncp", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }

    std::vector<SweepSummary> summary;
    if (cfg.evaluation.sweep) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<const ActivityRun*> eligible;
        for (const auto& r : runs)
            if (r.error.empty() && r.label != 1) eligible.push_back(&r);
        std::vector<double> deltas{0.0};
        for (double d : cfg.evaluation.sweep_deltas)
            if (d > 0.0) deltas.push_back(d);
        std::vector<std::vector<SweepRow>> parts(eligible.size());
        parallel_for(int(eligible.size()), threads, [&](int i) {
            parts[std::size_t(i)] = robustness_sweep({eligible[std::size_t(i)]->sweep}, deltas,
                                                     cfg.evaluation.sweep_seeds, cfg.run.seed, cfg.detector);
        });
        std::vector<SweepRow> rows;
        for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
        summary = summarize_sweep(rows, deltas);
        top.put("sweep.csv", encode_sweep_csv(rows));
        man.timings.push_back({"all", "sweep", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }
    top.put("summary.txt", summary_report(runs, summary));

    man.artifacts.insert(man.artifacts.end(), top.entries().begin(), top.entries().end());
    std::sort(man.artifacts.begin(), man.artifacts.end(),
              [](const ArtifactEntry& a, const ArtifactEntry& b) { return a.path < b.path; });
    io::write_file(root / kManifestName, man.encode());
    return man;
}

}  // namespace mdc

#endif  // MDCORNER_PIPELINE_HPP
