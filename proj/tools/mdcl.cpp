// mdcl: command-line front end for the micro-Doppler corner toolkit.
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <mdcorner/pipeline.hpp>

namespace {

namespace fs = std::filesystem;
using namespace mdc;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> activity;
    bool stage_dump = false;
    std::string map;      // render: single map file
    std::string corners;  // render: overlay CSV for --map
};

PipelineConfig load_config(const Options& o)
{
    PipelineConfig cfg;
    if (!o.config.empty()) {
        std::string text;
        try {
            text = io::read_file(o.config);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        cfg = parse_config(text);
    }
    if (o.out) cfg.run.out = *o.out;
    if (o.seed) cfg.run.seed = *o.seed;
    if (o.activity) cfg.run.activities = detail::parse_activities("--activity", *o.activity);
    if (o.stage_dump) cfg.run.stage_dump = true;
    for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
    return cfg;
}

fs::path activity_path(const PipelineConfig& cfg, int label) { return fs::path(cfg.run.out) / activity_dir(label); }

ProfileMap load_map(const fs::path& dir, const std::string& stem)
{
    return io::decode_map(io::read_file(dir / (stem + ".mdcm")), io::read_file(dir / (stem + ".axis")));
}

EchoFrame load_frame(const PipelineConfig& cfg, const fs::path& dir, std::uint64_t seed)
{
    const auto m = io::decode_mdcm(io::read_file(dir / "echo.mdcm"));
    if (!m.complex) throw io::FormatError("echo.mdcm must hold complex samples");
    EchoFrame f;
    f.data = m.cplx;
    f.radar = cfg.radar_config();
    f.seed = seed;
    if (f.data.rows() != f.radar.slow_samples || f.data.cols() != f.radar.fast_samples)
        throw io::FormatError("echo.mdcm shape disagrees with the radar configuration");
    return f;
}

Profiles load_profiles(const fs::path& dir) { return {load_map(dir, "rtm"), load_map(dir, "dtm")}; }
SquaredMaps load_squared(const fs::path& dir) { return {load_map(dir, "r2tm"), load_map(dir, "d2tm")}; }

Extracted load_corners(const fs::path& dir)
{
    return {io::decode_corners_csv(io::read_file(dir / "pc_r.csv")), io::decode_corners_csv(io::read_file(dir / "pc_d.csv"))};
}

/// Runs one stage for every selected activity; the first failure stops.
int for_each_activity(const PipelineConfig& cfg, const char* stage,
                      const std::function<void(int, const fs::path&, ArtifactSink&)>& fn)
{
    for (int label : cfg.run.activities) {
        ArtifactSink sink(fs::path(cfg.run.out), activity_dir(label));
        try {
            fn(label, activity_path(cfg, label), sink);
        } catch (const std::exception& e) {
            std::cerr << "error: S" << label << ":" << stage << ": " << e.what() << '\n';
            return kExitStage;
        }
        for (const auto& a : sink.entries()) std::cout << a.sha256 << "  " << a.path << '\n';
    }
    return 0;
}

std::uint64_t activity_seed(const PipelineConfig& cfg, int label) { return cfg.run.seed + std::uint64_t(label); }

int cmd_simulate(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "simulate", [&](int label, const fs::path&, ArtifactSink& sink) {
        const ActivitySpec& act = activity(label);
        sink.put("echo.mdcm", io::encode_mdcm(stage_simulate(cfg, act, activity_seed(cfg, label)).data));
        sink.put("keypoints.csv", encode_keypoints(act, cfg.scene));
    });
}

int cmd_preprocess(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "preprocess", [&](int label, const fs::path& dir, ArtifactSink& sink) {
        const Profiles p = stage_preprocess(cfg, load_frame(cfg, dir, activity_seed(cfg, label)));
        sink.put_map("rtm", p.rtm);
        sink.put_map("dtm", p.dtm);
    });
}

int cmd_square(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "square", [&](int, const fs::path& dir, ArtifactSink& sink) {
        const SquaredMaps sq = stage_square(cfg, load_profiles(dir));
        sink.put_map("r2tm", sq.r2tm);
        sink.put_map("d2tm", sq.d2tm);
    });
}

int cmd_extract(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "extract", [&](int, const fs::path& dir, ArtifactSink& sink) {
        const Extracted ex = stage_extract(cfg, load_squared(dir));
        sink.put("pc_r.csv", io::encode_corners_csv(ex.pc_r));
        sink.put("pc_d.csv", io::encode_corners_csv(ex.pc_d));
    });
}

int cmd_fuse(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "fuse", [&](int, const fs::path& dir, ArtifactSink& sink) {
        const Extracted ex = load_corners(dir);
        sink.put("pc_rd.csv", io::encode_cloud_csv(stage_fuse(ex, load_squared(dir)), ex.pc_r.corners.size()));
    });
}

int cmd_evaluate(const PipelineConfig& cfg)
{
    return for_each_activity(cfg, "evaluate", [&](int label, const fs::path& dir, ArtifactSink& sink) {
        const Evaluation ev = stage_evaluate(cfg, activity(label), load_profiles(dir), load_squared(dir),
                                             load_corners(dir), activity_seed(cfg, label));
        sink.put("gt_r.csv", io::encode_corners_csv(ev.gt_r));
        sink.put("gt_d.csv", io::encode_corners_csv(ev.gt_d));
        sink.put("metrics.csv", encode_metrics_csv(ev.metrics));
        for (const auto& m : ev.metrics) std::cerr << m.activity << ' ' << m.metric << ' ' << m.value << '\n';
    });
}

int cmd_mncp(const PipelineConfig& cfg)
{
    const auto reps = mncp_reports(cfg.scene);
    ArtifactSink(fs::path(cfg.run.out)).put("mncp.csv", encode_mncp_csv(reps));
    int bad = 0;
    for (const auto& r : reps) {
        std::printf("%-16s %s %s MNCP=%d rank=%d rel=%.3g %s", curve_family_name(r.family), node_label(r.node),
                    curve_kind_name(r.kind), r.mncp, r.at_mncp.rank, r.at_mncp.validation_rel,
                    r.sufficient_at_mncp ? "sufficient" : "INSUFFICIENT");
        if (r.deficiency_asserted) std::printf(", %d points %s", r.mncp - 1, r.deficient_below ? "deficient" : "NOT deficient");
        std::printf("\n");
        bad += !r.sufficient_at_mncp || (r.deficiency_asserted && !r.deficient_below);
    }
    return bad ? kExitStage : 0;
}

int cmd_sweep(const PipelineConfig& cfg)
{
    std::vector<SweepInput> inputs;
    for (int label : cfg.run.activities) {
        if (label == 1) continue;
        const ActivitySpec& act = activity(label);
        const Profiles maps = stage_preprocess(cfg, stage_simulate(cfg, act, activity_seed(cfg, label)));
        const SquaredMaps sq = stage_square(cfg, maps);
        auto [gr, gd] = groundtruth_corners(act, act.apply(cfg.scene), map_grid(cfg, sq));
        inputs.push_back({label, sq.r2tm.data, sq.d2tm.data, gr, gd});
    }
    std::vector<double> deltas{0.0};
    for (double d : cfg.evaluation.sweep_deltas)
        if (d > 0.0) deltas.push_back(d);
    std::vector<std::vector<SweepRow>> parts(inputs.size());
    parallel_for(int(inputs.size()), worker_count(), [&](int i) {
        parts[std::size_t(i)] = robustness_sweep({inputs[std::size_t(i)]}, deltas, cfg.evaluation.sweep_seeds,
                                                 cfg.run.seed, cfg.detector);
    });
    std::vector<SweepRow> rows;
    for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
    ArtifactSink(fs::path(cfg.run.out)).put("sweep.csv", encode_sweep_csv(rows));
    for (const auto& s : summarize_sweep(rows, deltas))
        std::printf("delta %5.1f dB  mean EMD %.4f  (se %.4f)\n", s.delta_db, s.mean, s.std_error);
    return 0;
}

int cmd_render(const PipelineConfig& cfg, const Options& o)
{
    if (!o.map.empty()) {
        const auto m = io::decode_mdcm(io::read_file(o.map));
        if (m.complex) throw io::FormatError("render needs a real map");
        std::vector<Corner> overlay;
        if (!o.corners.empty()) overlay = io::decode_corners_csv(io::read_file(o.corners)).corners;
        fs::path dst = fs::path(o.map).replace_extension(".pgm");
        io::write_file(dst, io::encode_pgm(m.real, overlay));
        std::cout << dst.string() << '\n';
        return 0;
    }
    return for_each_activity(cfg, "render", [&](int, const fs::path& dir, ArtifactSink& sink) {
        for (const char* stem : {"rtm", "dtm", "r2tm", "d2tm"}) {
            if (!fs::exists(dir / (std::string(stem) + ".mdcm"))) continue;
            std::vector<Corner> overlay;
            const std::string csv = std::string(stem) == "r2tm" ? "pc_r.csv" : std::string(stem) == "d2tm" ? "pc_d.csv" : "";
            if (!csv.empty() && fs::exists(dir / csv)) overlay = io::decode_corners_csv(io::read_file(dir / csv)).corners;
            sink.put(std::string(stem) + ".pgm", io::encode_pgm(load_map(dir, stem).data, overlay));
        }
    });
}

int cmd_run(const PipelineConfig& cfg)
{
    const RunManifest man = run_pipeline(cfg, &std::cerr);
    for (const auto& t : man.timings) std::fprintf(stderr, "%-4s %-10s %8.3f s\n", t.activity.c_str(), t.stage.c_str(), t.seconds);
    std::cout << "manifest: " << (fs::path(cfg.run.out) / kManifestName).string() << " (" << man.artifacts.size()
              << " artifacts, status " << (man.ok ? "ok" : "failed") << ")\n";
    if (!man.ok) {
        std::cerr << "error: " << man.failed_stage << ": " << man.error << '\n';
        return kExitStage;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mdcl: micro-Doppler corner representation toolkit"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sc) {
        sc->add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
        sc->add_option("--out", o.out, "output directory");
        sc->add_option("--seed", o.seed, "global seed");
        sc->add_option("--activity", o.activity, "activities: S8, S2,S5 or all");
        sc->add_flag("--stage-dump", o.stage_dump, "write PGM renders of every map");
    };
    struct Sub {
        const char* name;
        const char* help;
    };
    const std::vector<Sub> subs{
        {"simulate", "synthesize echo frames"},
        {"preprocess", "echo frames to RTM/DTM"},
        {"square", "RTM/DTM to R2TM/D2TM"},
        {"extract", "corner detection on R2TM/D2TM"},
        {"fuse", "PC-R and PC-D to the 60x3 PC-RD cloud"},
        {"evaluate", "corner EMD and PSNR against ground truth"},
        {"mncp-verify", "minimum corner point reconstruction check"},
        {"sweep-noise", "corner EMD under reduced image SNR"},
        {"render", "PGM heatmaps of stored maps"},
        {"run", "all stages with a manifest"},
    };
    std::map<std::string, CLI::App*> cmds;
    for (const auto& s : subs) {
        CLI::App* sc = app.add_subcommand(s.name, s.help);
        common(sc);
        cmds[s.name] = sc;
    }
    cmds["render"]->add_option("--map", o.map, "render one .mdcm map next to itself")->check(CLI::ExistingFile);
    cmds["render"]->add_option("--corners", o.corners, "corner CSV overlaid on --map")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        const PipelineConfig cfg = load_config(o);
        if (cmds["simulate"]->parsed()) return cmd_simulate(cfg);
        if (cmds["preprocess"]->parsed()) return cmd_preprocess(cfg);
        if (cmds["square"]->parsed()) return cmd_square(cfg);
        if (cmds["extract"]->parsed()) return cmd_extract(cfg);
        if (cmds["fuse"]->parsed()) return cmd_fuse(cfg);
        if (cmds["evaluate"]->parsed()) return cmd_evaluate(cfg);
        if (cmds["mncp-verify"]->parsed()) return cmd_mncp(cfg);
        if (cmds["sweep-noise"]->parsed()) return cmd_sweep(cfg);
        if (cmds["render"]->parsed()) return cmd_render(cfg, o);
        if (cmds["run"]->parsed()) return cmd_run(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitConfig;
}
