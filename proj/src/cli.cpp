#include "msfum/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "msfum/bench.hpp"
#include "msfum/config.hpp"
#include "msfum/dataset_io.hpp"
#include "msfum/gradcheck_suite.hpp"
#include "msfum/synth.hpp"
#include "msfum/train.hpp"
#include "msfum/version.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace msfum {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string config_path;
    std::string ablation;  // comma list of enabled components
    int64_t threads = 0;
    bool seed_set = false;
    uint64_t seed = 0;
    bool scale_set = false;
    int64_t scale = 0;
    bool base_channels_set = false;
    int64_t base_channels = 0;
    std::string degrade_method;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key=value config file with dotted paths");
    cmd->add_option("--threads", f.threads, "worker thread cap (0 = library default)");
    cmd->add_option("--seed", f.seed, "run seed")->each([&f](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--scale", f.scale, "scale factor 4/8/16")->each([&f](const std::string&) {
        f.scale_set = true;
    });
    cmd->add_option("--base-channels", f.base_channels, "first-level width")
        ->each([&f](const std::string&) { f.base_channels_set = true; });
    cmd->add_option("--ablation", f.ablation,
                    "comma list of enabled components out of guidance,rdcb,mamba");
    cmd->add_option("--degrade", f.degrade_method, "bicubic|nearest");
}

// file config first, flags override
RunConfig effective_config(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = RunConfig::from_file(f.config_path);
    if (f.scale_set) cfg.set("net.scale", std::to_string(f.scale));
    if (f.base_channels_set) cfg.set("net.base_channels", std::to_string(f.base_channels));
    if (f.seed_set) cfg.set("train.seed", std::to_string(f.seed));
    if (!f.degrade_method.empty()) cfg.set("data.degrade", f.degrade_method);
    if (f.threads > 0) cfg.set("run.threads", std::to_string(f.threads));
    if (!f.ablation.empty()) {
        bool g = false, r = false, m = false;
        std::stringstream ss(f.ablation);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "guidance") {
                g = true;
            } else if (item == "rdcb") {
                r = true;
            } else if (item == "mamba") {
                m = true;
            } else if (item == "none") {
                // baseline: everything off
            } else {
                throw std::runtime_error("unknown ablation component '" + item + "'");
            }
        }
        cfg.set("net.ablation.guidance", g ? "true" : "false");
        cfg.set("net.ablation.rdcb", r ? "true" : "false");
        cfg.set("net.ablation.mamba", m ? "true" : "false");
    }
    if (cfg.has("run.threads")) {
#ifdef _OPENMP
        omp_set_num_threads(static_cast<int>(cfg.get_int("run.threads", 1)));
#endif
    }
    return cfg;
}

void write_run_dir(const std::string& dir, const RunConfig& cfg, uint64_t seed) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "run_config.txt");
    out << "# msfum " << kVersion << "\n";
    out << "# seed " << seed << "\n";
    out << cfg.to_text();
}

int cmd_make_synth(const std::string& out_dir, const SynthConfig& scfg) {
    Manifest m = write_synth_corpus(scfg, out_dir);
    std::cout << "wrote " << m.entries.size() << " pairs to " << out_dir << " (manifest.tsv, "
              << scfg.size << "x" << scfg.size << ")\n";
    return 0;
}

int cmd_degrade(const CommonFlags& flags, const std::string& in_path,
                const std::string& out_path, double unit_scale) {
    RunConfig cfg = effective_config(flags);
    const int64_t s = cfg.get_int("net.scale", 4);
    DepthMap hr = load_depth(in_path, unit_scale);
    if (hr.h % s != 0 || hr.w % s != 0) {
        const int64_t ch = (hr.h / s) * s, cw = (hr.w / s) * s;
        std::cout << "note: center-cropping " << hr.h << "x" << hr.w << " to " << ch << "x" << cw
                  << " for scale " << s << "\n";
        DepthMap cropped;
        cropped.h = ch;
        cropped.w = cw;
        cropped.unit_scale = hr.unit_scale;
        cropped.values.resize(static_cast<size_t>(ch * cw));
        const int64_t oy = (hr.h - ch) / 2, ox = (hr.w - cw) / 2;
        for (int64_t y = 0; y < ch; ++y) {
            for (int64_t x = 0; x < cw; ++x) {
                cropped.values[static_cast<size_t>(y * cw + x)] = hr.at(oy + y, ox + x);
            }
        }
        hr = std::move(cropped);
    }
    DepthMap lr = degrade(hr, s, cfg.degrade_method());
    SaveReport rep = save_depth(lr, out_path);
    if (rep.clamped > 0) {
        std::cout << "warning: " << rep.clamped << " samples clamped to the 16-bit range\n";
    }
    std::cout << "wrote " << lr.h << "x" << lr.w << " LR depth to " << out_path << "\n";
    return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& manifest_path,
              const std::string& out_dir, int64_t epochs, int64_t patch, int64_t batch) {
    RunConfig cfg = effective_config(flags);
    if (epochs >= 0) cfg.set("train.epochs", std::to_string(epochs));
    if (patch > 0) cfg.set("train.patch", std::to_string(patch));
    if (batch > 0) cfg.set("train.batch", std::to_string(batch));
    NetworkConfig ncfg = cfg.network_config();
    TrainConfig tcfg = cfg.train_config();

    Manifest manifest = Manifest::load(manifest_path);
    if (cfg.has("data.unit_scale")) {
        manifest.unit_scale = cfg.get_double("data.unit_scale", manifest.unit_scale);
    }
    Dataset data = Dataset::from_manifest(manifest);
    std::cout << "training on " << data.train.size() << " images, validating on "
              << data.val.size() << "\n";

    write_run_dir(out_dir, cfg, tcfg.seed);
    TrainResult result = train_loop(data, tcfg, ncfg, [](const EpochRecord& r) {
        std::printf("epoch %lld\tlr %.3g\ttrain_loss %.6f\tval_rmse %.4f\n",
                    static_cast<long long>(r.epoch), r.lr, r.train_loss, r.val_rmse);
        std::fflush(stdout);
    });

    {
        std::ofstream hist(fs::path(out_dir) / "history.txt");
        hist << history_to_text(result.history);
    }
    checkpoint_save(result.net, (fs::path(out_dir) / "ckpt.msfu").string());
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::cout << "final epoch " << last.epoch << ": train_loss " << last.train_loss
                  << ", val_rmse " << last.val_rmse << "\n";
    }
    std::cout << "run artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& manifest_path,
             const std::string& ckpt, const std::string& baseline, const std::string& split,
             const std::string& out_path) {
    RunConfig cfg = effective_config(flags);
    Manifest manifest = Manifest::load(manifest_path);
    if (cfg.has("data.unit_scale")) {
        manifest.unit_scale = cfg.get_double("data.unit_scale", manifest.unit_scale);
    }
    const int64_t scale = cfg.get_int("net.scale", 4);

    EvalReport report;
    if (!ckpt.empty() && ckpt != "none") {
        Network<float> net = checkpoint_load(ckpt);
        check(net.config().scale == scale || !cfg.has("net.scale"),
              "eval: checkpoint scale " + std::to_string(net.config().scale) +
                  " conflicts with --scale " + std::to_string(scale));
        report = evaluate_manifest(&net, manifest, net.config().scale, split,
                                   cfg.degrade_method());
    } else {
        check(baseline == "bicubic", "eval: need --ckpt or --baseline bicubic");
        report = evaluate_manifest(nullptr, manifest, scale, split, cfg.degrade_method());
    }
    const std::string text = report.to_text();
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << text;
    }
    return 0;
}

int cmd_infer(const CommonFlags& flags, const std::string& ckpt, const std::string& lr_path,
              const std::string& rgb_path, const std::string& out_path,
              const std::string& gt_path, double unit_scale) {
    (void)effective_config(flags);
    Network<float> net = checkpoint_load(ckpt);
    const int64_t s = net.config().scale;
    DepthMap lr = load_depth(lr_path, unit_scale);
    GuidanceImage rgb = load_rgb(rgb_path);
    if (rgb.h != lr.h * s || rgb.w != lr.w * s) {
        throw std::runtime_error(
            "infer: dimension ratio mismatch, depth " + std::to_string(lr.h) + "x" +
            std::to_string(lr.w) + " vs guidance " + std::to_string(rgb.h) + "x" +
            std::to_string(rgb.w) + " at checkpoint scale " + std::to_string(s));
    }
    SuperResolved sr = net.super_resolve(lr, rgb);
    SaveReport rep = save_depth(sr.pred, out_path);
    if (rep.clamped > 0) {
        std::cout << "warning: " << rep.clamped << " samples clamped to the 16-bit range\n";
    }
    std::cout << "wrote " << sr.pred.h << "x" << sr.pred.w << " prediction to " << out_path
              << "\n";
    if (!gt_path.empty()) {
        DepthMap gt = load_depth(gt_path, unit_scale);
        check(gt.h == sr.pred.h && gt.w == sr.pred.w, "infer: --gt dims do not match output");
        DepthMap err = gt;
        double max_err = 0.0;
        for (size_t i = 0; i < err.values.size(); ++i) {
            err.values[i] = std::abs(sr.pred.values[i] - gt.values[i]);
            max_err = std::max(max_err, err.values[i]);
        }
        err.valid.clear();
        const std::string err_path = out_path + ".err.pgm";
        save_depth(err, err_path);
        std::cout << "error image " << err_path << ", max abs error " << max_err << ", rmse "
                  << rmse(sr.pred, gt) << "\n";
    }
    return 0;
}

int cmd_ablate(const CommonFlags& flags, const std::string& manifest_path,
               const std::string& out_dir, int64_t epochs, int64_t patch, int64_t batch) {
    RunConfig cfg = effective_config(flags);
    if (epochs >= 0) cfg.set("train.epochs", std::to_string(epochs));
    if (patch > 0) cfg.set("train.patch", std::to_string(patch));
    if (batch > 0) cfg.set("train.batch", std::to_string(batch));
    NetworkConfig ncfg = cfg.network_config();
    TrainConfig tcfg = cfg.train_config();

    Manifest manifest = Manifest::load(manifest_path);
    Dataset data = Dataset::from_manifest(manifest);
    write_run_dir(out_dir, cfg, tcfg.seed);

    AblationReport report =
        ablation_run(data, tcfg, ncfg, [](const std::string& label, const EpochRecord& r) {
            std::printf("[%s] epoch %lld\ttrain_loss %.6f\tval_rmse %.4f\n", label.c_str(),
                        static_cast<long long>(r.epoch), r.train_loss, r.val_rmse);
            std::fflush(stdout);
        });
    const std::string text = report.to_text();
    std::cout << text;
    std::ofstream out(fs::path(out_dir) / "ablation.txt");
    out << text;
    return 0;
}

int cmd_bench_scan(const std::string& lengths_csv, int64_t dim, int64_t state, int64_t repeats,
                   uint64_t seed, int64_t chunk) {
    std::vector<int64_t> lengths;
    std::stringstream ss(lengths_csv);
    std::string item;
    while (std::getline(ss, item, ',')) lengths.push_back(std::stoll(item));
    check(!lengths.empty(), "bench-scan: need at least one length");
    auto rows = bench_scan(lengths, dim, state, repeats, seed, chunk);
    std::cout << bench_table(rows);
    return 0;
}

int cmd_gradcheck() {
    auto suite = run_gradcheck_suite();
    bool all_pass = true;
    for (const auto& e : suite) {
        all_pass = all_pass && e.report.pass;
        std::printf("[%s] %-22s max_rel_err %.3e (tol %.0e, %lld coords)\n",
                    e.report.pass ? "PASS" : "FAIL", e.name.c_str(), e.report.max_rel_err, e.tol,
                    static_cast<long long>(e.report.checked));
        if (!e.report.pass) std::printf("       worst: %s\n", e.report.worst.c_str());
    }
    return all_pass ? 0 : 1;
}

int cmd_param_count(const CommonFlags& flags) {
    RunConfig cfg = effective_config(flags);
    auto print_one = [&](int64_t scale) {
        NetworkConfig ncfg = cfg.network_config();
        ncfg.scale = scale;
        const int64_t total = param_count(ncfg);
        std::printf("scale x%lld: %lld parameters (%.3f M)\n", static_cast<long long>(scale),
                    static_cast<long long>(total), static_cast<double>(total) / 1e6);
        for (const auto& [section, count] : param_count_by_section(ncfg)) {
            std::printf("  %-8s %lld\n", section.c_str(), static_cast<long long>(count));
        }
    };
    if (flags.scale_set || cfg.has("net.scale")) {
        print_one(cfg.get_int("net.scale", 4));
    } else {
        for (int64_t s : {4, 8, 16}) print_one(s);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"msfum: guided depth super-resolution with state-space fusion blocks"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // make-synth
    auto* synth = app.add_subcommand("make-synth", "generate the synthetic RGB-D corpus");
    std::string synth_out = "synth";
    SynthConfig scfg;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--count", scfg.count, "number of image pairs");
    synth->add_option("--size", scfg.size, "HR image side");
    synth->add_option("--seed", scfg.seed, "generator seed");
    synth->add_option("--train-frac", scfg.train_fraction, "fraction tagged train");

    // degrade
    auto* deg = app.add_subcommand("degrade", "downsample an HR depth map");
    CommonFlags deg_flags;
    std::string deg_in, deg_out;
    double deg_unit = 1.0;
    add_common(deg, deg_flags);
    deg->add_option("--in", deg_in, "HR depth (PGM)")->required();
    deg->add_option("--out", deg_out, "LR output path")->required();
    deg->add_option("--unit-scale", deg_unit, "stored-value to unit factor");

    // train
    auto* train = app.add_subcommand("train", "train a network on a manifest");
    CommonFlags train_flags;
    std::string train_manifest, train_out;
    int64_t train_epochs = -1, train_patch = 0, train_batch = 0;
    add_common(train, train_flags);
    train->add_option("--manifest", train_manifest, "dataset manifest")->required();
    train->add_option("--out", train_out, "run directory")->required();
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--patch", train_patch, "HR patch size");
    train->add_option("--batch", train_batch, "batch size");

    // eval
    auto* eval = app.add_subcommand("eval", "per-image and mean RMSE over a manifest");
    CommonFlags eval_flags;
    std::string eval_manifest, eval_ckpt, eval_baseline, eval_split = "val", eval_out;
    add_common(eval, eval_flags);
    eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path, or 'none'");
    eval->add_option("--baseline", eval_baseline, "bicubic");
    eval->add_option("--split", eval_split, "split tag filter (default val; '' = all)");
    eval->add_option("--out", eval_out, "also write the table here");

    // infer
    auto* infer = app.add_subcommand("infer", "super-resolve one LR depth map");
    CommonFlags infer_flags;
    std::string infer_ckpt, infer_lr, infer_rgb, infer_out, infer_gt;
    double infer_unit = 1.0;
    add_common(infer, infer_flags);
    infer->add_option("--ckpt", infer_ckpt, "checkpoint")->required();
    infer->add_option("--lr-depth", infer_lr, "LR depth (PGM)")->required();
    infer->add_option("--rgb", infer_rgb, "HR guidance (PPM)")->required();
    infer->add_option("--out", infer_out, "output depth path")->required();
    infer->add_option("--gt", infer_gt, "optional HR ground truth for an error image");
    infer->add_option("--unit-scale", infer_unit, "stored-value to unit factor");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train/evaluate the five-config switch matrix");
    CommonFlags ablate_flags;
    std::string ablate_manifest, ablate_out;
    int64_t ablate_epochs = -1, ablate_patch = 0, ablate_batch = 0;
    add_common(ablate, ablate_flags);
    ablate->add_option("--manifest", ablate_manifest, "dataset manifest")->required();
    ablate->add_option("--out", ablate_out, "run directory")->required();
    ablate->add_option("--epochs", ablate_epochs, "epochs per configuration");
    ablate->add_option("--patch", ablate_patch, "HR patch size");
    ablate->add_option("--batch", ablate_batch, "batch size");

    // bench-scan
    auto* bench = app.add_subcommand("bench-scan", "time the scan kernel across lengths");
    std::string bench_lengths = "1024,2048,4096,8192";
    int64_t bench_dim = 16, bench_state = 16, bench_repeats = 5, bench_chunk = 64;
    uint64_t bench_seed = 7;
    bench->add_option("--lengths", bench_lengths, "comma list of sequence lengths");
    bench->add_option("--dim", bench_dim, "channel count");
    bench->add_option("--state", bench_state, "state size");
    bench->add_option("--repeats", bench_repeats, "timed repetitions per length");
    bench->add_option("--seed", bench_seed, "input seed");
    bench->add_option("--chunk", bench_chunk, "chunk length");

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference check of every primitive and block");

    // param-count
    auto* pc = app.add_subcommand("param-count", "parameter totals per scale");
    CommonFlags pc_flags;
    add_common(pc, pc_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_make_synth(synth_out, scfg);
        if (deg->parsed()) return cmd_degrade(deg_flags, deg_in, deg_out, deg_unit);
        if (train->parsed()) {
            return cmd_train(train_flags, train_manifest, train_out, train_epochs, train_patch,
                             train_batch);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_flags, eval_manifest, eval_ckpt, eval_baseline, eval_split,
                            eval_out);
        }
        if (infer->parsed()) {
            return cmd_infer(infer_flags, infer_ckpt, infer_lr, infer_rgb, infer_out, infer_gt,
                             infer_unit);
        }
        if (ablate->parsed()) {
            return cmd_ablate(ablate_flags, ablate_manifest, ablate_out, ablate_epochs,
                              ablate_patch, ablate_batch);
        }
        if (bench->parsed()) {
            return cmd_bench_scan(bench_lengths, bench_dim, bench_state, bench_repeats,
                                  bench_seed, bench_chunk);
        }
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
        if (pc->parsed()) return cmd_param_count(pc_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no command\n";
    return 2;
}

}  // namespace msfum
