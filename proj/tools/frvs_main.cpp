// frvs: full-resolution view synthesis pipeline.
// Subcommands: gen-data, train, synth, grid, refocus, gradcheck.
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 verification failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>

#include "frvs/blas.hpp"
#include "frvs/checkpoint.hpp"
#include "frvs/gradcheck.hpp"
#include "frvs/image_io.hpp"
#include "frvs/metrics.hpp"
#include "frvs/trainer.hpp"

using namespace frvs;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDepthContract =
    "depth is an explicit input: pass --depth <file.pfm> (normalized, 0 = nearest) or a "
    "--lightfield directory containing depth.pfm; it is never estimated internally";

std::string offset_stem(int r, int c) { return std::to_string(r) + "_" + std::to_string(c); }

Tensor load_depth_arg(const std::string& path) {
    auto d = io::load_pfm(path);
    float lo = 1.0f, hi = 0.0f;
    for (float v : d.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    require(lo >= 0.0f && hi <= 1.0f,
            "depth map " + path + " must be normalized to [0,1], got [" + std::to_string(lo) +
                ", " + std::to_string(hi) + "]");
    return d;
}

std::vector<LightField> load_dataset(const std::string& dir) {
    std::vector<LightField> out;
    std::vector<std::string> dirs;
    if (fs::exists(fs::path(dir) / "lf.json"))
        dirs.push_back(dir);
    else
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory() && fs::exists(e.path() / "lf.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_lightfield(d));
    require(!out.empty(), "no light fields (lf.json) found under " + dir);
    return out;
}

// center image + depth, from either a light-field directory or explicit files
ModelInput make_input(const std::string& lf_dir, const std::string& image_path,
                      const std::string& depth_path, ViewpointOffset q) {
    if (!lf_dir.empty()) {
        auto lf = load_lightfield(lf_dir);
        require(lf.has_depth(), "light field " + lf_dir + " has no depth.pfm; " + kDepthContract);
        return {lf.center_view(), lf.center_depth(), q};
    }
    require(!image_path.empty(), "need --image or --lightfield");
    require(!depth_path.empty(), std::string("no depth given; ") + kDepthContract);
    return {io::load_png(image_path), load_depth_arg(depth_path), q};
}

Tensor predict_flow_value(const ModelParams& params, const ModelInput& in) {
    return predict_flow(params, in)->value;
}

int cmd_gen_data(int count, int size, int layers, int grid, unsigned seed,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        auto lf = render_lightfield(random_scene(seed + i, size, size, layers), grid);
        for (const auto& w : lf.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d", i);
        save_lightfield(lf, (fs::path(out_dir) / name).string());
        std::printf("wrote %s/%s\n", out_dir.c_str(), name);
    }
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& variant, const TrainOptions& opts) {
    auto dataset = load_dataset(data_dir);
    std::printf("training variant=%s on %zu light fields, %d iterations, batch %d, lr %g, "
                "alpha %g, seed %u\n",
                variant.c_str(), dataset.size(), opts.optim.iterations, opts.optim.batch_size,
                opts.optim.learning_rate, opts.loss.alpha, opts.optim.seed);
    auto result = train(variant_from_string(variant), dataset, opts);
    if (!result.log.empty())
        std::printf("final loss: l1 %.6f, tv %.6f, total %.6f\n", result.log.back().l1,
                    result.log.back().tv, result.log.back().total);
    if (!opts.checkpoint_path.empty())
        std::printf("checkpoint: %s\n", opts.checkpoint_path.c_str());
    return 0;
}

int cmd_synth(const std::string& ckpt, const std::string& lf_dir, const std::string& image_path,
              const std::string& depth_path, double u, double v, const std::string& out) {
    auto params = load_checkpoint(ckpt);
    auto in = make_input(lf_dir, image_path, depth_path, {u, v});
    auto flow = predict_flow_value(params, in);
    auto view = warp_image(in.image, flow);
    io::save_png(view, out);
    const std::string flo = fs::path(out).replace_extension(".flo").string();
    io::save_flo(flow, flo);
    std::printf("wrote %s and %s (MAE vs input %.6f)\n", out.c_str(), flo.c_str(),
                mae(view, in.image));
    return 0;
}

int cmd_grid(const std::string& ckpt, const std::string& lf_dir, const std::string& image_path,
             const std::string& depth_path, const std::string& out_dir) {
    auto params = load_checkpoint(ckpt);
    fs::create_directories(out_dir);

    LightField lf;
    if (!lf_dir.empty()) {
        lf = load_lightfield(lf_dir);
        require(lf.has_depth(), "light field " + lf_dir + " has no depth.pfm; " + kDepthContract);
    } else {
        // no ground truth: build a degenerate field around the lone input
        require(!image_path.empty(), "need --image or --lightfield");
        require(!depth_path.empty(), std::string("no depth given; ") + kDepthContract);
        lf.grid = 7;
        lf.center_row = lf.center_col = 3;
        lf.views.assign(49, Tensor{});
        lf.views[lf.index(3, 3)] = io::load_png(image_path);
        lf.gt_depths.assign(49, Tensor{});
        lf.gt_depths[lf.index(3, 3)] = load_depth_arg(depth_path);
    }
    const ModelInput center{lf.center_view(), lf.center_depth(), {0.0, 0.0}};

    int written = 0;
    for (int dv = -3; dv <= 3; ++dv)
        for (int du = -3; du <= 3; ++du) {
            ModelInput in = center;
            in.q = {static_cast<double>(du), static_cast<double>(dv)};
            Tensor view = du == 0 && dv == 0 ? center.image
                                             : warp_image(in.image, predict_flow_value(params, in));
            io::save_png(view, (fs::path(out_dir) /
                                ("view_" + offset_stem(dv + 3, du + 3) + ".png"))
                                   .string());
            ++written;
        }
    std::printf("wrote %d views to %s\n", written, out_dir.c_str());

    if (!lf_dir.empty()) {
        auto rec = evaluate_grid(params, lf, out_dir);
        std::printf("mean over 48 views: PSNR %.4f dB, SSIM %.4f, MAE %.6f (metrics.csv, "
                    "heatmaps written)\n",
                    rec.mean_psnr, rec.mean_ssim, rec.mean_mae);
    }
    return 0;
}

int cmd_refocus(const std::string& lf_dir, const std::string& ckpt,
                const std::string& image_path, const std::string& depth_path,
                const std::vector<double>& slopes, const std::string& out_dir) {
    LightField lf;
    if (!lf_dir.empty()) {
        lf = load_lightfield(lf_dir);
    } else {
        // synthesize the light field from one image with a trained model
        require(!ckpt.empty(), "need --lightfield, or --checkpoint with --image and --depth");
        auto params = load_checkpoint(ckpt);
        auto center = make_input("", image_path, depth_path, {0.0, 0.0});
        lf.grid = 7;
        lf.center_row = lf.center_col = 3;
        lf.views.resize(49);
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 7; ++c) {
                ModelInput in = center;
                in.q = lf.offset_of(r, c);
                lf.views[lf.index(r, c)] =
                    in.q.du == 0 && in.q.dv == 0
                        ? center.image
                        : warp_image(center.image, predict_flow_value(params, in));
            }
    }
    fs::create_directories(out_dir);
    for (double s : slopes) {
        char name[48];
        std::snprintf(name, sizeof(name), "refocus_%+.3f.png", s);
        io::save_png(refocus(lf, {s, {}}), (fs::path(out_dir) / name).string());
    }
    std::printf("wrote %zu refocused images to %s\n", slopes.size(), out_dir.c_str());
    return 0;
}

int cmd_gradcheck(int probes, unsigned seed, bool inject_bug) {
    using DNode = NodePtrT<double>;
    bool all_ok = true;

    auto smooth = [](std::vector<int> shape, unsigned s) {
        std::mt19937 rng(s);
        std::uniform_real_distribution<double> ph(0.0, 6.28318530717958647692);
        TensorT<double> t(shape);
        const int C = shape[0], H = shape[1], W = shape[2];
        for (int c = 0; c < C; ++c) {
            double p1 = ph(rng), p2 = ph(rng);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    t.at(c, y, x) = 0.5 + 0.25 * std::sin(0.7 * x + p1) +
                                    0.2 * std::sin(0.9 * y + p2);
        }
        return t;
    };
    auto report_one = [&](const char* what, ParameterStoreT<double>& store,
                          const std::function<DNode()>& build, double epsilon = 1e-4) {
        auto report = gradcheck(store, build, probes, epsilon, 1e-3, seed);
        double worst = report.worst();
        if (inject_bug) worst += 1.0;  // test hook: the harness must flag this
        bool ok = worst < report.tolerance;
        std::printf("%-18s max rel err %.3e %s\n", what, worst, ok ? "ok" : "FAIL");
        if (!ok) all_ok = false;
    };

    {
        ParameterStoreT<double> s;
        TensorT<double> w0({4, 3, 3, 3});
        std::mt19937 rng(1);
        std::uniform_real_distribution<double> d(-0.5, 0.5);
        for (auto& v : w0.data) v = d(rng);
        auto w = s.add("w", std::move(w0));
        auto b = s.add("b", TensorT<double>({4}, {0.1, -0.2, 0.05, 0.0}));
        auto x = s.add("x", smooth({3, 6, 6}, 2));
        report_one("conv2d", s, [&] { return sum(conv2d(x, w, b, 1)); });
    }
    {
        ParameterStoreT<double> s;
        TensorT<double> f0({2, 6, 6});
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> d(-0.9, 0.9);
        for (auto& v : f0.data) v = d(rng) + 0.25;
        auto flow = s.add("flow", std::move(f0));
        auto img = s.add("img", smooth({3, 6, 6}, 4));
        report_one("bilinear_warp", s, [&] { return sum(bilinear_warp(img, flow)); });
        report_one("tv_loss", s, [&] { return tv_loss(flow); });
    }
    for (auto variant : {ModelVariant::full, ModelVariant::no_depth, ModelVariant::encdec}) {
        auto m = init_model<double>(variant, 27);
        ModelInputT<double> in{smooth({3, 8, 8}, 8), smooth({1, 8, 8}, 9), {1.0, -2.0}};
        auto target = smooth({3, 8, 8}, 10);
        report_one(("model " + to_string(variant)).c_str(), m.store,
                   [&] {
                       auto synth = synthesize_with_flow(m, in);
                       auto l1 = mean(abs_op(sub(synth.image, make_const(target))));
                       return add(l1, scale(tv_loss(synth.flow), 0.001));
                   },
                   1e-5);
    }
    if (!all_ok) {
        std::fprintf(stderr, "gradient verification failed\n");
        return 3;
    }
    std::printf("all gradient checks passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    blas_init();
    CLI::App app{"frvs: single-image novel-view synthesis with a full-resolution flow network"};
    app.require_subcommand(1);

    // gen-data
    int gd_count = 1, gd_size = 192, gd_layers = 3, gd_grid = 8;
    unsigned gd_seed = 1;
    std::string gd_out;
    auto* gen = app.add_subcommand("gen-data", "write synthetic light fields with ground truth");
    gen->add_option("--count", gd_count, "number of scenes")->capture_default_str();
    gen->add_option("--size", gd_size, "view height and width")->capture_default_str();
    gen->add_option("--layers", gd_layers, "scene layers")->capture_default_str();
    gen->add_option("--grid", gd_grid, "grid side length")->capture_default_str();
    gen->add_option("--seed", gd_seed, "base RNG seed")->capture_default_str();
    gen->add_option("--out", gd_out, "output directory")->required();

    // train
    std::string tr_data, tr_variant = "full", tr_out, tr_log;
    TrainOptions tr_opts;
    bool tr_resume = false;
    auto* tr = app.add_subcommand("train", "train a flow model on a light-field dataset");
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--variant", tr_variant, "full | no_depth | encdec")->capture_default_str();
    tr->add_option("--iterations", tr_opts.optim.iterations)->capture_default_str();
    tr->add_option("--lr", tr_opts.optim.learning_rate, "Adam learning rate")
        ->capture_default_str();
    tr->add_option("--batch", tr_opts.optim.batch_size)->capture_default_str();
    tr->add_option("--alpha", tr_opts.loss.alpha, "TV weight")->capture_default_str();
    tr->add_option("--seed", tr_opts.optim.seed)->capture_default_str();
    tr->add_option("--crop-h", tr_opts.crop_h, "crop height, 0 disables")->capture_default_str();
    tr->add_option("--crop-w", tr_opts.crop_w, "crop width, 0 disables")->capture_default_str();
    tr->add_option("--max-disp", tr_opts.max_disp, "flow bound in pixels")->capture_default_str();
    tr->add_option("--checkpoint-every", tr_opts.checkpoint_every, "0 = final only")
        ->capture_default_str();
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--log", tr_log, "CSV loss log path");
    tr->add_flag("--resume", tr_resume, "continue from --out and its .state sidecar");

    // synth
    std::string sy_ckpt, sy_lf, sy_image, sy_depth, sy_out;
    double sy_u = 0.0, sy_v = 0.0;
    auto* sy = app.add_subcommand("synth", "synthesize one novel view");
    sy->add_option("--checkpoint", sy_ckpt)->required();
    sy->add_option("--lightfield", sy_lf, "light-field dir (uses its center view + depth)");
    sy->add_option("--image", sy_image, "center view PNG");
    sy->add_option("--depth", sy_depth, "normalized depth PFM, 0 = nearest");
    sy->add_option("-u", sy_u, "horizontal offset in [-3,3]")
        ->required()
        ->check(CLI::Range(-3.0, 3.0));
    sy->add_option("-v", sy_v, "vertical offset in [-3,3]")
        ->required()
        ->check(CLI::Range(-3.0, 3.0));
    sy->add_option("--out", sy_out, "output PNG (a .flo is written beside it)")->required();

    // grid
    std::string gr_ckpt, gr_lf, gr_image, gr_depth, gr_out;
    auto* gr = app.add_subcommand("grid", "synthesize the full 7x7 view grid");
    gr->add_option("--checkpoint", gr_ckpt)->required();
    gr->add_option("--lightfield", gr_lf, "light-field dir (enables metrics + heatmaps)");
    gr->add_option("--image", gr_image, "center view PNG");
    gr->add_option("--depth", gr_depth, "normalized depth PFM");
    gr->add_option("--out", gr_out, "output directory")->required();

    // refocus
    std::string rf_lf, rf_ckpt, rf_image, rf_depth, rf_out;
    std::vector<double> rf_slopes;
    auto* rf = app.add_subcommand("refocus", "shift-and-add refocusing");
    rf->add_option("--lightfield", rf_lf, "light-field dir");
    rf->add_option("--checkpoint", rf_ckpt, "synthesize the field from --image/--depth instead");
    rf->add_option("--image", rf_image);
    rf->add_option("--depth", rf_depth);
    rf->add_option("--slopes", rf_slopes, "focus slopes in pixels per grid step")
        ->required()
        ->delimiter(',');
    rf->add_option("--out", rf_out, "output directory")->required();

    // gradcheck
    int gc_probes = 4;
    unsigned gc_seed = 99;  // probe sites clear of the ReLU/L1/bilinear kinks
    bool gc_bug = false;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gc->add_option("--probes", gc_probes, "probes per parameter")->capture_default_str();
    gc->add_option("--seed", gc_seed, "probe RNG seed")->capture_default_str();
    gc->add_flag("--inject-bug", gc_bug)->group("");  // test hook, hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;  // pin usage errors to exit code 1
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gd_count, gd_size, gd_layers, gd_grid, gd_seed, gd_out);
        if (tr->parsed()) {
            tr_opts.checkpoint_path = tr_out;
            tr_opts.log_csv_path = tr_log;
            tr_opts.resume = tr_resume;
            return cmd_train(tr_data, tr_variant, tr_opts);
        }
        if (sy->parsed()) return cmd_synth(sy_ckpt, sy_lf, sy_image, sy_depth, sy_u, sy_v, sy_out);
        if (gr->parsed()) return cmd_grid(gr_ckpt, gr_lf, gr_image, gr_depth, gr_out);
        if (rf->parsed()) return cmd_refocus(rf_lf, rf_ckpt, rf_image, rf_depth, rf_slopes, rf_out);
        if (gc->parsed()) return cmd_gradcheck(gc_probes, gc_seed, gc_bug);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
