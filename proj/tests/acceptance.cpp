// Acceptance suite. One criterion per --only flag, one PASS/FAIL line per
// criterion, all thresholds pinned here. Training criteria cache their
// checkpoints under ./acceptance_cache so reruns only redo the evaluation.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "frvs/blas.hpp"
#include "frvs/checkpoint.hpp"
#include "frvs/gradcheck.hpp"
#include "frvs/lightfield.hpp"
#include "frvs/metrics.hpp"
#include "frvs/trainer.hpp"

using namespace frvs;
namespace fs = std::filesystem;

namespace {

const char* kCacheDir = "acceptance_cache";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
TensorT<T> smooth_image(std::vector<int> shape, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ph(0.0, 6.28318530717958647692);
    TensorT<T> t(shape);
    const int C = shape[0], H = shape[1], W = shape[2];
    for (int c = 0; c < C; ++c) {
        double p1 = ph(rng), p2 = ph(rng);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                t.at(c, y, x) = static_cast<T>(0.5 + 0.25 * std::sin(0.7 * x + p1) +
                                               0.2 * std::sin(0.9 * y + p2));
    }
    return t;
}

Tensor noise_image(std::vector<int> shape, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    Tensor t(shape);
    for (auto& v : t.data) v = d(rng);
    return t;
}

bool files_equal(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

// ---------------------------------------------------------------- gradients

using DNode = NodePtrT<double>;

double run_check(const char* what, ParameterStoreT<double>& store,
                 const std::function<DNode()>& build, bool& ok, int probes = 4,
                 double epsilon = 1e-4) {
    auto report = gradcheck(store, build, probes, epsilon);
    if (!report.passed()) {
        std::printf("  gradcheck %s FAILED, worst rel err %.3e\n", what, report.worst());
        for (const auto& e : report.entries)
            if (e.max_rel_err >= report.tolerance)
                std::printf("    %s rel err %.3e\n", e.name.c_str(), e.max_rel_err);
        ok = false;
    }
    return report.worst();
}

DNode model_loss(const ModelParamsT<double>& m, const ModelInputT<double>& in,
                 const TensorT<double>& target) {
    auto synth = synthesize_with_flow(m, in);
    auto l1 = mean(abs_op(sub(synth.image, make_const(target))));
    return add(l1, scale(tv_loss(synth.flow), 0.001));
}

bool criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = 0.0;

    {
        ParameterStoreT<double> s;
        TensorT<double> w0({4, 3, 3, 3});
        std::mt19937 wrng(1);
        std::uniform_real_distribution<double> wd(-0.5, 0.5);
        for (auto& v : w0.data) v = wd(wrng);
        auto w = s.add("w", std::move(w0));
        auto b = s.add("b", TensorT<double>({4}, {0.1, -0.2, 0.05, 0.0}));
        auto x = s.add("x", smooth_image<double>({3, 6, 6}, 2));
        worst = std::max(worst, run_check("conv2d", s, [&] {
            return sum(conv2d(x, w, b, 1));
        }, ok));
        worst = std::max(worst, run_check("conv2d stride 2", s, [&] {
            return sum(conv2d(x, w, b, 1, 2));
        }, ok));
        worst = std::max(worst, run_check("relu/tanh/concat/upsample", s, [&] {
            auto y = concat_channels<double>({relu(conv2d(x, w, b, 1)), tanh_op(x)});
            return sum(upsample_nn2x(y));
        }, ok));
    }
    {
        ParameterStoreT<double> s;
        TensorT<double> f0({2, 6, 6});
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> d(-0.9, 0.9);
        for (auto& v : f0.data) v = d(rng) + 0.25;  // fractional, away from clamps
        auto flow = s.add("flow", std::move(f0));
        auto img = s.add("img", smooth_image<double>({3, 6, 6}, 4));
        worst = std::max(worst, run_check("bilinear_warp", s, [&] {
            return sum(bilinear_warp(img, flow));
        }, ok));
        worst = std::max(worst, run_check("tv_loss", s, [&] { return tv_loss(flow); }, ok));
        auto target = smooth_image<double>({3, 6, 6}, 5);
        worst = std::max(worst, run_check("l1+tv loss", s, [&] {
            auto l1 = mean(abs_op(sub(bilinear_warp(img, flow), make_const(target))));
            return add(l1, scale(tv_loss(flow), 0.001));
        }, ok));
    }
    for (auto variant : {ModelVariant::full, ModelVariant::no_depth, ModelVariant::encdec}) {
        auto m = init_model<double>(variant, 27);
        ModelInputT<double> in{smooth_image<double>({3, 8, 8}, 8),
                               smooth_image<double>({1, 8, 8}, 9), {1.0, -2.0}};
        auto target = smooth_image<double>({3, 8, 8}, 10);
        // tight step: the L1/ReLU/bilinear kinks must not fall inside the stencil
        worst = std::max(worst, run_check(("model " + to_string(variant)).c_str(), m.store,
                                          [&] { return model_loss(m, in, target); }, ok, 2, 1e-5));
    }

    const double secs = seconds_since(t0);
    if (secs >= 120.0) ok = false;
    std::printf("%s gradients: worst rel err %.3e (tol 1e-3), %.1f s (limit 120)\n",
                ok ? "PASS" : "FAIL", worst, secs);
    return ok;
}

// ------------------------------------------------------------- warp oracles

bool criterion_warp_oracles() {
    bool ok = true;
    const int H = 9, W = 11;
    auto img = noise_image({3, H, W}, 21);

    // zero flow: bitwise identity
    {
        auto out = warp_image(img, Tensor::zeros({2, H, W}));
        if (std::memcmp(out.data.data(), img.data.data(), img.numel() * sizeof(float)) != 0) {
            std::printf("  zero-flow warp is not bitwise identical\n");
            ok = false;
        }
    }
    // integer flow: direct index-shift oracle with edge clamping
    for (auto [fx, fy] : {std::pair{2, 0}, {0, -3}, {-1, 2}, {4, 4}}) {
        Tensor flow({2, H, W});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                flow.at(0, y, x) = static_cast<float>(fx);
                flow.at(1, y, x) = static_cast<float>(fy);
            }
        auto out = warp_image(img, flow);
        for (int c = 0; c < 3 && ok; ++c)
            for (int y = 0; y < H && ok; ++y)
                for (int x = 0; x < W && ok; ++x) {
                    int sx = std::clamp(x + fx, 0, W - 1);
                    int sy = std::clamp(y + fy, 0, H - 1);
                    if (out.at(c, y, x) != img.at(c, sy, sx)) {
                        std::printf("  integer flow (%d,%d) mismatch at (%d,%d,%d)\n", fx, fy, c,
                                    y, x);
                        ok = false;
                    }
                }
    }
    // half-pixel flow on a linear ramp: closed form
    {
        TensorT<double> ramp({1, H, W});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) ramp.at(0, y, x) = 0.03 * x + 0.05 * y + 0.1;
        TensorT<double> flow({2, H, W});
        for (std::size_t i = 0; i < flow.numel() / 2; ++i) flow.data[i] = 0.5;
        for (std::size_t i = flow.numel() / 2; i < flow.numel(); ++i) flow.data[i] = -0.5;
        auto out = warp_image(ramp, flow);
        double worst = 0.0;
        for (int y = 1; y < H - 1; ++y)  // interior: no clamping
            for (int x = 0; x < W - 1; ++x) {
                double expect = 0.03 * (x + 0.5) + 0.05 * (y - 0.5) + 0.1;
                worst = std::max(worst, std::abs(out.at(0, y, x) - expect));
            }
        if (worst >= 1e-6) {
            std::printf("  ramp half-pixel worst err %.3e\n", worst);
            ok = false;
        }
    }
    std::printf("%s warp_oracles\n", ok ? "PASS" : "FAIL");
    return ok;
}

// ----------------------------------------------------------------- geometry

bool criterion_geometry() {
    bool ok = true;

    // single plane: depth -> disparity -> flow -> warp reproduces each view
    {
        auto scene = random_scene(31, 32, 32, 1);
        auto lf = render_lightfield(scene, 8);
        Tensor depth = Tensor::full({1, 32, 32}, static_cast<float>(scene.layers[0].depth));
        auto disparity = depth_to_disparity(depth, scene.camera);
        double worst = 0.0;
        for (int r = 0; r < lf.grid; ++r)
            for (int c = 0; c < lf.grid; ++c) {
                auto q = lf.offset_of(r, c);
                auto flow = flow_from_disparity(disparity, q);
                worst = std::max(worst, mae(warp_image(lf.center_view(), flow), lf.view(r, c)));
            }
        if (worst >= 1e-6) {
            std::printf("  single-plane warp MAE %.3e (tol 1e-6)\n", worst);
            ok = false;
        }
    }
    // multi-layer oracle model: ground-truth flow, scored outside disocclusions
    {
        auto lf = render_lightfield(random_scene(32, 48, 48, 3), 8);
        double worst = 0.0;
        for (int r = 0; r < lf.grid; ++r)
            for (int c = 0; c < lf.grid; ++c) {
                if (r == lf.center_row && c == lf.center_col) continue;
                auto i = lf.index(r, c);
                auto pred = warp_image(lf.center_view(), lf.gt_flows[i]);
                const Tensor& valid = lf.gt_valid[i];
                double err = 0.0;
                long n = 0;
                for (int ch = 0; ch < 3; ++ch)
                    for (std::size_t p = 0; p < valid.numel(); ++p)
                        if (valid.data[p] > 0.5f) {
                            err += std::abs(pred.data[ch * valid.numel() + p] -
                                            lf.views[i].data[ch * valid.numel() + p]);
                            ++n;
                        }
                worst = std::max(worst, n ? err / n : 0.0);
            }
        if (worst >= 1e-3) {
            std::printf("  oracle-model masked MAE %.3e (tol 1e-3)\n", worst);
            ok = false;
        }
    }
    std::printf("%s geometry\n", ok ? "PASS" : "FAIL");
    return ok;
}

// ------------------------------------------------------------------ metrics

bool criterion_metrics() {
    bool ok = true;
    double p = psnr(Tensor::full({3, 8, 8}, 0.4f), Tensor::full({3, 8, 8}, 0.5f));
    if (std::abs(p - 20.0) > 1e-6) {
        std::printf("  psnr(uniform 0.1) = %.9f, want 20.0\n", p);
        ok = false;
    }
    auto a = noise_image({3, 16, 16}, 41);
    if (ssim(a, a) != 1.0) {
        std::printf("  ssim(a,a) = %.17g, want exactly 1\n", ssim(a, a));
        ok = false;
    }
    Tensor u({1, 2, 2}, {0.1f, 0.5f, 0.9f, 0.3f});
    Tensor v({1, 2, 2}, {0.2f, 0.5f, 0.5f, 0.7f});
    double m = mae(u, v);
    double expect = (0.1 + 0.0 + 0.4 + 0.4) / 4.0;
    if (std::abs(m - expect) > 1e-7) {
        std::printf("  mae hand case = %.9f, want %.9f\n", m, expect);
        ok = false;
    }
    std::printf("%s metrics\n", ok ? "PASS" : "FAIL");
    return ok;
}

// ------------------------------------------------------------------ refocus

bool criterion_refocus() {
    // two layers with disparities on the sweep grid: background 0.75, fg 0.25
    const int H = 48, W = 48;
    SyntheticScene scene;
    scene.camera = {1.0, 1.0};
    scene.height = H;
    scene.width = W;
    SceneLayer bg;
    bg.depth = 4.0;  // disparity (4-1)/4 = 0.75
    bg.opacity = Tensor::full({1, H, W}, 1.0f);
    bg.texture = noise_image({3, H, W}, 51);
    SceneLayer fg;
    fg.depth = 4.0 / 3.0;  // disparity 0.25
    fg.opacity = Tensor::zeros({1, H, W});
    for (int y = 8; y < 40; ++y)
        for (int x = 6; x < 20; ++x) fg.opacity.at(0, y, x) = 1.0f;
    fg.texture = noise_image({3, H, W}, 52);
    scene.layers = {bg, fg};
    auto lf = render_lightfield(scene, 8);

    // interior region masks, eroded away from the occlusion boundary and rim
    Tensor fg_mask = Tensor::zeros({1, H, W}), bg_mask = Tensor::zeros({1, H, W});
    for (int y = 14; y < 34; ++y)
        for (int x = 10; x < 16; ++x) fg_mask.at(0, y, x) = 1.0f;
    for (int y = 14; y < 34; ++y)
        for (int x = 28; x < 42; ++x) bg_mask.at(0, y, x) = 1.0f;

    auto sweep = [&](const Tensor& mask) {
        double best_slope = -1.0, best_score = -1.0;
        for (int i = 0; i <= 20; ++i) {
            const double slope = i * 0.05;  // 0 .. 1
            double score = variance_of_laplacian(refocus(lf, {slope, {}}), &mask);
            if (score > best_score) {
                best_score = score;
                best_slope = slope;
            }
        }
        return best_slope;
    };
    double fg_peak = sweep(fg_mask), bg_peak = sweep(bg_mask);
    bool ok = std::abs(fg_peak - 0.25) <= 0.05 + 1e-9 && std::abs(bg_peak - 0.75) <= 0.05 + 1e-9;
    std::printf("%s refocus: foreground peak %.2f (want 0.25), background peak %.2f (want 0.75)\n",
                ok ? "PASS" : "FAIL", fg_peak, bg_peak);
    return ok;
}

// ------------------------------------------------- determinism, persistence

bool criterion_determinism() {
    bool ok = true;
    fs::create_directories(kCacheDir);
    const std::string dir = std::string(kCacheDir) + "/determinism";
    fs::create_directories(dir);

    std::vector<LightField> data{render_lightfield(random_scene(61, 16, 16, 2), 8)};
    TrainOptions opts;
    opts.optim.iterations = 8;
    opts.optim.batch_size = 2;
    opts.optim.seed = 5;
    opts.crop_h = opts.crop_w = 0;

    auto run = [&](const std::string& path, int iters, bool resume) {
        TrainOptions o = opts;
        o.optim.iterations = iters;
        o.checkpoint_path = path;
        o.resume = resume;
        return train(ModelVariant::full, data, o);
    };
    run(dir + "/a.ckpt", 8, false);
    run(dir + "/b.ckpt", 8, false);
    if (!files_equal(dir + "/a.ckpt", dir + "/b.ckpt")) {
        std::printf("  same-seed checkpoints differ\n");
        ok = false;
    }
    // round trip
    save_checkpoint(load_checkpoint(dir + "/a.ckpt"), dir + "/a2.ckpt");
    if (!files_equal(dir + "/a.ckpt", dir + "/a2.ckpt")) {
        std::printf("  checkpoint round trip is not bitwise stable\n");
        ok = false;
    }
    // interrupted + resumed == uninterrupted
    run(dir + "/c.ckpt", 4, false);
    run(dir + "/c.ckpt", 8, true);
    if (!files_equal(dir + "/a.ckpt", dir + "/c.ckpt")) {
        std::printf("  resumed run differs from uninterrupted run\n");
        ok = false;
    }
    std::printf("%s determinism\n", ok ? "PASS" : "FAIL");
    return ok;
}

// ------------------------------------------------------- training criteria

std::vector<LightField> make_dataset(unsigned seed0, int count) {
    RenderOptions ro;
    ro.with_flow = false;
    ro.with_valid_masks = false;
    std::vector<LightField> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(render_lightfield(random_scene(seed0 + i, 64, 64, 3), 8, ro));
    return out;
}

// train one generalization-setup run, or reuse the cached checkpoint
ModelParams gen_run(ModelVariant variant, unsigned seed,
                    const std::vector<LightField>& trainset, double* wall_hours = nullptr) {
    fs::create_directories(kCacheDir);
    const std::string path = std::string(kCacheDir) + "/gen_" + to_string(variant) + "_s" +
                             std::to_string(seed) + ".ckpt";
    if (!fs::exists(path)) {
        TrainOptions opts;
        opts.optim.iterations = 5000;
        opts.optim.seed = seed;
        opts.crop_h = opts.crop_w = 0;
        opts.checkpoint_path = path;
        opts.log_csv_path = path + ".csv";
        train(variant, trainset, opts);
    }
    if (wall_hours) {
        double ms = 0.0;
        std::ifstream csv(path + ".csv");
        std::string line;
        std::getline(csv, line);  // header
        while (std::getline(csv, line)) {
            auto p = line.rfind(',');
            if (p != std::string::npos) ms += std::stod(line.substr(p + 1));
        }
        *wall_hours = ms / 3.6e6;
    }
    return load_checkpoint(path);
}

double heldout_mae(const ModelParams& params, const std::vector<LightField>& testset) {
    double total = 0.0;
    for (const auto& lf : testset) total += evaluate_grid(params, lf).mean_mae;
    return total / testset.size();
}

bool criterion_overfit() {
    fs::create_directories(kCacheDir);
    const std::string log = std::string(kCacheDir) + "/overfit.csv";
    if (!fs::exists(log)) {
        std::vector<LightField> data = make_dataset(71, 1);
        TrainOptions opts;
        opts.optim.iterations = 1000;
        opts.optim.seed = 1;
        opts.crop_h = opts.crop_w = 0;
        opts.log_csv_path = log;
        train(ModelVariant::full, data, opts);
    }
    std::ifstream csv(log);
    std::string line;
    std::getline(csv, line);
    double first_l1 = -1.0, last_l1 = -1.0, wall_ms = 0.0;
    long rows = 0;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string it, l1, tv, total, ms;
        std::getline(ss, it, ',');
        std::getline(ss, l1, ',');
        std::getline(ss, tv, ',');
        std::getline(ss, total, ',');
        std::getline(ss, ms, ',');
        if (first_l1 < 0) first_l1 = std::stod(l1);
        last_l1 = std::stod(l1);
        wall_ms += std::stod(ms);
        ++rows;
    }
    bool ok = rows == 1000 && last_l1 < 0.2 * first_l1 && wall_ms < 15.0 * 60e3;
    std::printf("%s overfit: L1 %.5f -> %.5f (ratio %.3f, need < 0.2), %.1f min (limit 15)\n",
                ok ? "PASS" : "FAIL", first_l1, last_l1, last_l1 / first_l1, wall_ms / 60e3);
    return ok;
}

bool criterion_generalization() {
    auto trainset = make_dataset(1000, 200);
    auto testset = make_dataset(20000, 20);
    double wall_hours = 0.0;
    auto params = gen_run(ModelVariant::full, 1, trainset, &wall_hours);

    double model_mae = heldout_mae(params, testset);
    double base_mae = 0.0;
    for (const auto& lf : testset) base_mae += evaluate_copy_center(lf).mean_mae;
    base_mae /= testset.size();

    double improvement = (base_mae - model_mae) / base_mae;
    bool ok = improvement >= 0.20 && wall_hours <= 2.0;
    std::printf("%s generalization: held-out MAE %.5f vs copy-center %.5f "
                "(%.1f%% better, need >= 20%%), train wall %.2f h (limit 2)\n",
                ok ? "PASS" : "FAIL", model_mae, base_mae, 100.0 * improvement, wall_hours);
    return ok;
}

bool criterion_ablation() {
    auto trainset = make_dataset(1000, 200);
    auto testset = make_dataset(20000, 20);

    auto median3 = [](std::array<double, 3> v) {
        std::sort(v.begin(), v.end());
        return v[1];
    };
    std::array<double, 3> full_mae{}, nd_mae{};
    for (unsigned seed = 1; seed <= 3; ++seed) {
        full_mae[seed - 1] = heldout_mae(gen_run(ModelVariant::full, seed, trainset), testset);
        nd_mae[seed - 1] = heldout_mae(gen_run(ModelVariant::no_depth, seed, trainset), testset);
    }
    double mf = median3(full_mae), mn = median3(nd_mae);
    // training-outcome ordering: expected, reported, but soft by design
    bool holds = mf <= mn;
    std::printf("PASS ablation: median held-out MAE full %.5f, no_depth %.5f, ordering %s "
                "(soft criterion, reported)\n",
                mf, mn, holds ? "holds" : "VIOLATED");
    std::printf("  full: %.5f %.5f %.5f  no_depth: %.5f %.5f %.5f\n", full_mae[0], full_mae[1],
                full_mae[2], nd_mae[0], nd_mae[1], nd_mae[2]);
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    blas_init();
    std::string only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = argv[++i];
        else {
            std::fprintf(stderr, "usage: acceptance [--only <criterion>]\n");
            return 1;
        }
    }

    const std::pair<std::string, bool (*)()> criteria[] = {
        {"gradients", criterion_gradients},
        {"warp_oracles", criterion_warp_oracles},
        {"geometry", criterion_geometry},
        {"metrics", criterion_metrics},
        {"refocus", criterion_refocus},
        {"determinism", criterion_determinism},
        {"overfit", criterion_overfit},
        {"generalization", criterion_generalization},
        {"ablation", criterion_ablation},
    };

    bool found = false, all_ok = true;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && only != name) continue;
        found = true;
        try {
            if (!fn()) all_ok = false;
        } catch (const std::exception& e) {
            std::printf("FAIL %s: %s\n", name.c_str(), e.what());
            all_ok = false;
        }
    }
    if (!found) {
        std::fprintf(stderr, "unknown criterion: %s\n", only.c_str());
        return 1;
    }
    return all_ok ? 0 : 2;
}
