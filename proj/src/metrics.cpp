#include "frvs/metrics.hpp"

#include <filesystem>
#include <fstream>

#include "frvs/image_io.hpp"

namespace fs = std::filesystem;

namespace frvs {

double psnr(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "psnr: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double mse = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse == 0.0) return 99.0;
    return std::min(99.0, -10.0 * std::log10(mse));
}

double mae(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mae: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        s += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return s / static_cast<double>(a.numel());
}

namespace {

std::vector<double> gaussian_window_11(double sigma = 1.5) {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "ssim: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    const int C = a.shape[0], H = a.shape[1], W = a.shape[2];
    require(H >= 11 && W >= 11, "ssim: image smaller than the 11x11 window");
    static const std::vector<double> win = gaussian_window_11();
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;  // dynamic range 1.0

    double total = 0.0;
    for (int c = 0; c < C; ++c) {
        double channel = 0.0;
        std::size_t count = 0;
        for (int y = 5; y + 5 < H; ++y)
            for (int x = 5; x + 5 < W; ++x) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int dy = -5; dy <= 5; ++dy)
                    for (int dx = -5; dx <= 5; ++dx) {
                        const double w = win[dy + 5] * win[dx + 5];
                        const double pa = a.at(c, y + dy, x + dx);
                        const double pb = b.at(c, y + dy, x + dx);
                        ma += w * pa;
                        mb += w * pb;
                        va += w * pa * pa;
                        vb += w * pb * pb;
                        cov += w * pa * pb;
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                channel += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                           ((ma * ma + mb * mb + C1) * (va + vb + C2));
                ++count;
            }
        total += channel / static_cast<double>(count);
    }
    return total / C;
}

MetricsRecord evaluate_grid_fn(const LightField& lf, const ViewSynthesizer& synth,
                               const std::string& out_dir) {
    if (!out_dir.empty()) fs::create_directories(out_dir);
    MetricsRecord rec;
    for (int dv = -3; dv <= 3; ++dv)
        for (int du = -3; du <= 3; ++du) {
            if (du == 0 && dv == 0) continue;
            const int r = lf.center_row + dv, c = lf.center_col + du;
            require(r >= 0 && r < lf.grid && c >= 0 && c < lf.grid,
                    "evaluate_grid: center not interior enough for the 7x7 protocol");
            const Tensor pred = synth(lf, r, c);
            const Tensor& gt = lf.view(r, c);
            ViewMetrics vm{{static_cast<double>(du), static_cast<double>(dv)},
                           psnr(pred, gt), ssim(pred, gt), mae(pred, gt)};
            rec.views.push_back(vm);
            rec.mean_psnr += vm.psnr;
            rec.mean_ssim += vm.ssim;
            rec.mean_mae += vm.mae;
            if (!out_dir.empty()) {
                const int H = gt.shape[1], W = gt.shape[2];
                Tensor err({1, H, W});
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        float e = 0;
                        for (int ch = 0; ch < 3; ++ch)
                            e += std::abs(pred.at(ch, y, x) - gt.at(ch, y, x));
                        err.at(0, y, x) = std::min(1.0f, e / 3.0f * 4.0f);  // x4 gain for visibility
                    }
                io::save_png(err, (fs::path(out_dir) / ("error_" + std::to_string(r) + "_" +
                                                        std::to_string(c) + ".png"))
                                      .string());
            }
        }
    const double n = static_cast<double>(rec.views.size());
    rec.mean_psnr /= n;
    rec.mean_ssim /= n;
    rec.mean_mae /= n;
    if (!out_dir.empty()) write_metrics_csv(rec, (fs::path(out_dir) / "metrics.csv").string());
    return rec;
}

MetricsRecord evaluate_grid(const ModelParams& params, const LightField& lf,
                            const std::string& out_dir) {
    require(lf.has_depth() && !lf.center_depth().data.empty(),
            "evaluate_grid: center depth missing; supply depth.pfm for this light field");
    return evaluate_grid_fn(
        lf,
        [&params](const LightField& f, int r, int c) {
            ModelInput in{f.center_view(), f.center_depth(), f.offset_of(r, c)};
            return synthesize(params, in)->value;
        },
        out_dir);
}

MetricsRecord evaluate_copy_center(const LightField& lf, const std::string& out_dir) {
    return evaluate_grid_fn(
        lf, [](const LightField& f, int, int) { return f.center_view(); }, out_dir);
}

void write_metrics_csv(const MetricsRecord& record, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write metrics csv: " + path);
    os << "du,dv,psnr,ssim,mae\n";
    for (const auto& v : record.views)
        os << v.q.du << ',' << v.q.dv << ',' << v.psnr << ',' << v.ssim << ',' << v.mae << '\n';
    os << "aggregate,," << record.mean_psnr << ',' << record.mean_ssim << ',' << record.mean_mae
       << '\n';
}

Tensor refocus(const LightField& lf, const RefocusRequest& req) {
    auto aperture = req.aperture;
    if (aperture.empty())
        for (int r = 0; r < lf.grid; ++r)
            for (int c = 0; c < lf.grid; ++c) aperture.emplace_back(r, c);
    require(!aperture.empty(), "refocus: empty aperture");

    const int H = lf.height(), W = lf.width();
    Tensor out = Tensor::zeros({3, H, W});
    const float inv = 1.0f / static_cast<float>(aperture.size());
    for (auto [r, c] : aperture) {
        const Tensor& v = lf.view(r, c);
        const ViewpointOffset q = lf.offset_of(r, c);
        // content rendered with disparity d sits at s - d*q in view q,
        // so sampling at s - slope*q aligns the slope-disparity plane
        const float sx = static_cast<float>(-req.slope * q.du);
        const float sy = static_cast<float>(-req.slope * q.dv);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    out.at(ch, y, x) += inv * sample_bilinear(&v.data[ch * H * W], H, W,
                                                              x + sx, y + sy);
    }
    return out;
}

Tensor flow_visualize(const Tensor& flow, double max_mag) {
    require(flow.rank() == 3 && flow.shape[0] == 2, "flow_visualize: expected 2xHxW");
    const int H = flow.shape[1], W = flow.shape[2];
    Tensor out({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double fx = flow.at(0, y, x), fy = flow.at(1, y, x);
            const double mag = std::hypot(fx, fy);
            double ang = std::atan2(fy, fx);  // [-pi, pi]
            if (ang < 0) ang += 2.0 * M_PI;
            const double h = ang / (2.0 * M_PI) * 6.0;
            const double s = std::min(1.0, max_mag > 0 ? mag / max_mag : 0.0);
            const int i = static_cast<int>(h) % 6;
            const double f = h - std::floor(h);
            const double p = 1.0 - s, q = 1.0 - s * f, t = 1.0 - s * (1.0 - f);
            double rgb[3];
            switch (i) {
                case 0: rgb[0] = 1; rgb[1] = t; rgb[2] = p; break;
                case 1: rgb[0] = q; rgb[1] = 1; rgb[2] = p; break;
                case 2: rgb[0] = p; rgb[1] = 1; rgb[2] = t; break;
                case 3: rgb[0] = p; rgb[1] = q; rgb[2] = 1; break;
                case 4: rgb[0] = t; rgb[1] = p; rgb[2] = 1; break;
                default: rgb[0] = 1; rgb[1] = p; rgb[2] = q; break;
            }
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<float>(rgb[c]);
        }
    return out;
}

double variance_of_laplacian(const Tensor& image, const Tensor* region_mask) {
    const int C = image.shape[0], H = image.shape[1], W = image.shape[2];
    std::vector<double> vals;
    for (int y = 1; y + 1 < H; ++y)
        for (int x = 1; x + 1 < W; ++x) {
            if (region_mask && region_mask->at(0, y, x) < 0.5f) continue;
            double lap = 0.0;
            for (int c = 0; c < C; ++c)
                lap += -4.0 * image.at(c, y, x) + image.at(c, y - 1, x) + image.at(c, y + 1, x) +
                       image.at(c, y, x - 1) + image.at(c, y, x + 1);
            vals.push_back(lap / C);
        }
    if (vals.empty()) return 0.0;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    return var / static_cast<double>(vals.size());
}

}  // namespace frvs
