#pragma once

#include <functional>

#include "frvs/lightfield.hpp"
#include "frvs/model.hpp"

namespace frvs {

// Peak 1.0; identical images report the 99 dB cap so aggregates stay finite.
double psnr(const Tensor& a, const Tensor& b);

// Single-scale SSIM: 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1.0, per channel, mean over valid window positions.
double ssim(const Tensor& a, const Tensor& b);

// Mean absolute difference over all pixels and channels.
double mae(const Tensor& a, const Tensor& b);

struct ViewMetrics {
    ViewpointOffset q;
    double psnr = 0.0;
    double ssim = 0.0;
    double mae = 0.0;
};

struct MetricsRecord {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_mae = 0.0;
};

// Produces the view at (r, c) of the light field's grid from the center view.
using ViewSynthesizer = std::function<Tensor(const LightField& lf, int r, int c)>;

// Evaluates all 48 offsets in [-3,3]^2 \ {0} around the center against the
// ground-truth views. If out_dir is nonempty, writes per-view absolute-error
// heatmaps and a metrics CSV there.
MetricsRecord evaluate_grid_fn(const LightField& lf, const ViewSynthesizer& synth,
                               const std::string& out_dir = "");
MetricsRecord evaluate_grid(const ModelParams& params, const LightField& lf,
                            const std::string& out_dir = "");

// Predicts every novel view as the unmodified center view.
MetricsRecord evaluate_copy_center(const LightField& lf, const std::string& out_dir = "");

void write_metrics_csv(const MetricsRecord& record, const std::string& path);

struct RefocusRequest {
    double slope = 0.0;  // pixels per unit grid step; slope = d focuses the layer at disparity d
    std::vector<std::pair<int, int>> aperture;  // (row, col) grid cells; empty = full grid
};

// Shift-and-add: mean over the aperture of each view resampled against its
// grid offset, so content at the selected disparity aligns across views.
Tensor refocus(const LightField& lf, const RefocusRequest& req);

// Optical-flow color wheel: hue = direction, saturation = magnitude / max_mag,
// zero flow renders white.
Tensor flow_visualize(const Tensor& flow, double max_mag = 10.0);

// Variance of the 3x3 Laplacian response; used as a sharpness score.
double variance_of_laplacian(const Tensor& image, const Tensor* region_mask = nullptr);

}  // namespace frvs
