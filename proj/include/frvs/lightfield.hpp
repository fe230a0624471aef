#pragma once

#include <optional>

#include "frvs/warp.hpp"

namespace frvs {

// Fronto-parallel textured plane at depth Z. The farthest layer acts as
// background and must be fully opaque.
struct SceneLayer {
    double depth = 1.0;       // scene units, > 0
    Tensor opacity;           // 1 x H x W, {0,1}
    Tensor texture;           // 3 x H x W, [0,1]
};

struct SyntheticScene {
    std::vector<SceneLayer> layers;  // ordered far to near (strictly decreasing depth)
    CameraModel camera;
    int height = 0;
    int width = 0;

    void validate() const;
};

// Procedural scene: band-limited sinusoid textures, elliptical cutout masks
// for the foreground layers, depths spread between focal plane and 3x focal.
SyntheticScene random_scene(unsigned seed, int height, int width, int num_layers,
                            CameraModel camera = {1.0, 1.0});

struct LightField {
    int grid = 8;
    int center_row = 3;
    int center_col = 3;
    std::vector<Tensor> views;       // grid*grid row-major, 3 x H x W
    std::vector<Tensor> gt_flows;    // optional, per view, 2 x H x W w.r.t. center
    std::vector<Tensor> gt_valid;    // optional, per view, 1 x H x W (1 = warp-consistent)
    std::vector<Tensor> gt_depths;   // optional, per view, 1 x H x W normalized [0,1], 0 = nearest
    std::optional<CameraModel> camera;
    std::vector<std::string> warnings;

    int height() const { return views.empty() ? 0 : views[0].shape[1]; }
    int width() const { return views.empty() ? 0 : views[0].shape[2]; }
    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * grid + c; }
    const Tensor& view(int r, int c) const { return views[index(r, c)]; }
    ViewpointOffset offset_of(int r, int c) const {
        return {static_cast<double>(c - center_col), static_cast<double>(r - center_row)};
    }
    const Tensor& center_view() const { return view(center_row, center_col); }
    const Tensor& center_depth() const;
    bool has_flow() const { return !gt_flows.empty(); }
    bool has_depth() const { return !gt_depths.empty(); }
};

struct RenderOptions {
    bool with_flow = true;
    bool with_valid_masks = true;
    bool with_depths = true;
    double max_disp_hint = 10.0;  // parallax beyond this is flagged as a clipping risk
};

// Renders an A x A grid of views. Per-layer parallax follows the disparity
// relation exactly, so the emitted per-view flow reproduces each view by
// backward warping wherever the valid mask is set.
LightField render_lightfield(const SyntheticScene& scene, int grid_size,
                             const RenderOptions& opts = {});

struct TrainingSample {
    Tensor center;  // 3 x H x W
    Tensor depth;   // 1 x H x W
    Tensor target;  // 3 x H x W
    ViewpointOffset q;
    std::optional<Tensor> gt_flow;  // 2 x H x W when known
};

// Uniform (center, target) pairs with relative offset in [-3,3]^2. Any view
// carrying a depth map can be chosen as the center.
std::vector<TrainingSample> sample_pairs(const LightField& lf, std::mt19937& rng, int count);

// Same crop window applied to every plane of the sample.
TrainingSample random_crop(const TrainingSample& sample, int crop_h, int crop_w,
                           std::mt19937& rng);

// Directory layout: view_{row}_{col}.png, depth.pfm (center view),
// flow_{row}_{col}.flo when ground-truth flow is known, lf.json metadata.
void save_lightfield(const LightField& lf, const std::string& dir);
LightField load_lightfield(const std::string& dir);

}  // namespace frvs
