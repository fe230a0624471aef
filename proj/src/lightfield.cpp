#include "frvs/lightfield.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "frvs/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace frvs {

void SyntheticScene::validate() const {
    require(!layers.empty(), "scene: at least one layer required");
    require(height > 0 && width > 0, "scene: bad size");
    camera.validate();
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& l : layers) {
        require(l.depth > 0.0, "scene: layer depth must be positive");
        require(l.depth < prev, "scene: layers must be ordered far to near, strictly");
        require(l.texture.shape == std::vector<int>{3, height, width}, "scene: texture size");
        require(l.opacity.shape == std::vector<int>{1, height, width}, "scene: opacity size");
        prev = l.depth;
    }
    for (float v : layers.front().opacity.data)
        require(v == 1.0f, "scene: background layer must be fully opaque");
}

namespace {

// Smooth texture from a handful of low-frequency sinusoids, normalized into
// [0.1, 0.9] so quantization and interpolation stay well inside [0,1].
Tensor bandlimited_texture(std::mt19937& rng, int H, int W) {
    std::uniform_real_distribution<double> freq(-0.12, 0.12);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> amp(0.3, 1.0);
    Tensor tex({3, H, W});
    for (int c = 0; c < 3; ++c) {
        const int K = 5;
        double fx[K], fy[K], ph[K], a[K];
        for (int k = 0; k < K; ++k) {
            fx[k] = freq(rng);
            fy[k] = freq(rng);
            ph[k] = phase(rng);
            a[k] = amp(rng);
        }
        float lo = 1e9f, hi = -1e9f;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double v = 0;
                for (int k = 0; k < K; ++k)
                    v += a[k] * std::cos(2.0 * M_PI * (fx[k] * x + fy[k] * y) + ph[k]);
                tex.at(c, y, x) = static_cast<float>(v);
                lo = std::min(lo, tex.at(c, y, x));
                hi = std::max(hi, tex.at(c, y, x));
            }
        const float span = std::max(hi - lo, 1e-6f);
        for (int i = 0; i < H * W; ++i) {
            float& v = tex.data[c * H * W + i];
            v = 0.1f + 0.8f * (v - lo) / span;
        }
    }
    return tex;
}

Tensor ellipse_mask(std::mt19937& rng, int H, int W) {
    std::uniform_real_distribution<double> cx(0.2 * W, 0.8 * W);
    std::uniform_real_distribution<double> cy(0.2 * H, 0.8 * H);
    std::uniform_real_distribution<double> rx(0.12 * W, 0.3 * W);
    std::uniform_real_distribution<double> ry(0.12 * H, 0.3 * H);
    std::uniform_real_distribution<double> rot(0.0, M_PI);
    const double x0 = cx(rng), y0 = cy(rng), ax = rx(rng), ay = ry(rng), th = rot(rng);
    const double ct = std::cos(th), st = std::sin(th);
    Tensor m({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double dx = x - x0, dy = y - y0;
            double u = (ct * dx + st * dy) / ax;
            double v = (-st * dx + ct * dy) / ay;
            m.at(0, y, x) = (u * u + v * v <= 1.0) ? 1.0f : 0.0f;
        }
    return m;
}

int owner_at(const SyntheticScene& scene, int y, int x) {
    for (int l = static_cast<int>(scene.layers.size()) - 1; l >= 0; --l)
        if (scene.layers[l].opacity.at(0, y, x) >= 0.5f) return l;
    return 0;
}

}  // namespace

SyntheticScene random_scene(unsigned seed, int height, int width, int num_layers,
                            CameraModel camera) {
    require(num_layers >= 1, "random_scene: need at least one layer");
    std::mt19937 rng(seed);
    SyntheticScene scene;
    scene.camera = camera;
    scene.height = height;
    scene.width = width;
    // depths from 3f (far) down toward f; disparities stay below ~0.7 B px/step
    for (int i = 0; i < num_layers; ++i) {
        SceneLayer layer;
        const double t = num_layers == 1 ? 0.0 : static_cast<double>(i) / (num_layers - 1);
        layer.depth = camera.focal_depth * (3.0 - 1.6 * t);
        layer.texture = bandlimited_texture(rng, height, width);
        layer.opacity = i == 0 ? Tensor::full({1, height, width}, 1.0f) : ellipse_mask(rng, height, width);
        scene.layers.push_back(std::move(layer));
    }
    scene.validate();
    return scene;
}

const Tensor& LightField::center_depth() const {
    require(has_depth(), "light field carries no depth maps");
    return gt_depths[index(center_row, center_col)];
}

LightField render_lightfield(const SyntheticScene& scene, int grid_size,
                             const RenderOptions& opts) {
    scene.validate();
    require(grid_size >= 1, "render: bad grid size");
    const int H = scene.height, W = scene.width;
    const int nl = static_cast<int>(scene.layers.size());

    std::vector<double> disparity(nl);
    double zmin = scene.layers.back().depth, zmax = scene.layers.front().depth;
    for (int l = 0; l < nl; ++l) {
        double z = scene.layers[l].depth;
        disparity[l] = scene.camera.baseline * (z - scene.camera.focal_depth) / z;
    }

    LightField lf;
    lf.grid = grid_size;
    lf.center_row = lf.center_col = (grid_size - 1) / 2;
    lf.camera = scene.camera;
    lf.views.resize(static_cast<std::size_t>(grid_size) * grid_size);
    if (opts.with_flow) lf.gt_flows.resize(lf.views.size());
    if (opts.with_valid_masks) lf.gt_valid.resize(lf.views.size());
    if (opts.with_depths) lf.gt_depths.resize(lf.views.size());

    // ownership of each center-grid pixel, shared by all views
    std::vector<int> center_owner(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) center_owner[y * W + x] = owner_at(scene, y, x);

    double max_parallax = 0.0;
    for (int r = 0; r < grid_size; ++r)
        for (int c = 0; c < grid_size; ++c) {
            const ViewpointOffset q = lf.offset_of(r, c);
            Tensor view({3, H, W});
            Tensor flow({2, H, W});
            Tensor valid = Tensor::full({1, H, W}, 1.0f);
            Tensor depthmap({1, H, W});
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    // nearest layer whose sampled opacity covers this target pixel
                    int own = 0;
                    float xs = static_cast<float>(x), ys = static_cast<float>(y);
                    for (int l = nl - 1; l >= 0; --l) {
                        float sx = static_cast<float>(x + disparity[l] * q.du);
                        float sy = static_cast<float>(y + disparity[l] * q.dv);
                        if (l == 0 ||
                            sample_bilinear(scene.layers[l].opacity.data.data(), H, W, sx, sy) >= 0.5f) {
                            own = l;
                            xs = sx;
                            ys = sy;
                            break;
                        }
                    }
                    for (int ch = 0; ch < 3; ++ch)
                        view.at(ch, y, x) = sample_bilinear(
                            &scene.layers[own].texture.data[ch * H * W], H, W, xs, ys);
                    flow.at(0, y, x) = static_cast<float>(disparity[own] * q.du);
                    flow.at(1, y, x) = static_cast<float>(disparity[own] * q.dv);
                    max_parallax = std::max(
                        max_parallax, static_cast<double>(std::max(std::abs(flow.at(0, y, x)),
                                                                   std::abs(flow.at(1, y, x)))));
                    depthmap.at(0, y, x) = static_cast<float>(
                        (scene.layers[own].depth - zmin) / std::max(zmax - zmin, 1e-12));
                    // warp-consistent only if all four bilinear taps in the
                    // center view belong to the same layer
                    float cxs = std::clamp(xs, 0.0f, static_cast<float>(W - 1));
                    float cys = std::clamp(ys, 0.0f, static_cast<float>(H - 1));
                    int x0 = std::min(static_cast<int>(std::floor(cxs)), W - 2 >= 0 ? W - 2 : 0);
                    int y0 = std::min(static_cast<int>(std::floor(cys)), H - 2 >= 0 ? H - 2 : 0);
                    for (int dy = 0; dy <= 1 && valid.at(0, y, x) > 0; ++dy)
                        for (int dx = 0; dx <= 1; ++dx)
                            if (center_owner[std::min(y0 + dy, H - 1) * W +
                                             std::min(x0 + dx, W - 1)] != own) {
                                valid.at(0, y, x) = 0.0f;
                                break;
                            }
                }
            const auto i = lf.index(r, c);
            lf.views[i] = std::move(view);
            if (opts.with_flow) lf.gt_flows[i] = std::move(flow);
            if (opts.with_valid_masks) lf.gt_valid[i] = std::move(valid);
            if (opts.with_depths) lf.gt_depths[i] = std::move(depthmap);
        }
    if (max_parallax > opts.max_disp_hint)
        lf.warnings.push_back("parallax " + std::to_string(max_parallax) +
                              " px exceeds max_disp hint " + std::to_string(opts.max_disp_hint) +
                              " (clipping risk)");
    return lf;
}

std::vector<TrainingSample> sample_pairs(const LightField& lf, std::mt19937& rng, int count) {
    require(lf.grid >= 2, "sample_pairs: grid must be at least 2x2");
    require(lf.has_depth(), "sample_pairs: light field carries no depth maps");

    // centers: every view with a depth map; targets per center: offsets in [-3,3]^2
    std::vector<int> centers;
    for (std::size_t i = 0; i < lf.views.size(); ++i)
        if (!lf.gt_depths[i].data.empty()) centers.push_back(static_cast<int>(i));
    require(!centers.empty(), "sample_pairs: no view has a depth map");

    std::uniform_int_distribution<std::size_t> pick_center(0, centers.size() - 1);
    std::vector<TrainingSample> out;
    out.reserve(count);
    for (int n = 0; n < count; ++n) {
        const int ci = centers[pick_center(rng)];
        const int cr = ci / lf.grid, cc = ci % lf.grid;
        std::vector<int> targets;
        for (int r = 0; r < lf.grid; ++r)
            for (int c = 0; c < lf.grid; ++c)
                if (std::abs(r - cr) <= 3 && std::abs(c - cc) <= 3)
                    targets.push_back(r * lf.grid + c);
        std::uniform_int_distribution<std::size_t> pick_target(0, targets.size() - 1);
        const int ti = targets[pick_target(rng)];
        TrainingSample s;
        s.center = lf.views[ci];
        s.depth = lf.gt_depths[ci];
        s.target = lf.views[ti];
        s.q = {static_cast<double>(ti % lf.grid - cc), static_cast<double>(ti / lf.grid - cr)};
        if (lf.has_flow() && cr == lf.center_row && cc == lf.center_col)
            s.gt_flow = lf.gt_flows[ti];
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

Tensor crop_tensor(const Tensor& t, int y0, int x0, int h, int w) {
    const int C = t.shape[0];
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    return out;
}

}  // namespace

TrainingSample random_crop(const TrainingSample& sample, int crop_h, int crop_w,
                           std::mt19937& rng) {
    const int H = sample.center.shape[1], W = sample.center.shape[2];
    require(crop_h <= H && crop_w <= W, "random_crop: crop larger than image");
    std::uniform_int_distribution<int> dy(0, H - crop_h), dx(0, W - crop_w);
    const int y0 = dy(rng), x0 = dx(rng);
    TrainingSample out;
    out.center = crop_tensor(sample.center, y0, x0, crop_h, crop_w);
    out.depth = crop_tensor(sample.depth, y0, x0, crop_h, crop_w);
    out.target = crop_tensor(sample.target, y0, x0, crop_h, crop_w);
    out.q = sample.q;
    if (sample.gt_flow) out.gt_flow = crop_tensor(*sample.gt_flow, y0, x0, crop_h, crop_w);
    return out;
}

void save_lightfield(const LightField& lf, const std::string& dir) {
    fs::create_directories(dir);
    json meta;
    meta["grid"] = lf.grid;
    meta["center"] = {lf.center_row, lf.center_col};
    meta["height"] = lf.height();
    meta["width"] = lf.width();
    meta["has_flow"] = lf.has_flow();
    if (lf.camera) meta["camera"] = {{"baseline", lf.camera->baseline},
                                     {"focal_depth", lf.camera->focal_depth}};
    std::ofstream(fs::path(dir) / "lf.json") << meta.dump(2) << "\n";

    for (int r = 0; r < lf.grid; ++r)
        for (int c = 0; c < lf.grid; ++c) {
            const auto stem = std::to_string(r) + "_" + std::to_string(c);
            io::save_png(lf.view(r, c), (fs::path(dir) / ("view_" + stem + ".png")).string());
            if (lf.has_flow())
                io::save_flo(lf.gt_flows[lf.index(r, c)],
                             (fs::path(dir) / ("flow_" + stem + ".flo")).string());
        }
    if (lf.has_depth())
        io::save_pfm(lf.center_depth(), (fs::path(dir) / "depth.pfm").string());
}

LightField load_lightfield(const std::string& dir) {
    std::ifstream meta_stream(fs::path(dir) / "lf.json");
    if (!meta_stream) throw std::runtime_error("load_lightfield: missing lf.json in " + dir);
    json meta = json::parse(meta_stream);

    LightField lf;
    lf.grid = meta.at("grid").get<int>();
    lf.center_row = meta.at("center")[0].get<int>();
    lf.center_col = meta.at("center")[1].get<int>();
    if (meta.contains("camera"))
        lf.camera = CameraModel{meta["camera"]["baseline"].get<double>(),
                                meta["camera"]["focal_depth"].get<double>()};
    const bool has_flow = meta.value("has_flow", false);

    lf.views.resize(static_cast<std::size_t>(lf.grid) * lf.grid);
    if (has_flow) lf.gt_flows.resize(lf.views.size());
    int H = -1, W = -1;
    for (int r = 0; r < lf.grid; ++r)
        for (int c = 0; c < lf.grid; ++c) {
            const auto stem = std::to_string(r) + "_" + std::to_string(c);
            const auto path = fs::path(dir) / ("view_" + stem + ".png");
            if (!fs::exists(path))
                throw std::runtime_error("load_lightfield: missing view " + path.string());
            auto img = io::load_png(path.string());
            if (H < 0) {
                H = img.shape[1];
                W = img.shape[2];
            } else if (img.shape[1] != H || img.shape[2] != W) {
                throw std::runtime_error("load_lightfield: inconsistent view size at " +
                                         path.string());
            }
            lf.views[lf.index(r, c)] = std::move(img);
            if (has_flow)
                lf.gt_flows[lf.index(r, c)] =
                    io::load_flo((fs::path(dir) / ("flow_" + stem + ".flo")).string());
        }
    const auto depth_path = fs::path(dir) / "depth.pfm";
    if (fs::exists(depth_path)) {
        lf.gt_depths.resize(lf.views.size());
        lf.gt_depths[lf.index(lf.center_row, lf.center_col)] = io::load_pfm(depth_path.string());
    }
    return lf;
}

}  // namespace frvs
