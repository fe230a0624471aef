#pragma once

#include "frvs/ops.hpp"

namespace frvs {

// Lenslet-grid coordinates of the target view relative to the center.
struct ViewpointOffset {
    double du = 0.0;
    double dv = 0.0;

    bool in_range() const { return std::abs(du) <= 3.0 && std::abs(dv) <= 3.0; }
    void validate() const {
        require(in_range(), "viewpoint offset out of [-3,3]^2: (" + std::to_string(du) + "," +
                                std::to_string(dv) + ")");
    }
};

// B: baseline distance per unit grid step, f: focal depth (scene units).
struct CameraModel {
    double baseline = 1.0;
    double focal_depth = 1.0;

    void validate() const {
        require(focal_depth > 0.0 && baseline >= 0.0, "camera model: need f > 0, B >= 0");
    }
};

// D = B (Z - f) / Z, pixels per unit grid step. Z must be positive everywhere.
template <typename T>
TensorT<T> depth_to_disparity(const TensorT<T>& depth, const CameraModel& cam) {
    cam.validate();
    std::size_t bad = 0;
    for (T z : depth.data)
        if (!(z > T(0))) ++bad;
    require(bad == 0, "depth_to_disparity: " + std::to_string(bad) + " nonpositive depth pixels");
    TensorT<T> d(depth.shape);
    for (std::size_t i = 0; i < depth.numel(); ++i) {
        T z = depth.data[i];
        d.data[i] = static_cast<T>(cam.baseline * (z - cam.focal_depth) / z);
    }
    return d;
}

// F(s) = (D(s) * du, D(s) * dv); channel 0 horizontal, channel 1 vertical.
template <typename T>
TensorT<T> flow_from_disparity(const TensorT<T>& disparity, const ViewpointOffset& q) {
    const auto& s = disparity.shape;
    const int H = s[s.size() - 2], W = s[s.size() - 1];
    TensorT<T> f({2, H, W});
    for (int i = 0; i < H * W; ++i) {
        f.data[i] = static_cast<T>(disparity.data[i] * q.du);
        f.data[H * W + i] = static_cast<T>(disparity.data[i] * q.dv);
    }
    return f;
}

// Bilinear sample with edge clamping; zero-offset samples reproduce pixels exactly.
template <typename T>
T sample_bilinear(const T* plane, int H, int W, T xs, T ys) {
    if (xs < T(0)) xs = T(0);
    if (xs > T(W - 1)) xs = T(W - 1);
    if (ys < T(0)) ys = T(0);
    if (ys > T(H - 1)) ys = T(H - 1);
    int x0 = static_cast<int>(std::floor(xs));
    int y0 = static_cast<int>(std::floor(ys));
    if (x0 > W - 2) x0 = W > 1 ? W - 2 : 0;
    if (y0 > H - 2) y0 = H > 1 ? H - 2 : 0;
    int x1 = W > 1 ? x0 + 1 : x0;
    int y1 = H > 1 ? y0 + 1 : y0;
    T wx = xs - T(x0), wy = ys - T(y0);
    // product form is exact when a weight lands on 0 or 1 (integer flow, clamped edges)
    T top = (T(1) - wx) * plane[y0 * W + x0] + wx * plane[y0 * W + x1];
    T bot = (T(1) - wx) * plane[y1 * W + x0] + wx * plane[y1 * W + x1];
    return (T(1) - wy) * top + wy * bot;
}

// Plain-tensor backward warp: out(c,y,x) = image(c, y + flow1, x + flow0).
template <typename T>
TensorT<T> warp_image(const TensorT<T>& image, const TensorT<T>& flow) {
    require(image.rank() == 3 && flow.rank() == 3 && flow.shape[0] == 2 &&
                image.shape[1] == flow.shape[1] && image.shape[2] == flow.shape[2],
            "warp: shape mismatch " + image.shape_str() + " vs " + flow.shape_str());
    const int C = image.shape[0], H = image.shape[1], W = image.shape[2];
    TensorT<T> out({C, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            T xs = T(x) + flow.at(0, y, x);
            T ys = T(y) + flow.at(1, y, x);
            for (int c = 0; c < C; ++c)
                out.at(c, y, x) = sample_bilinear(&image.data[c * H * W], H, W, xs, ys);
        }
    return out;
}

// Differentiable backward warp. Gradients flow to both the flow (analytic
// bilinear derivative, zero where the sample clamps) and the image (scatter
// of the bilinear weights).
template <typename T>
NodePtrT<T> bilinear_warp(const NodePtrT<T>& image, const NodePtrT<T>& flow) {
    auto out = std::make_shared<NodeT<T>>(warp_image(image->value, flow->value));
    out->value.check_finite("bilinear_warp");
    if (image->needs_grad() || flow->needs_grad()) {
        out->parents = {image, flow};
        auto img = image.get();
        auto fl = flow.get();
        const int C = image->value.shape[0], H = image->value.shape[1], W = image->value.shape[2];
        out->backward_fn = [img, fl, C, H, W](NodeT<T>& self) {
            const bool need_img = img->needs_grad();
            const bool need_fl = fl->needs_grad();
            if (need_img) img->ensure_grad();
            if (need_fl) fl->ensure_grad();
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    T xr = T(x) + fl->value.at(0, y, x);
                    T yr = T(y) + fl->value.at(1, y, x);
                    const bool cx = xr < T(0) || xr > T(W - 1);
                    const bool cy = yr < T(0) || yr > T(H - 1);
                    T xs = cx ? (xr < T(0) ? T(0) : T(W - 1)) : xr;
                    T ys = cy ? (yr < T(0) ? T(0) : T(H - 1)) : yr;
                    int x0 = static_cast<int>(std::floor(xs));
                    int y0 = static_cast<int>(std::floor(ys));
                    if (x0 > W - 2) x0 = W > 1 ? W - 2 : 0;
                    if (y0 > H - 2) y0 = H > 1 ? H - 2 : 0;
                    int x1 = W > 1 ? x0 + 1 : x0;
                    int y1 = H > 1 ? y0 + 1 : y0;
                    T wx = xs - T(x0), wy = ys - T(y0);
                    T gfx = 0, gfy = 0;
                    for (int c = 0; c < C; ++c) {
                        T go = self.grad.at(c, y, x);
                        if (go == T(0)) continue;
                        const T* p = &img->value.data[c * H * W];
                        T i00 = p[y0 * W + x0], i10 = p[y0 * W + x1];
                        T i01 = p[y1 * W + x0], i11 = p[y1 * W + x1];
                        if (need_fl) {
                            gfx += go * ((T(1) - wy) * (i10 - i00) + wy * (i11 - i01));
                            gfy += go * ((T(1) - wx) * (i01 - i00) + wx * (i11 - i10));
                        }
                        if (need_img) {
                            T* gp = &img->grad.data[c * H * W];
                            gp[y0 * W + x0] += go * (T(1) - wx) * (T(1) - wy);
                            gp[y0 * W + x1] += go * wx * (T(1) - wy);
                            gp[y1 * W + x0] += go * (T(1) - wx) * wy;
                            gp[y1 * W + x1] += go * wx * wy;
                        }
                    }
                    if (need_fl) {
                        if (!cx) fl->grad.at(0, y, x) += gfx;
                        if (!cy) fl->grad.at(1, y, x) += gfy;
                    }
                }
        };
    }
    return out;
}

// Anisotropic L1 total variation, mean over all forward-difference terms.
// No wraparound: differences are omitted at the last row/column.
template <typename T>
NodePtrT<T> tv_loss(const NodePtrT<T>& flow) {
    const auto& s = flow->value.shape;
    require(s.size() == 3, "tv_loss: input must be C x H x W");
    const int C = s[0], H = s[1], W = s[2];
    const std::size_t nterms =
        static_cast<std::size_t>(C) * (static_cast<std::size_t>(H) * (W - 1) +
                                       static_cast<std::size_t>(H - 1) * W);
    T total = 0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (x + 1 < W) total += std::abs(flow->value.at(c, y, x + 1) - flow->value.at(c, y, x));
                if (y + 1 < H) total += std::abs(flow->value.at(c, y + 1, x) - flow->value.at(c, y, x));
            }
    const T inv = nterms ? T(1) / static_cast<T>(nterms) : T(0);
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::scalar(total * inv));
    out->value.check_finite("tv_loss");
    if (flow->needs_grad()) {
        out->parents = {flow};
        auto p = flow.get();
        out->backward_fn = [p, C, H, W, inv](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            const T go = self.grad.data[0] * inv;
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        if (x + 1 < W) {
                            T d = p->value.at(c, y, x + 1) - p->value.at(c, y, x);
                            T sg = d > T(0) ? go : (d < T(0) ? -go : T(0));
                            g.at(c, y, x + 1) += sg;
                            g.at(c, y, x) -= sg;
                        }
                        if (y + 1 < H) {
                            T d = p->value.at(c, y + 1, x) - p->value.at(c, y, x);
                            T sg = d > T(0) ? go : (d < T(0) ? -go : T(0));
                            g.at(c, y + 1, x) += sg;
                            g.at(c, y, x) -= sg;
                        }
                    }
        };
    }
    return out;
}

// Two constant feature maps carrying the target viewpoint, normalized to [-1,1].
template <typename T>
TensorT<T> coord_maps(const ViewpointOffset& q, int H, int W) {
    q.validate();
    TensorT<T> m({2, H, W});
    std::fill(m.data.begin(), m.data.begin() + static_cast<std::size_t>(H) * W,
              static_cast<T>(q.du / 3.0));
    std::fill(m.data.begin() + static_cast<std::size_t>(H) * W, m.data.end(),
              static_cast<T>(q.dv / 3.0));
    return m;
}

// Maps the Tanh-bounded raw output (-1,1) to pixel units.
template <typename T>
NodePtrT<T> flow_scale(const NodePtrT<T>& raw, T max_disp) {
    require(max_disp > T(0), "flow_scale: max_disp must be positive");
    return scale(raw, max_disp);
}

}  // namespace frvs
