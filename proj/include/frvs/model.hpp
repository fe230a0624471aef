#pragma once

#include "frvs/warp.hpp"

namespace frvs {

enum class ModelVariant { full, no_depth, encdec };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::full: return "full";
        case ModelVariant::no_depth: return "no_depth";
        case ModelVariant::encdec: return "encdec";
    }
    return "?";
}

inline ModelVariant variant_from_string(const std::string& s) {
    if (s == "full") return ModelVariant::full;
    if (s == "no_depth") return ModelVariant::no_depth;
    if (s == "encdec") return ModelVariant::encdec;
    throw std::invalid_argument("unknown model variant: " + s);
}

enum class Activation { relu, tanh };

struct LayerSpec {
    std::string name;
    int kernel = 3;
    int in_ch = 0;
    int out_ch = 0;
    Activation activation = Activation::relu;
};

// Four encoder and four decoder convolutions; every map keeps the input
// resolution in the full and no_depth variants. The decoder input channel
// count reflects the feature connection (192 features + depth + 2 coords).
inline std::vector<LayerSpec> layer_specs(ModelVariant v) {
    const int d1_in = v == ModelVariant::no_depth ? 194 : 195;
    return {
        {"E1", 7, 3, 32, Activation::relu},    {"E2", 5, 32, 64, Activation::relu},
        {"E3", 3, 64, 128, Activation::relu},  {"E4", 1, 128, 192, Activation::relu},
        {"D1", 3, d1_in, 192, Activation::relu}, {"D2", 3, 192, 128, Activation::relu},
        {"D3", 3, 128, 64, Activation::relu},  {"D4", 3, 64, 2, Activation::tanh},
    };
}

template <typename T>
struct ModelParamsT {
    ModelVariant variant = ModelVariant::full;
    T max_disp = T(10);
    ParameterStoreT<T> store;

    template <typename U>
    ModelParamsT<U> cast() const {
        ModelParamsT<U> out;
        out.variant = variant;
        out.max_disp = static_cast<U>(max_disp);
        out.store = store.template cast<U>();
        return out;
    }
};

template <typename T>
struct ModelInputT {
    TensorT<T> image;  // 3 x H x W, [0,1]
    TensorT<T> depth;  // 1 x H x W, [0,1], 0 = nearest
    ViewpointOffset q;

    void validate() const {
        require(image.rank() == 3 && image.shape[0] == 3, "model input: image must be 3 x H x W");
        require(depth.rank() == 3 && depth.shape[0] == 1 && depth.shape[1] == image.shape[1] &&
                    depth.shape[2] == image.shape[2],
                "model input: depth must be 1 x H x W matching the image");
        depth.check_finite("model input depth");
        q.validate();
    }
};

// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out)) over the kernel
// receptive field), zero biases, reproducible from the seed.
template <typename T>
ModelParamsT<T> init_model(ModelVariant variant, unsigned seed, T max_disp = T(10)) {
    ModelParamsT<T> m;
    m.variant = variant;
    m.max_disp = max_disp;
    std::mt19937 rng(seed);
    for (const auto& l : layer_specs(variant)) {
        const double fan_in = static_cast<double>(l.in_ch) * l.kernel * l.kernel;
        const double fan_out = static_cast<double>(l.out_ch) * l.kernel * l.kernel;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        TensorT<T> w({l.out_ch, l.in_ch, l.kernel, l.kernel});
        for (auto& v : w.data) v = static_cast<T>(dist(rng));
        m.store.add(l.name + ".weight", std::move(w));
        m.store.add(l.name + ".bias", TensorT<T>::zeros({l.out_ch}));
    }
    return m;
}

namespace detail {

template <typename T>
NodePtrT<T> apply_layer(const ModelParamsT<T>& m, const LayerSpec& l, const NodePtrT<T>& x,
                        int stride = 1) {
    auto y = conv2d(x, m.store.at(l.name + ".weight"), m.store.at(l.name + ".bias"),
                    (l.kernel - 1) / 2, stride);
    return l.activation == Activation::relu ? relu(y) : tanh_op(y);
}

// Area average by an integer factor, used to bring the depth/coord maps to
// the encoder-decoder bottleneck resolution.
template <typename T>
TensorT<T> area_downsample(const TensorT<T>& x, int factor) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    require(H % factor == 0 && W % factor == 0, "area_downsample: size not divisible");
    TensorT<T> out({C, H / factor, W / factor});
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H / factor; ++y)
            for (int xo = 0; xo < W / factor; ++xo) {
                T s = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += x.at(c, y * factor + dy, xo * factor + dx);
                out.at(c, y, xo) = s * inv;
            }
    return out;
}

}  // namespace detail

// Encoder on the image, feature connection with depth and viewpoint
// coordinate maps, decoder to a Tanh-bounded field, scaled to pixels.
// Returns a 2 x H x W flow node.
template <typename T>
NodePtrT<T> forward_flow(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    require(m.variant == ModelVariant::full, "forward_flow: params are not the full variant");
    input.validate();
    const auto specs = layer_specs(m.variant);
    const int H = input.image.shape[1], W = input.image.shape[2];

    auto x = make_const(input.image);
    for (int i = 0; i < 4; ++i) x = detail::apply_layer(m, specs[i], x);
    auto depth = make_const(input.depth);
    auto coords = make_const(coord_maps<T>(input.q, H, W));
    x = concat_channels<T>({x, depth, coords});
    for (int i = 4; i < 8; ++i) x = detail::apply_layer(m, specs[i], x);
    return flow_scale(x, m.max_disp);
}

// Depth-free ablation: the depth channel is omitted (194-channel feature
// connection).
template <typename T>
NodePtrT<T> forward_flow_no_depth(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    require(m.variant == ModelVariant::no_depth,
            "forward_flow_no_depth: params are not the no_depth variant");
    input.validate();
    const auto specs = layer_specs(m.variant);
    const int H = input.image.shape[1], W = input.image.shape[2];

    auto x = make_const(input.image);
    for (int i = 0; i < 4; ++i) x = detail::apply_layer(m, specs[i], x);
    auto coords = make_const(coord_maps<T>(input.q, H, W));
    x = concat_channels<T>({x, coords});
    for (int i = 4; i < 8; ++i) x = detail::apply_layer(m, specs[i], x);
    return flow_scale(x, m.max_disp);
}

// Encoder-decoder baseline: E2/E3 stride 2 (x4 bottleneck), feature
// connection at the bottleneck, nearest-neighbor x2 upsampling before D2 and
// before D4.
template <typename T>
NodePtrT<T> forward_flow_encdec(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    require(m.variant == ModelVariant::encdec,
            "forward_flow_encdec: params are not the encdec variant");
    input.validate();
    const auto specs = layer_specs(m.variant);
    const int H = input.image.shape[1], W = input.image.shape[2];
    require(H % 4 == 0 && W % 4 == 0, "encdec variant needs H, W divisible by 4");

    auto x = make_const(input.image);
    x = detail::apply_layer(m, specs[0], x);
    x = detail::apply_layer(m, specs[1], x, 2);
    x = detail::apply_layer(m, specs[2], x, 2);
    x = detail::apply_layer(m, specs[3], x);
    auto depth = make_const(detail::area_downsample(input.depth, 4));
    auto coords = make_const(detail::area_downsample(coord_maps<T>(input.q, H, W), 4));
    x = concat_channels<T>({x, depth, coords});
    x = detail::apply_layer(m, specs[4], x);
    x = upsample_nn2x(x);
    x = detail::apply_layer(m, specs[5], x);
    x = detail::apply_layer(m, specs[6], x);
    x = upsample_nn2x(x);
    x = detail::apply_layer(m, specs[7], x);
    return flow_scale(x, m.max_disp);
}

template <typename T>
NodePtrT<T> predict_flow(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    switch (m.variant) {
        case ModelVariant::full: return forward_flow(m, input);
        case ModelVariant::no_depth: return forward_flow_no_depth(m, input);
        case ModelVariant::encdec: return forward_flow_encdec(m, input);
    }
    throw std::logic_error("predict_flow: bad variant");
}

template <typename T>
struct SynthesisT {
    NodePtrT<T> flow;
    NodePtrT<T> image;
};

// Predicted flow plus differentiable backward warp of the input view.
template <typename T>
SynthesisT<T> synthesize_with_flow(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    auto flow = predict_flow(m, input);
    auto image = bilinear_warp(make_const(input.image), flow);
    return {flow, image};
}

template <typename T>
NodePtrT<T> synthesize(const ModelParamsT<T>& m, const ModelInputT<T>& input) {
    return synthesize_with_flow(m, input).image;
}

using ModelParams = ModelParamsT<float>;
using ModelInput = ModelInputT<float>;

}  // namespace frvs
