#pragma once

#include "frvs/autodiff.hpp"
#include "frvs/blas.hpp"

namespace frvs {

namespace detail {

template <typename T>
void im2col(const T* img, int C, int H, int W, int k, int pad, int stride, int Ho, int Wo,
            T* col) {
    // col is (C*k*k) x (Ho*Wo), zero padding outside the image
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < Ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        dst += Wo;
                        continue;
                    }
                    const T* src = img + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        *dst++ = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int pad, int stride, int Ho, int Wo,
                T* img) {
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < Ho; ++oy, src += Wo) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = img + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Cross-correlation with zero padding. Input C_in x H x W or B x C_in x H x W,
// weight C_out x C_in x k x k, bias C_out. pad must equal (k-1)/2 so that
// stride 1 preserves resolution.
template <typename T>
NodePtrT<T> conv2d(const NodePtrT<T>& input, const NodePtrT<T>& weight, const NodePtrT<T>& bias,
                   int padding, int stride = 1) {
    const auto& ws = weight->value.shape;
    require(ws.size() == 4, "conv2d: weight must be rank 4, got " + weight->value.shape_str());
    const int Cout = ws[0], Cin = ws[1], k = ws[2];
    require(ws[3] == k, "conv2d: kernel must be square");
    require(k % 2 == 1, "conv2d: even kernel size rejected");
    require(padding == (k - 1) / 2, "conv2d: padding must be (k-1)/2");
    require(stride >= 1, "conv2d: bad stride");
    require(bias->value.shape == std::vector<int>{Cout}, "conv2d: bias extent mismatch");

    const auto& is = input->value.shape;
    require(is.size() == 3 || is.size() == 4, "conv2d: input must be rank 3 or 4");
    const bool batched = is.size() == 4;
    const int B = batched ? is[0] : 1;
    require(is[batched ? 1 : 0] == Cin, "conv2d: input channels " +
                                            std::to_string(is[batched ? 1 : 0]) +
                                            " do not match weight " + std::to_string(Cin));
    const int H = is[batched ? 2 : 1], W = is[batched ? 3 : 2];
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    const int K = Cin * k * k;
    const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t in_plane = static_cast<std::size_t>(Cin) * H * W;

    std::vector<int> oshape = batched ? std::vector<int>{B, Cout, Ho, Wo}
                                      : std::vector<int>{Cout, Ho, Wo};
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(oshape));

    std::vector<T> col(static_cast<std::size_t>(K) * plane);
    for (int b = 0; b < B; ++b) {
        detail::im2col(input->value.data.data() + b * in_plane, Cin, H, W, k, padding, stride, Ho,
                       Wo, col.data());
        T* o = out->value.data.data() + b * Cout * plane;
        for (int c = 0; c < Cout; ++c)
            std::fill(o + c * plane, o + (c + 1) * plane, bias->value.data[c]);
        gemm(false, false, Cout, static_cast<int>(plane), K, T(1), weight->value.data.data(), K,
             col.data(), static_cast<int>(plane), T(1), o, static_cast<int>(plane));
    }
    out->value.check_finite("conv2d");

    if (input->needs_grad() || weight->needs_grad() || bias->needs_grad()) {
        out->parents = {input, weight, bias};
        auto in = input.get();
        auto w = weight.get();
        auto bi = bias.get();
        out->backward_fn = [=](NodeT<T>& self) {
            const bool need_in = in->needs_grad();
            const bool need_w = w->needs_grad();
            const bool need_b = bi->needs_grad();
            if (need_in) in->ensure_grad();
            if (need_w) w->ensure_grad();
            if (need_b) bi->ensure_grad();
            std::vector<T> col(static_cast<std::size_t>(K) * plane);
            std::vector<T> gcol;
            if (need_in) gcol.resize(col.size());
            for (int b = 0; b < B; ++b) {
                const T* go = self.grad.data.data() + b * Cout * plane;
                if (need_b) {
                    for (int c = 0; c < Cout; ++c) {
                        T s = 0;
                        const T* row = go + c * plane;
                        for (std::size_t i = 0; i < plane; ++i) s += row[i];
                        bi->grad.data[c] += s;
                    }
                }
                if (need_w) {
                    detail::im2col(in->value.data.data() + b * in_plane, Cin, H, W, k, padding,
                                   stride, Ho, Wo, col.data());
                    gemm(false, true, Cout, K, static_cast<int>(plane), T(1), go,
                         static_cast<int>(plane), col.data(), static_cast<int>(plane), T(1),
                         w->grad.data.data(), K);
                }
                if (need_in) {
                    gemm(true, false, K, static_cast<int>(plane), Cout, T(1),
                         w->value.data.data(), K, go, static_cast<int>(plane), T(0), gcol.data(),
                         static_cast<int>(plane));
                    detail::col2im_add(gcol.data(), Cin, H, W, k, padding, stride, Ho, Wo,
                                       in->grad.data.data() + b * in_plane);
                }
            }
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> relu(const NodePtrT<T>& x) {
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(x->value.shape));
    for (std::size_t i = 0; i < x->value.numel(); ++i)
        out->value.data[i] = x->value.data[i] > T(0) ? x->value.data[i] : T(0);
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (p->value.data[i] > T(0)) g.data[i] += self.grad.data[i];
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> tanh_op(const NodePtrT<T>& x) {
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(x->value.shape));
    for (std::size_t i = 0; i < x->value.numel(); ++i)
        out->value.data[i] = std::tanh(x->value.data[i]);
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        auto self_raw = out.get();
        out->backward_fn = [p, self_raw](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) {
                T t = self_raw->value.data[i];
                g.data[i] += self.grad.data[i] * (T(1) - t * t);
            }
        };
    }
    return out;
}

// Stacks C_i x H x W parts along the channel axis in argument order.
template <typename T>
NodePtrT<T> concat_channels(const std::vector<NodePtrT<T>>& parts) {
    require(!parts.empty(), "concat: no parts");
    const auto& s0 = parts[0]->value.shape;
    require(s0.size() == 3, "concat: parts must be C x H x W");
    const int H = s0[1], W = s0[2];
    int Ctot = 0;
    for (const auto& p : parts) {
        const auto& s = p->value.shape;
        require(s.size() == 3 && s[1] == H && s[2] == W,
                "concat: spatial mismatch " + p->value.shape_str());
        Ctot += s[0];
    }
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros({Ctot, H, W}));
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(), out->value.data.begin() + off);
        off += p->value.numel();
    }
    bool any = false;
    for (const auto& p : parts) any = any || p->needs_grad();
    if (any) {
        out->parents = parts;
        out->backward_fn = [](NodeT<T>& self) {
            std::size_t off = 0;
            for (auto& p : self.parents) {
                if (p->needs_grad()) {
                    auto& g = p->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[off + i];
                }
                off += p->value.numel();
            }
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> sum(const NodePtrT<T>& x) {
    T s = 0;
    for (T v : x->value.data) s += v;
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::scalar(s));
    out->value.check_finite("sum");
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            T go = self.grad.data[0];
            for (auto& v : g.data) v += go;
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> mean(const NodePtrT<T>& x) {
    const T inv = T(1) / static_cast<T>(x->value.numel());
    T s = 0;
    for (T v : x->value.data) s += v;
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::scalar(s * inv));
    out->value.check_finite("mean");
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p, inv](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            T go = self.grad.data[0] * inv;
            for (auto& v : g.data) v += go;
        };
    }
    return out;
}

// |x| with subgradient 0 at x == 0
template <typename T>
NodePtrT<T> abs_op(const NodePtrT<T>& x) {
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(x->value.shape));
    for (std::size_t i = 0; i < x->value.numel(); ++i)
        out->value.data[i] = std::abs(x->value.data[i]);
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) {
                T v = p->value.data[i];
                if (v > T(0)) g.data[i] += self.grad.data[i];
                else if (v < T(0)) g.data[i] -= self.grad.data[i];
            }
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> sub(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->value.same_shape(b->value),
            "sub: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(a->value.shape));
    for (std::size_t i = 0; i < a->value.numel(); ++i)
        out->value.data[i] = a->value.data[i] - b->value.data[i];
    out->value.check_finite("sub");
    if (a->needs_grad() || b->needs_grad()) {
        out->parents = {a, b};
        auto pa = a.get();
        auto pb = b.get();
        out->backward_fn = [pa, pb](NodeT<T>& self) {
            if (pa->needs_grad()) {
                auto& g = pa->ensure_grad();
                for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
            }
            if (pb->needs_grad()) {
                auto& g = pb->ensure_grad();
                for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] -= self.grad.data[i];
            }
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> add(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->value.same_shape(b->value),
            "add: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(a->value.shape));
    for (std::size_t i = 0; i < a->value.numel(); ++i)
        out->value.data[i] = a->value.data[i] + b->value.data[i];
    out->value.check_finite("add");
    if (a->needs_grad() || b->needs_grad()) {
        out->parents = {a, b};
        auto pa = a.get();
        auto pb = b.get();
        out->backward_fn = [pa, pb](NodeT<T>& self) {
            for (auto* p : {pa, pb}) {
                if (!p->needs_grad()) continue;
                auto& g = p->ensure_grad();
                for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
            }
        };
    }
    return out;
}

template <typename T>
NodePtrT<T> scale(const NodePtrT<T>& x, T c) {
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros(x->value.shape));
    for (std::size_t i = 0; i < x->value.numel(); ++i) out->value.data[i] = x->value.data[i] * c;
    out->value.check_finite("scale");
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p, c](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i] * c;
        };
    }
    return out;
}

// Nearest-neighbor 2x upsampling, C x H x W -> C x 2H x 2W.
template <typename T>
NodePtrT<T> upsample_nn2x(const NodePtrT<T>& x) {
    const auto& s = x->value.shape;
    require(s.size() == 3, "upsample: input must be C x H x W");
    const int C = s[0], H = s[1], W = s[2];
    auto out = std::make_shared<NodeT<T>>(TensorT<T>::zeros({C, 2 * H, 2 * W}));
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int x2 = 0; x2 < 2 * W; ++x2)
                out->value.at(c, y, x2) = x->value.at(c, y / 2, x2 / 2);
    if (x->needs_grad()) {
        out->parents = {x};
        auto p = x.get();
        out->backward_fn = [p, C, H, W](NodeT<T>& self) {
            auto& g = p->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int x2 = 0; x2 < 2 * W; ++x2)
                        g.at(c, y / 2, x2 / 2) += self.grad.at(c, y, x2);
        };
    }
    return out;
}

}  // namespace frvs
