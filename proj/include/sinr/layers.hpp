// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/rng.hpp"
#include "sinr/tensor.hpp"

namespace sinr {

enum class LayerKind : std::uint8_t {
    Dense = 1,
    Conv3x3 = 2,     // 3x3 kernel, stride 1, zero padding 1
    MaxPool2x2 = 3,  // 2x2 window, stride 2
    ReLU = 4,
    Flatten = 5,
    Dropout = 6,     // inverted dropout
};

enum class Mode { Train, Eval };

inline const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv3x3: return "Conv3x3";
        case LayerKind::MaxPool2x2: return "MaxPool2x2";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Dropout: return "Dropout";
    }
    return "?";
}

// One network layer. Parameters and the per-forward cache live together; the
// cache is only written by Train-mode forwards and consumed by backward.
struct Layer {
    LayerKind kind;
    Tensor weight;      // Dense: (fan_in, fan_out); Conv3x3: (out_ch, in_ch, 3, 3)
    Tensor bias;        // Dense: (fan_out); Conv3x3: (out_ch)
    double rate = 0.0;  // Dropout only, in [0, 1)

    // backward state
    Tensor cached_input;
    std::vector<double> dropout_mask;    // 0/1 per element
    std::vector<std::size_t> pool_argmax;  // input flat index per output element
    bool has_cache = false;

    bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv3x3; }

    void clear_cache() {
        cached_input = Tensor();
        dropout_mask.clear();
        pool_argmax.clear();
        has_cache = false;
    }
};

inline Layer make_dense(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    Layer l{LayerKind::Dense};
    l.weight = Tensor({fan_in, fan_out});
    l.bias = Tensor({fan_out});
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));  // He-uniform
    for (auto& w : l.weight.values()) w = rng.uniform(-limit, limit);
    return l;
}

inline Layer make_conv3x3(std::size_t in_ch, std::size_t out_ch, RngStream& rng) {
    Layer l{LayerKind::Conv3x3};
    l.weight = Tensor({out_ch, in_ch, 3, 3});
    l.bias = Tensor({out_ch});
    double limit = std::sqrt(6.0 / static_cast<double>(in_ch * 9));
    for (auto& w : l.weight.values()) w = rng.uniform(-limit, limit);
    return l;
}

inline Layer make_maxpool() { return Layer{LayerKind::MaxPool2x2}; }
inline Layer make_relu() { return Layer{LayerKind::ReLU}; }
inline Layer make_flatten() { return Layer{LayerKind::Flatten}; }

inline Layer make_dropout(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    Layer l{LayerKind::Dropout};
    l.rate = rate;
    return l;
}

// Output shape for a given input shape, without running the layer.
inline std::vector<std::size_t> infer_output_shape(const Layer& l,
                                                   const std::vector<std::size_t>& in) {
    switch (l.kind) {
        case LayerKind::Dense: {
            if (in.size() != 1 || in[0] != l.weight.shape()[0]) {
                throw ShapeError("Dense: expected flat input of " +
                                 std::to_string(l.weight.shape()[0]) + " elements");
            }
            return {l.weight.shape()[1]};
        }
        case LayerKind::Conv3x3: {
            if (in.size() != 3 || in[0] != l.weight.shape()[1]) {
                throw ShapeError("Conv3x3: expected (in_ch, H, W) input with in_ch = " +
                                 std::to_string(l.weight.shape()[1]));
            }
            return {l.weight.shape()[0], in[1], in[2]};
        }
        case LayerKind::MaxPool2x2: {
            if (in.size() != 3) throw ShapeError("MaxPool2x2: expected (C, H, W) input");
            return {in[0], in[1] / 2, in[2] / 2};
        }
        case LayerKind::Flatten:
            return {Tensor::count(in)};
        case LayerKind::ReLU:
        case LayerKind::Dropout:
            return in;
    }
    throw Error("unknown layer kind");
}

namespace detail {

inline Tensor dense_forward(Layer& l, const Tensor& x) {
    const std::size_t fan_in = l.weight.shape()[0];
    const std::size_t fan_out = l.weight.shape()[1];
    if (x.rank() != 1 || x.size() != fan_in) {
        throw ShapeError("Dense forward: expected (" + std::to_string(fan_in) + "), got " +
                         x.shape_str());
    }
    Tensor y({fan_out});
    const double* w = l.weight.data();
    for (std::size_t o = 0; o < fan_out; ++o) y[o] = l.bias[o];
    for (std::size_t i = 0; i < fan_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wrow = w + i * fan_out;
        for (std::size_t o = 0; o < fan_out; ++o) y[o] += xi * wrow[o];
    }
    return y;
}

inline Tensor dense_backward(Layer& l, const Tensor& gy) {
    const Tensor& x = l.cached_input;
    const std::size_t fan_in = l.weight.shape()[0];
    const std::size_t fan_out = l.weight.shape()[1];
    require_shape(gy, {fan_out}, "Dense backward");
    auto& gw = l.weight.grad();
    auto& gb = l.bias.grad();
    Tensor gx({fan_in});
    const double* w = l.weight.data();
    for (std::size_t o = 0; o < fan_out; ++o) gb[o] += gy[o];
    for (std::size_t i = 0; i < fan_in; ++i) {
        const double xi = x[i];
        const double* wrow = w + i * fan_out;
        double* gwrow = gw.data() + i * fan_out;
        double acc = 0.0;
        for (std::size_t o = 0; o < fan_out; ++o) {
            acc += wrow[o] * gy[o];
            gwrow[o] += xi * gy[o];
        }
        gx[i] = acc;
    }
    return gx;
}

inline Tensor conv_forward(Layer& l, const Tensor& x) {
    const auto& ws = l.weight.shape();
    const std::size_t out_ch = ws[0], in_ch = ws[1];
    if (x.rank() != 3 || x.shape()[0] != in_ch) {
        throw ShapeError("Conv3x3 forward: expected (" + std::to_string(in_ch) +
                         ", H, W), got " + x.shape_str());
    }
    const std::size_t h = x.shape()[1], w = x.shape()[2];
    Tensor y({out_ch, h, w});
    const double* xd = x.data();
    double* yd = y.data();
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        double* yplane = yd + oc * h * w;
        const double b = l.bias[oc];
        for (std::size_t i = 0; i < h * w; ++i) yplane[i] = b;
        for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const double* xplane = xd + ic * h * w;
            const double* kern = l.weight.data() + (oc * in_ch + ic) * 9;
            for (int kr = 0; kr < 3; ++kr) {
                for (int kc = 0; kc < 3; ++kc) {
                    const double wv = kern[kr * 3 + kc];
                    if (wv == 0.0) continue;
                    // input row r+kr-1, col c+kc-1; zero padding outside
                    const int r0 = std::max(0, 1 - kr);
                    const int r1 = static_cast<int>(h) - std::max(0, kr - 1);
                    const int cshift = kc - 1;
                    for (int r = r0; r < r1; ++r) {
                        const double* xrow = xplane + (r + kr - 1) * w;
                        double* yrow = yplane + r * w;
                        const int c0 = std::max(0, -cshift);
                        const int c1 = static_cast<int>(w) - std::max(0, cshift);
                        for (int c = c0; c < c1; ++c) yrow[c] += wv * xrow[c + cshift];
                    }
                }
            }
        }
    }
    return y;
}

inline Tensor conv_backward(Layer& l, const Tensor& gy) {
    const Tensor& x = l.cached_input;
    const auto& ws = l.weight.shape();
    const std::size_t out_ch = ws[0], in_ch = ws[1];
    const std::size_t h = x.shape()[1], w = x.shape()[2];
    require_shape(gy, {out_ch, h, w}, "Conv3x3 backward");
    auto& gw = l.weight.grad();
    auto& gb = l.bias.grad();
    Tensor gx(x.shape());
    const double* xd = x.data();
    const double* gyd = gy.data();
    double* gxd = gx.data();
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double* gyplane = gyd + oc * h * w;
        double bacc = 0.0;
        for (std::size_t i = 0; i < h * w; ++i) bacc += gyplane[i];
        gb[oc] += bacc;
        for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const double* xplane = xd + ic * h * w;
            double* gxplane = gxd + ic * h * w;
            const double* kern = l.weight.data() + (oc * in_ch + ic) * 9;
            double* gkern = gw.data() + (oc * in_ch + ic) * 9;
            for (int kr = 0; kr < 3; ++kr) {
                for (int kc = 0; kc < 3; ++kc) {
                    const double wv = kern[kr * 3 + kc];
                    double wacc = 0.0;
                    const int r0 = std::max(0, 1 - kr);
                    const int r1 = static_cast<int>(h) - std::max(0, kr - 1);
                    const int cshift = kc - 1;
                    for (int r = r0; r < r1; ++r) {
                        const double* xrow = xplane + (r + kr - 1) * w;
                        double* gxrow = gxplane + (r + kr - 1) * w;
                        const double* gyrow = gyplane + r * w;
                        const int c0 = std::max(0, -cshift);
                        const int c1 = static_cast<int>(w) - std::max(0, cshift);
                        for (int c = c0; c < c1; ++c) {
                            wacc += gyrow[c] * xrow[c + cshift];
                            gxrow[c + cshift] += wv * gyrow[c];
                        }
                    }
                    gkern[kr * 3 + kc] += wacc;
                }
            }
        }
    }
    return gx;
}

inline Tensor maxpool_forward(Layer& l, const Tensor& x, bool record) {
    if (x.rank() != 3) throw ShapeError("MaxPool2x2 forward: expected (C, H, W), got " + x.shape_str());
    const std::size_t ch = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const std::size_t ho = h / 2, wo = w / 2;
    Tensor y({ch, ho, wo});
    if (record) l.pool_argmax.assign(ch * ho * wo, 0);
    const double* xd = x.data();
    double* yd = y.data();
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t r = 0; r < ho; ++r) {
            for (std::size_t q = 0; q < wo; ++q) {
                std::size_t base = (c * h + 2 * r) * w + 2 * q;
                std::size_t best = base;
                double bv = xd[base];
                const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
                for (std::size_t k : cand) {
                    if (xd[k] > bv) {
                        bv = xd[k];
                        best = k;
                    }
                }
                std::size_t oi = (c * ho + r) * wo + q;
                yd[oi] = bv;
                if (record) l.pool_argmax[oi] = best;
            }
        }
    }
    return y;
}

inline Tensor maxpool_backward(Layer& l, const Tensor& gy) {
    Tensor gx(l.cached_input.shape());
    if (gy.size() != l.pool_argmax.size()) {
        throw ShapeError("MaxPool2x2 backward: gradient shape " + gy.shape_str() +
                         " does not match recorded forward");
    }
    for (std::size_t i = 0; i < gy.size(); ++i) gx[l.pool_argmax[i]] += gy[i];
    return gx;
}

}  // namespace detail

// Runs one layer. Train mode records the backward cache and draws dropout
// masks from rng; Eval mode leaves dropout as the exact identity.
inline Tensor forward(Layer& l, const Tensor& input, Mode mode, RngStream& rng) {
    const bool record = (mode == Mode::Train);
    Tensor out;
    switch (l.kind) {
        case LayerKind::Dense:
            out = detail::dense_forward(l, input);
            break;
        case LayerKind::Conv3x3:
            out = detail::conv_forward(l, input);
            break;
        case LayerKind::MaxPool2x2:
            out = detail::maxpool_forward(l, input, record);
            break;
        case LayerKind::ReLU: {
            out = input;
            for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
            break;
        }
        case LayerKind::Flatten:
            out = Tensor({input.size()}, input.values());
            break;
        case LayerKind::Dropout: {
            if (mode == Mode::Eval) {
                out = input;
            } else {
                const double keep = 1.0 - l.rate;
                const double scale = 1.0 / keep;
                out = input;
                if (record) l.dropout_mask.assign(input.size(), 0.0);
                for (std::size_t i = 0; i < out.size(); ++i) {
                    if (rng.bernoulli(keep)) {
                        out[i] *= scale;
                        if (record) l.dropout_mask[i] = 1.0;
                    } else {
                        out[i] = 0.0;
                    }
                }
            }
            break;
        }
    }
    if (record) {
        l.cached_input = input;
        l.has_cache = true;
    }
    return out;
}

// Gradient of the recorded forward. Parameter gradients accumulate (+=) so a
// minibatch can sum over samples before the optimizer step.
inline Tensor backward(Layer& l, const Tensor& grad_out) {
    if (!l.has_cache) {
        throw Error(std::string("backward(") + kind_name(l.kind) +
                    ") called without a recorded Train-mode forward");
    }
    switch (l.kind) {
        case LayerKind::Dense:
            return detail::dense_backward(l, grad_out);
        case LayerKind::Conv3x3:
            return detail::conv_backward(l, grad_out);
        case LayerKind::MaxPool2x2:
            return detail::maxpool_backward(l, grad_out);
        case LayerKind::ReLU: {
            const Tensor& x = l.cached_input;
            if (grad_out.size() != x.size()) {
                throw ShapeError("ReLU backward: gradient shape mismatch");
            }
            Tensor gx(x.shape());
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
            return gx;
        }
        case LayerKind::Flatten: {
            return Tensor(l.cached_input.shape(), grad_out.values());
        }
        case LayerKind::Dropout: {
            const double scale = 1.0 / (1.0 - l.rate);
            if (grad_out.size() != l.dropout_mask.size()) {
                throw ShapeError("Dropout backward: gradient shape mismatch");
            }
            Tensor gx(l.cached_input.shape());
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] = grad_out[i] * l.dropout_mask[i] * scale;
            }
            return gx;
        }
    }
    throw Error("unknown layer kind");
}

}  // namespace sinr
