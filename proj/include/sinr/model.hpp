// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sinr/layers.hpp"
#include "sinr/loss.hpp"
#include "sinr/rng.hpp"
#include "sinr/tensor.hpp"

namespace sinr {

// Block-structured CNN description: a stack of conv blocks followed by a
// fully connected head. Every conv block ends in a dropout layer, which is
// what the division point manipulates.
struct ConvBlockSpec {
    std::size_t conv_layers = 2;
    std::size_t out_channels = 16;
    bool has_pool = true;
    double dropout_rate = 0.0;
};

struct ModelSpec {
    std::size_t input_channels = 3;
    std::size_t input_height = 32;
    std::size_t input_width = 32;
    std::vector<ConvBlockSpec> blocks;
    std::vector<std::size_t> fc_units;   // hidden sizes then output size
    std::vector<double> fc_dropout;      // one rate per hidden fc layer

    // Shrunken three-block analogue of the reference five-block design.
    static ModelSpec desk_default() {
        ModelSpec s;
        s.blocks = {{2, 16, true, 0.0}, {2, 32, true, 0.0}, {2, 64, true, 0.0}};
        s.fc_units = {64, 10};
        s.fc_dropout = {0.0};
        return s;
    }

    void validate() const {
        if (input_channels == 0 || input_height == 0 || input_width == 0) {
            throw ConfigError("model spec: input dimensions must be positive");
        }
        if (blocks.size() < 2) {
            throw ConfigError("model spec: need at least 2 conv blocks for a division point");
        }
        for (const auto& b : blocks) {
            if (b.conv_layers == 0) throw ConfigError("model spec: block with zero conv layers");
            if (b.out_channels == 0) throw ConfigError("model spec: block with zero channels");
            if (!(b.dropout_rate >= 0.0 && b.dropout_rate < 1.0)) {
                throw ConfigError("model spec: block dropout rate must be in [0, 1)");
            }
        }
        if (fc_units.empty()) throw ConfigError("model spec: fc_units must not be empty");
        if (fc_dropout.size() + 1 != fc_units.size()) {
            throw ConfigError("model spec: need one fc dropout rate per hidden fc layer");
        }
        for (double r : fc_dropout) {
            if (!(r >= 0.0 && r < 1.0)) throw ConfigError("model spec: fc dropout rate must be in [0, 1)");
        }
    }

    // Uniform rate on every dropout layer (conv blocks and fc hidden layers).
    ModelSpec with_uniform_dropout(double r) const {
        ModelSpec s = *this;
        for (auto& b : s.blocks) b.dropout_rate = r;
        for (auto& d : s.fc_dropout) d = r;
        return s;
    }
};

// Division after conv block `index` (1-based).
struct DivisionPoint {
    std::size_t index = 1;
};

class Model {
public:
    std::vector<Layer> layers;
    std::array<std::size_t, 3> input_shape{};     // (C, H, W)
    std::vector<std::size_t> block_dropout_pos;   // layer index of each conv block's dropout

    std::size_t conv_block_count() const { return block_dropout_pos.size(); }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> ps;
        for (auto& l : layers) {
            if (l.has_params()) {
                ps.push_back(&l.weight);
                ps.push_back(&l.bias);
            }
        }
        return ps;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) {
            if (l.has_params()) n += l.weight.size() + l.bias.size();
        }
        return n;
    }

    void zero_grads() {
        for (auto& l : layers) {
            if (l.has_params()) {
                l.weight.grad();
                l.bias.grad();
                l.weight.zero_grad();
                l.bias.zero_grad();
            }
        }
    }

    void clear_caches() {
        for (auto& l : layers) l.clear_cache();
    }

    Tensor forward(const Tensor& input, Mode mode, RngStream& rng) {
        Tensor x = input;
        for (auto& l : layers) x = sinr::forward(l, x, mode, rng);
        return x;
    }

    // Propagates d loss / d logits back through the recorded forward.
    Tensor backward(const Tensor& grad_logits) {
        Tensor g = grad_logits;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = sinr::backward(*it, g);
        return g;
    }

    std::size_t predict(const Tensor& input, RngStream& rng) {
        Tensor logits = forward(input, Mode::Eval, rng);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        return best;
    }
};

inline Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    RngStream rng(seed);
    Model m;
    m.input_shape = {spec.input_channels, spec.input_height, spec.input_width};
    std::size_t channels = spec.input_channels;
    for (const auto& b : spec.blocks) {
        for (std::size_t k = 0; k < b.conv_layers; ++k) {
            m.layers.push_back(make_conv3x3(channels, b.out_channels, rng));
            m.layers.push_back(make_relu());
            channels = b.out_channels;
        }
        if (b.has_pool) m.layers.push_back(make_maxpool());
        m.layers.push_back(make_dropout(b.dropout_rate));
        m.block_dropout_pos.push_back(m.layers.size() - 1);
    }
    m.layers.push_back(make_flatten());
    // flat feature count going into the fc head
    std::vector<std::size_t> s{spec.input_channels, spec.input_height, spec.input_width};
    for (const auto& l : m.layers) s = infer_output_shape(l, s);
    std::size_t fan_in = s[0];
    for (std::size_t j = 0; j + 1 < spec.fc_units.size(); ++j) {
        m.layers.push_back(make_dense(fan_in, spec.fc_units[j], rng));
        m.layers.push_back(make_relu());
        m.layers.push_back(make_dropout(spec.fc_dropout[j]));
        fan_in = spec.fc_units[j];
    }
    m.layers.push_back(make_dense(fan_in, spec.fc_units.back(), rng));
    return m;
}

inline void check_division_point(const Model& m, DivisionPoint p) {
    if (p.index < 1 || p.index > m.conv_block_count()) {
        throw ConfigError("division point " + std::to_string(p.index) +
                          " out of range [1, " + std::to_string(m.conv_block_count()) + "]");
    }
}

// Sets the dropout rate at the end of conv block `point`; other rates are
// left alone.
inline void set_division_dropout(Model& m, DivisionPoint point, double rate) {
    check_division_point(m, point);
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("division dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    m.layers[m.block_dropout_pos[point.index - 1]].rate = rate;
}

inline double get_division_dropout(const Model& m, DivisionPoint point) {
    check_division_point(m, point);
    return m.layers[m.block_dropout_pos[point.index - 1]].rate;
}

enum class SubModelRole : std::uint8_t { Input = 1, Output = 2 };

// One half of a split model. Both halves carry the division metadata so the
// two endpoints agree on the intermediate element count.
struct SubModel {
    SubModelRole role;
    std::vector<Layer> layers;
    std::size_t division_index = 0;
    std::vector<std::size_t> intermediate_shape;  // (C, H, W) at the division point
    std::array<std::size_t, 3> model_input_shape{};

    std::size_t n_elem() const { return Tensor::count(intermediate_shape); }

    Tensor forward(const Tensor& input, RngStream& rng) {
        Tensor x = input;
        for (auto& l : layers) x = sinr::forward(l, x, Mode::Eval, rng);
        return x;
    }
};

struct SubModelPair {
    SubModel input_sub;
    SubModel output_sub;

    std::size_t n_elem() const { return input_sub.n_elem(); }
    const std::vector<std::size_t>& intermediate_shape() const {
        return input_sub.intermediate_shape;
    }

    // Eval-mode composition with no channel in between; bit-equal to the
    // unsplit model's Eval forward.
    Tensor forward(const Tensor& input, RngStream& rng) {
        Tensor mid = input_sub.forward(input, rng);
        return output_sub.forward(mid, rng);
    }

    std::size_t predict(const Tensor& input, RngStream& rng) {
        Tensor logits = forward(input, rng);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        return best;
    }
};

// Splits after conv block `point`, dropping the division dropout layer from
// both halves. Splitting is weight-agnostic.
inline SubModelPair split_at(const Model& m, DivisionPoint point) {
    check_division_point(m, point);
    const std::size_t drop_pos = m.block_dropout_pos[point.index - 1];

    SubModelPair pair;
    pair.input_sub.role = SubModelRole::Input;
    pair.output_sub.role = SubModelRole::Output;
    pair.input_sub.division_index = point.index;
    pair.output_sub.division_index = point.index;
    pair.input_sub.model_input_shape = m.input_shape;
    pair.output_sub.model_input_shape = m.input_shape;

    for (std::size_t i = 0; i < drop_pos; ++i) pair.input_sub.layers.push_back(m.layers[i]);
    for (std::size_t i = drop_pos + 1; i < m.layers.size(); ++i) {
        pair.output_sub.layers.push_back(m.layers[i]);
    }
    for (auto& l : pair.input_sub.layers) l.clear_cache();
    for (auto& l : pair.output_sub.layers) l.clear_cache();

    std::vector<std::size_t> s{m.input_shape[0], m.input_shape[1], m.input_shape[2]};
    for (std::size_t i = 0; i < drop_pos; ++i) s = infer_output_shape(m.layers[i], s);
    pair.input_sub.intermediate_shape = s;
    pair.output_sub.intermediate_shape = s;
    return pair;
}

}  // namespace sinr
