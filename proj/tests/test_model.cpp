// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "sinr/model.hpp"
#include "sinr/serialize.hpp"

using namespace sinr;

namespace {

ModelSpec small_spec() {
    ModelSpec s;
    s.input_channels = 1;
    s.input_height = 8;
    s.input_width = 8;
    s.blocks = {{1, 4, true, 0.1}, {1, 6, true, 0.2}};
    s.fc_units = {12, 10};
    s.fc_dropout = {0.3};
    return s;
}

ModelSpec random_spec(RngStream& rng) {
    ModelSpec s;
    s.input_channels = 1 + rng.uniform_int(3);
    s.input_height = 16;
    s.input_width = 16;
    const std::size_t n_blocks = 2 + rng.uniform_int(2);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        ConvBlockSpec cb;
        cb.conv_layers = 1 + rng.uniform_int(2);
        cb.out_channels = 2 + rng.uniform_int(6);
        cb.has_pool = true;
        cb.dropout_rate = rng.uniform(0.0, 0.5);
        s.blocks.push_back(cb);
    }
    s.fc_units = {4 + rng.uniform_int(12), 2 + rng.uniform_int(8)};
    s.fc_dropout = {rng.uniform(0.0, 0.5)};
    return s;
}

Tensor random_input(const ModelSpec& spec, std::uint64_t seed) {
    Tensor x({spec.input_channels, spec.input_height, spec.input_width});
    RngStream rng(seed);
    for (auto& v : x.values()) v = rng.uniform(0.0, 1.0);
    return x;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("desk-scale default model builds and classifies shapes") {
    ModelSpec spec = ModelSpec::desk_default();
    Model m = build_model(spec, 7);
    REQUIRE(m.parameter_count() > 0);
    REQUIRE(m.conv_block_count() == 3);

    RngStream rng(1);
    Tensor x = random_input(spec, 2);
    Tensor logits = m.forward(x, Mode::Eval, rng);
    REQUIRE(logits.shape() == std::vector<std::size_t>{10});
    REQUIRE(logits.all_finite());
}

TEST_CASE("zero-rate spec still owns dropout layers, identity in eval") {
    ModelSpec spec = small_spec();
    for (auto& b : spec.blocks) b.dropout_rate = 0.0;
    spec.fc_dropout = {0.0};
    Model m = build_model(spec, 3);
    std::size_t dropouts = 0;
    for (const auto& l : m.layers) dropouts += l.kind == LayerKind::Dropout;
    REQUIRE(dropouts == 3);  // one per conv block + one fc hidden
    // dropout layers own no trainable parameters
    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Dropout) {
            REQUIRE(l.weight.size() == 0);
            REQUIRE(l.bias.size() == 0);
        }
    }
}

TEST_CASE("same seed builds bit-identical parameters") {
    ModelSpec spec = small_spec();
    Model a = build_model(spec, 99);
    Model b = build_model(spec, 99);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        REQUIRE(a.layers[i].weight.values() == b.layers[i].weight.values());
        REQUIRE(a.layers[i].bias.values() == b.layers[i].bias.values());
    }
}

TEST_CASE("invalid specs are configuration errors") {
    ModelSpec spec = small_spec();
    spec.blocks.resize(1);
    REQUIRE_THROWS_AS(build_model(spec, 1), ConfigError);

    spec = small_spec();
    spec.blocks[0].dropout_rate = 1.0;
    REQUIRE_THROWS_AS(build_model(spec, 1), ConfigError);

    spec = small_spec();
    spec.fc_dropout = {0.1, 0.1};
    REQUIRE_THROWS_AS(build_model(spec, 1), ConfigError);
}

TEST_CASE("set_division_dropout touches exactly one rate") {
    Model m = build_model(small_spec(), 5);
    set_division_dropout(m, {1}, 0.2);
    REQUIRE(get_division_dropout(m, {1}) == 0.2);
    REQUIRE(get_division_dropout(m, {2}) == 0.2);  // block 2 keeps its spec rate

    set_division_dropout(m, {1}, 0.4);
    set_division_dropout(m, {1}, 0.1);
    REQUIRE(get_division_dropout(m, {1}) == 0.1);  // last write wins

    REQUIRE_THROWS_AS(set_division_dropout(m, {1}, -0.5), ConfigError);
    REQUIRE_THROWS_AS(set_division_dropout(m, {3}, 0.1), ConfigError);
    REQUIRE_THROWS_AS(set_division_dropout(m, {0}, 0.1), ConfigError);
}

TEST_CASE("split composition reproduces the unsplit forward bit-wise") {
    RngStream meta(2024);
    for (int trial = 0; trial < 8; ++trial) {
        ModelSpec spec = random_spec(meta);
        Model m = build_model(spec, 1000 + trial);
        Tensor x = random_input(spec, 2000 + trial);
        RngStream rng(0);
        Tensor ref = m.forward(x, Mode::Eval, rng);
        for (std::size_t point = 1; point <= m.conv_block_count(); ++point) {
            SubModelPair pair = split_at(m, {point});
            Tensor out = pair.forward(x, rng);
            REQUIRE(out.values() == ref.values());
        }
    }
}

TEST_CASE("splitting never changes the parameter count") {
    RngStream meta(11);
    for (int trial = 0; trial < 5; ++trial) {
        ModelSpec spec = random_spec(meta);
        Model m = build_model(spec, 50 + trial);
        for (std::size_t point = 1; point <= m.conv_block_count(); ++point) {
            SubModelPair pair = split_at(m, {point});
            std::size_t n = 0;
            for (const auto& l : pair.input_sub.layers) {
                if (l.has_params()) n += l.weight.size() + l.bias.size();
            }
            for (const auto& l : pair.output_sub.layers) {
                if (l.has_params()) n += l.weight.size() + l.bias.size();
            }
            REQUIRE(n == m.parameter_count());
        }
    }
}

TEST_CASE("division metadata matches the shape arithmetic") {
    // 3x32x32 input, first block: 16 channels, one 2x2 pool -> (16, 16, 16)
    Model m = build_model(ModelSpec::desk_default(), 42);

    SubModelPair p1 = split_at(m, {1});
    REQUIRE(p1.intermediate_shape() == std::vector<std::size_t>{16, 16, 16});
    REQUIRE(p1.n_elem() == 4096);
    // 4-byte wire elements: 16 kB intermediate representation
    REQUIRE(p1.n_elem() * 4 == 16384);

    SubModelPair p3 = split_at(m, {3});
    REQUIRE(p3.intermediate_shape() == std::vector<std::size_t>{64, 4, 4});
    REQUIRE(p3.n_elem() == 64 * 4 * 4);
    // after the last conv block the count equals the flattened feature count
    REQUIRE(p3.output_sub.layers.front().kind == LayerKind::Flatten);

    REQUIRE_THROWS_AS(split_at(m, {0}), ConfigError);
    REQUIRE_THROWS_AS(split_at(m, {4}), ConfigError);

    // the division dropout appears in neither half
    for (const auto& l : p1.input_sub.layers) {
        if (l.kind == LayerKind::Dropout) FAIL("input half of block-1 split kept a dropout");
    }
    std::size_t out_dropouts = 0;
    for (const auto& l : p1.output_sub.layers) out_dropouts += l.kind == LayerKind::Dropout;
    std::size_t model_dropouts = 0;
    for (const auto& l : m.layers) model_dropouts += l.kind == LayerKind::Dropout;
    REQUIRE(out_dropouts == model_dropouts - 1);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ModelSpec spec = small_spec();
    Model m = build_model(spec, 77);
    auto bytes = encode_checkpoint(m);
    Model back = decode_checkpoint(bytes);

    REQUIRE(back.input_shape == m.input_shape);
    REQUIRE(back.block_dropout_pos == m.block_dropout_pos);
    REQUIRE(encode_checkpoint(back) == bytes);

    Tensor x = random_input(spec, 5);
    RngStream rng(0);
    Tensor a = m.forward(x, Mode::Eval, rng);
    Tensor b = back.forward(x, Mode::Eval, rng);
    REQUIRE(a.values() == b.values());
}

TEST_CASE("checkpoint file errors are distinct and informative") {
    auto bytes = encode_checkpoint(build_model(small_spec(), 1));

    SECTION("bad magic") {
        bytes[0] = 'X';
        REQUIRE_THROWS_AS(decode_checkpoint(bytes), FormatError);
    }
    SECTION("version mismatch") {
        bytes[4] = 0xff;
        REQUIRE_THROWS_AS(decode_checkpoint(bytes), FormatError);
    }
    SECTION("truncation") {
        bytes.resize(bytes.size() / 2);
        REQUIRE_THROWS_AS(decode_checkpoint(bytes), FormatError);
    }
}

TEST_CASE("sub-model files round-trip with role and checksum enforcement") {
    ModelSpec spec = small_spec();
    Model m = build_model(spec, 31);
    SubModelPair pair = split_at(m, {1});

    const std::string in_path = temp_path("sinr_test_input_sub.bin");
    const std::string out_path = temp_path("sinr_test_output_sub.bin");
    save_submodel(pair.input_sub, in_path);
    save_submodel(pair.output_sub, out_path);

    SubModel in = load_submodel(in_path, SubModelRole::Input);
    SubModel out = load_submodel(out_path, SubModelRole::Output);
    REQUIRE(in.division_index == 1);
    REQUIRE(in.intermediate_shape == pair.intermediate_shape());
    REQUIRE(out.intermediate_shape == pair.intermediate_shape());
    REQUIRE(in.n_elem() == pair.n_elem());

    Tensor x = random_input(spec, 8);
    RngStream rng(0);
    Tensor mid_mem = pair.input_sub.forward(x, rng);
    Tensor mid_file = in.forward(x, rng);
    REQUIRE(mid_mem.values() == mid_file.values());
    Tensor final_mem = pair.output_sub.forward(mid_mem, rng);
    Tensor final_file = out.forward(mid_file, rng);
    REQUIRE(final_mem.values() == final_file.values());

    SECTION("role mismatch") {
        REQUIRE_THROWS_AS(load_submodel(in_path, SubModelRole::Output), RoleMismatchError);
    }
    SECTION("payload corruption -> checksum error") {
        auto bytes = read_file(in_path);
        bytes[bytes.size() / 2] ^= 0x01;
        REQUIRE_THROWS_AS(decode_submodel(bytes, SubModelRole::Input), ChecksumError);
    }
    SECTION("truncated file") {
        auto bytes = read_file(in_path);
        bytes.resize(bytes.size() - 5);
        REQUIRE_THROWS_AS(decode_submodel(bytes, SubModelRole::Input), FormatError);
    }

    std::remove(in_path.c_str());
    std::remove(out_path.c_str());
}
