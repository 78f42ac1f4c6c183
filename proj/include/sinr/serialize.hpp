// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/model.hpp"

namespace sinr {

// All file and wire integers are little-endian, assembled by hand so the
// format does not depend on host byte order.
class ByteWriter {
public:
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void magic(const char tag[5]) { raw(tag, 4); }
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::vector<std::uint8_t>& v) : ByteReader(v.data(), v.size()) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_magic(const char tag[5], const char* what) {
        need(4);
        if (std::memcmp(data_ + pos_, tag, 4) != 0) {
            throw FormatError(std::string(what) + ": bad magic, expected \"" + tag + "\"");
        }
        pos_ += 4;
    }

    const std::uint8_t* cursor() const { return data_ + pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw FormatError("truncated input: wanted " + std::to_string(n) +
                                                " bytes at offset " + std::to_string(pos_));
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

// CRC-32 (IEEE), reflected form. Table-based; kept local so the header-only
// library needs no link dependency.
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = ~seed;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return ~c;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("short write to " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw FormatError("cannot open " + path);
    auto size = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!f) throw FormatError("short read from " + path);
    return bytes;
}

inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor(ByteWriter& w, const Tensor& t) {
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.f64(v);
}

inline Tensor read_tensor(ByteReader& r) {
    std::size_t rank = r.u8();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<double> data(Tensor::count(shape));
    for (auto& v : data) v = r.f64();
    return Tensor(std::move(shape), std::move(data));
}

inline void write_layer(ByteWriter& w, const Layer& l) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    switch (l.kind) {
        case LayerKind::Dense:
        case LayerKind::Conv3x3:
            write_tensor(w, l.weight);
            write_tensor(w, l.bias);
            break;
        case LayerKind::Dropout:
            w.f64(l.rate);
            break;
        default:
            break;
    }
}

inline Layer read_layer(ByteReader& r) {
    auto kind = static_cast<LayerKind>(r.u8());
    Layer l{kind};
    switch (kind) {
        case LayerKind::Dense:
        case LayerKind::Conv3x3:
            l.weight = read_tensor(r);
            l.bias = read_tensor(r);
            break;
        case LayerKind::Dropout:
            l.rate = r.f64();
            if (!(l.rate >= 0.0 && l.rate < 1.0)) {
                throw FormatError("dropout rate out of range in file");
            }
            break;
        case LayerKind::MaxPool2x2:
        case LayerKind::ReLU:
        case LayerKind::Flatten:
            break;
        default:
            throw FormatError("unknown layer kind tag " + std::to_string(static_cast<int>(kind)));
    }
    return l;
}

inline void write_layer_list(ByteWriter& w, const std::vector<Layer>& layers) {
    w.u16(static_cast<std::uint16_t>(layers.size()));
    for (const auto& l : layers) write_layer(w, l);
}

inline std::vector<Layer> read_layer_list(ByteReader& r) {
    std::size_t n = r.u16();
    std::vector<Layer> layers;
    layers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) layers.push_back(read_layer(r));
    return layers;
}

}  // namespace detail

// Full-model checkpoint: magic "SINR", version, input dims, then the layer
// list with raw 64-bit little-endian parameters. Round-trips bit-exactly.
inline std::vector<std::uint8_t> encode_checkpoint(const Model& m) {
    ByteWriter w;
    w.magic("SINR");
    w.u16(kCheckpointVersion);
    for (std::size_t d : m.input_shape) w.u32(static_cast<std::uint32_t>(d));
    detail::write_layer_list(w, m.layers);
    return std::move(w.bytes);
}

inline Model decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("SINR", "checkpoint");
    std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint version " + std::to_string(version) +
                          " not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Model m;
    for (auto& d : m.input_shape) d = r.u32();
    m.layers = detail::read_layer_list(r);
    bool in_conv_section = true;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (m.layers[i].kind == LayerKind::Flatten) in_conv_section = false;
        if (in_conv_section && m.layers[i].kind == LayerKind::Dropout) {
            m.block_dropout_pos.push_back(i);
        }
    }
    return m;
}

inline void save_checkpoint(const Model& m, const std::string& path) {
    write_file(path, encode_checkpoint(m));
}

inline Model load_checkpoint(const std::string& path) {
    return decode_checkpoint(read_file(path));
}

// Sub-model file: the checkpoint container plus a role tag, the division
// index, the intermediate shape, and a CRC32 over the layer payload.
inline std::vector<std::uint8_t> encode_submodel(const SubModel& s) {
    ByteWriter w;
    w.magic("SINR");
    w.u16(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(s.role));
    w.u16(static_cast<std::uint16_t>(s.division_index));
    w.u8(static_cast<std::uint8_t>(s.intermediate_shape.size()));
    for (std::size_t d : s.intermediate_shape) w.u32(static_cast<std::uint32_t>(d));

    ByteWriter payload;
    for (std::size_t d : s.model_input_shape) payload.u32(static_cast<std::uint32_t>(d));
    detail::write_layer_list(payload, s.layers);

    w.u32(static_cast<std::uint32_t>(payload.bytes.size()));
    w.raw(payload.bytes.data(), payload.bytes.size());
    w.u32(crc32(payload.bytes.data(), payload.bytes.size()));
    return std::move(w.bytes);
}

inline SubModel decode_submodel(const std::vector<std::uint8_t>& bytes, SubModelRole expected) {
    ByteReader r(bytes);
    r.expect_magic("SINR", "sub-model");
    std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw FormatError("sub-model version " + std::to_string(version) + " not supported");
    }
    auto role = static_cast<SubModelRole>(r.u8());
    if (role != SubModelRole::Input && role != SubModelRole::Output) {
        throw FormatError("sub-model: unknown role tag");
    }
    if (role != expected) {
        throw RoleMismatchError(std::string("sub-model role mismatch: file holds the ") +
                                (role == SubModelRole::Input ? "input" : "output") +
                                " half but the " +
                                (expected == SubModelRole::Input ? "input" : "output") +
                                " half was requested");
    }
    SubModel s;
    s.role = role;
    s.division_index = r.u16();
    std::size_t rank = r.u8();
    s.intermediate_shape.resize(rank);
    for (auto& d : s.intermediate_shape) d = r.u32();

    std::size_t payload_len = r.u32();
    if (r.remaining() < payload_len + 4) {
        throw FormatError("sub-model: truncated payload");
    }
    const std::uint8_t* payload = r.cursor();
    r.skip(payload_len);
    std::uint32_t stored = r.u32();
    if (stored != crc32(payload, payload_len)) {
        throw ChecksumError("sub-model: payload CRC mismatch");
    }
    ByteReader pr(payload, payload_len);
    for (auto& d : s.model_input_shape) d = pr.u32();
    s.layers = detail::read_layer_list(pr);
    return s;
}

inline void save_submodel(const SubModel& s, const std::string& path) {
    write_file(path, encode_submodel(s));
}

inline SubModel load_submodel(const std::string& path, SubModelRole expected) {
    return decode_submodel(read_file(path), expected);
}

}  // namespace sinr
