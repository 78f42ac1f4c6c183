// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/serialize.hpp"

namespace sinr {

// Datagram types. All multi-byte fields little-endian, bit-exact.
//   "SNR0"  session setup   (sender -> receiver, before timing starts)
//   "SNRA"  setup ack       (receiver -> sender, exactly once per setup seen)
//   "SNR1"  data packet     (header + element_count 32-bit floats)
//   "SNRF"  end of session  (sender -> receiver, best effort)

inline constexpr std::size_t kPacketHeaderSize = 16;
inline constexpr std::size_t kWireElementSize = 4;  // f32 on the wire

// 16-byte data packet header:
//   magic "SNR1" | session u16 | tensor u16 | start_slot u32 | count u16 | flags u16
struct PacketHeader {
    std::uint16_t session_id = 0;
    std::uint16_t tensor_id = 0;
    std::uint32_t start_slot = 0;     // first permuted slot index j carried
    std::uint16_t element_count = 0;  // floats in the payload
    std::uint16_t flags = 0;
};

struct Packet {
    PacketHeader header;
    std::vector<float> payload;
};

inline void encode_packet_header(ByteWriter& w, const PacketHeader& h) {
    w.magic("SNR1");
    w.u16(h.session_id);
    w.u16(h.tensor_id);
    w.u32(h.start_slot);
    w.u16(h.element_count);
    w.u16(h.flags);
}

inline std::vector<std::uint8_t> encode_packet(const Packet& p) {
    ByteWriter w;
    w.bytes.reserve(kPacketHeaderSize + p.payload.size() * kWireElementSize);
    encode_packet_header(w, p.header);
    for (float v : p.payload) w.f32(v);
    return std::move(w.bytes);
}

inline PacketHeader decode_packet_header(ByteReader& r) {
    r.expect_magic("SNR1", "data packet");
    PacketHeader h;
    h.session_id = r.u16();
    h.tensor_id = r.u16();
    h.start_slot = r.u32();
    h.element_count = r.u16();
    h.flags = r.u16();
    return h;
}

inline Packet decode_packet(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    Packet p;
    p.header = decode_packet_header(r);
    if (r.remaining() != std::size_t(p.header.element_count) * kWireElementSize) {
        throw FormatError("data packet: payload holds " + std::to_string(r.remaining() / 4) +
                          " elements, header says " + std::to_string(p.header.element_count));
    }
    p.payload.resize(p.header.element_count);
    for (auto& v : p.payload) v = r.f32();
    return p;
}

// Session setup: magic | session u16 | perm seed u64 | n_elem u32 | p_scale f32
struct SessionSetup {
    std::uint16_t session_id = 0;
    std::uint64_t perm_seed = 0;
    std::uint32_t n_elem = 0;
    float p_scale = 0.0f;
};

inline std::vector<std::uint8_t> encode_setup(const SessionSetup& s) {
    ByteWriter w;
    w.magic("SNR0");
    w.u16(s.session_id);
    w.u64(s.perm_seed);
    w.u32(s.n_elem);
    w.f32(s.p_scale);
    return std::move(w.bytes);
}

inline SessionSetup decode_setup(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("SNR0", "session setup");
    SessionSetup s;
    s.session_id = r.u16();
    s.perm_seed = r.u64();
    s.n_elem = r.u32();
    s.p_scale = r.f32();
    return s;
}

inline std::vector<std::uint8_t> encode_ack(std::uint16_t session_id) {
    ByteWriter w;
    w.magic("SNRA");
    w.u16(session_id);
    return std::move(w.bytes);
}

inline std::uint16_t decode_ack(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.expect_magic("SNRA", "setup ack");
    return r.u16();
}

inline std::vector<std::uint8_t> encode_fin(std::uint16_t session_id) {
    ByteWriter w;
    w.magic("SNRF");
    w.u16(session_id);
    return std::move(w.bytes);
}

// Peeks at the 4-byte type tag without consuming anything.
enum class DatagramType { Setup, Ack, Data, Fin, Unknown };

inline DatagramType classify_datagram(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) return DatagramType::Unknown;
    auto is = [&](const char* tag) { return std::memcmp(bytes.data(), tag, 4) == 0; };
    if (is("SNR0")) return DatagramType::Setup;
    if (is("SNRA")) return DatagramType::Ack;
    if (is("SNR1")) return DatagramType::Data;
    if (is("SNRF")) return DatagramType::Fin;
    return DatagramType::Unknown;
}

}  // namespace sinr
