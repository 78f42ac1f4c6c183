// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "sinr/channel.hpp"
#include "sinr/wire.hpp"

using namespace sinr;

namespace {

// doubles that survive the f32 wire untouched
std::vector<double> wire_exact_vector(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(static_cast<float>(rng.uniform(-4.0, 4.0)));
    return v;
}

ChannelConfig default_cfg(double p, std::uint64_t seed = 9) {
    ChannelConfig cfg;
    cfg.loss_rate = p;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("channel config derives s and T from the defaults") {
    ChannelConfig cfg;
    REQUIRE(cfg.packet_size == 500);
    REQUIRE(cfg.throughput_bps == 9.0e6);
    REQUIRE(cfg.elements_per_packet() == 121);  // (500 - 16) / 4
    REQUIRE(cfg.packet_time_s() == Catch::Approx(4000.0 / 9.0e6).epsilon(1e-15));
    REQUIRE(cfg.packets_for(4096) == 34);

    ChannelConfig bad = cfg;
    bad.loss_rate = 1.0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.packet_size = 16;
    REQUIRE_THROWS_AS(bad.elements_per_packet(), ConfigError);
}

TEST_CASE("permutation is a seed-reproducible bijection") {
    for (std::uint64_t seed : {1ull, 77ull, 948302ull}) {
        Permutation a(seed, 1000), b(seed, 1000);
        std::vector<bool> seen(1000, false);
        for (std::size_t j = 0; j < 1000; ++j) {
            REQUIRE(a[j] == b[j]);
            REQUIRE(a[j] < 1000);
            REQUIRE_FALSE(seen[a[j]]);
            seen[a[j]] = true;
        }
    }
}

TEST_CASE("mask channel") {
    SECTION("p = 0 is the identity") {
        RngStream rng(4);
        std::vector<double> x{1.5, -2.5, 0.25, 9.0};
        REQUIRE(mask_channel(x, 0.0, rng) == x);
    }
    SECTION("p = 0.5 keeps about half of 1e6 elements") {
        RngStream rng(5);
        std::vector<double> x(1000000, 1.0);
        auto y = mask_channel(x, 0.5, rng);
        double kept = 0;
        for (double v : y) kept += v != 0.0;
        kept /= static_cast<double>(x.size());
        REQUIRE(kept > 0.497);  // binomial 3-sigma is about 0.0015
        REQUIRE(kept < 0.503);
    }
    SECTION("survivors keep their exact value at p = 0.9") {
        RngStream rng(6);
        std::vector<double> x(10000, 1.0);
        auto y = mask_channel(x, 0.9, rng);
        for (double v : y) REQUIRE((v == 0.0 || v == 1.0));
    }
    SECTION("p outside [0,1) is rejected") {
        RngStream rng(7);
        std::vector<double> x{1.0};
        REQUIRE_THROWS_AS(mask_channel(x, 1.0, rng), ConfigError);
    }
}

TEST_CASE("packetize splits 4096 elements into 34 packets at l = 500") {
    auto y = wire_exact_vector(4096, 21);
    ChannelConfig cfg = default_cfg(0.0);
    Permutation perm(123, y.size());
    auto packets = packetize(y, perm, cfg, 7, 3);

    REQUIRE(packets.size() == 34);
    for (std::size_t i = 0; i + 1 < packets.size(); ++i) {
        REQUIRE(packets[i].payload.size() == 121);
        REQUIRE(packets[i].header.start_slot == i * 121);
    }
    REQUIRE(packets.back().payload.size() == 4096 - 33 * 121);  // 103
    REQUIRE(packets.back().payload.size() == 103);

    // every element appears exactly once across packets
    std::vector<int> hits(y.size(), 0);
    for (const auto& pk : packets) {
        for (std::size_t k = 0; k < pk.payload.size(); ++k) {
            ++hits[perm[pk.header.start_slot + k]];
        }
    }
    for (int h : hits) REQUIRE(h == 1);
}

TEST_CASE("identity permutation with n = s gives one packet equal to the vector") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(cfg.elements_per_packet(), 22);
    Permutation perm = Permutation::identity(y.size());
    auto packets = packetize(y, perm, cfg);
    REQUIRE(packets.size() == 1);
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(static_cast<double>(packets[0].payload[i]) == y[i]);
    }
}

TEST_CASE("packetize/reconstruct round-trip with zero loss is exact") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(500, 23);
    Permutation perm(99, y.size());
    auto packets = packetize(y, perm, cfg);
    auto rec = reconstruct(packets, perm, y.size(), 0.0);
    REQUIRE(rec.values == y);
    for (auto m : rec.mask) REQUIRE(m == 1);
}

TEST_CASE("drop_packets") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(484, 31);
    Permutation perm(7, y.size());
    auto packets = packetize(y, perm, cfg);  // 4 packets

    SECTION("p = 0 keeps everything") {
        RngStream rng(1);
        REQUIRE(drop_packets(packets, 0.0, rng).size() == packets.size());
    }

    SECTION("near-total loss still reconstructs (usually all zero)") {
        RngStream rng(2);
        auto rec = reconstruct(drop_packets(packets, 0.999, rng), perm, y.size(), 0.5);
        REQUIRE(rec.values.size() == y.size());
        for (std::size_t i = 0; i < rec.mask.size(); ++i) {
            if (!rec.mask[i]) REQUIRE(rec.values[i] == 0.0);
        }
    }

    SECTION("received count over 1e5 trials matches Binomial(4, 0.5)") {
        RngStream rng(3);
        const std::size_t trials = 100000;
        std::array<std::size_t, 5> hist{};
        for (std::size_t t = 0; t < trials; ++t) {
            ++hist[drop_packets(packets, 0.5, rng).size()];
        }
        const double expect[5] = {trials / 16.0, trials * 4 / 16.0, trials * 6 / 16.0,
                                  trials * 4 / 16.0, trials / 16.0};
        double chi2 = 0.0;
        for (int k = 0; k <= 4; ++k) {
            const double d = static_cast<double>(hist[k]) - expect[k];
            chi2 += d * d / expect[k];
        }
        REQUIRE(chi2 < 13.2767);  // chi-square 99th percentile, 4 dof
    }
}

TEST_CASE("permuted packet loss spreads element loss uniformly") {
    ChannelConfig cfg = default_cfg(0.5);
    const std::size_t n = 484;  // 4 packets
    auto y = wire_exact_vector(n, 41);
    const double p = 0.5;
    const std::size_t trials = 3000;
    std::vector<std::size_t> lost(n, 0);
    for (std::size_t t = 0; t < trials; ++t) {
        Permutation perm(5000 + t, n);  // fresh random permutation per trial
        RngStream rng = RngStream(60).derive(t);
        auto kept = drop_packets(packetize(y, perm, cfg), p, rng);
        auto rec = reconstruct(kept, perm, n, p);
        for (std::size_t i = 0; i < n; ++i) lost[i] += !rec.mask[i];
    }
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    std::size_t outside = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double freq = static_cast<double>(lost[i]) / static_cast<double>(trials);
        if (std::abs(freq - p) > 3 * sigma) ++outside;
    }
    REQUIRE(outside <= n / 100 + 2);  // ~0.27% expected beyond 3 sigma
}

TEST_CASE("reconstruct applies the nominal scale to received elements only") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(242, 51);
    Permutation perm(3, y.size());
    auto packets = packetize(y, perm, cfg);

    SECTION("zero loss, p_scale 0.2 multiplies by 1/(1 - 0.2)") {
        auto rec = reconstruct(packets, perm, y.size(), 0.2);
        const double scale = 1.0 / (1.0 - 0.2);
        for (std::size_t i = 0; i < y.size(); ++i) {
            REQUIRE(rec.values[i] == y[i] * scale);
            REQUIRE(rec.values[i] == Catch::Approx(y[i] * 1.25).epsilon(1e-12));
        }
    }

    SECTION("unreceived slots are exactly zero before and after scaling") {
        std::vector<Packet> partial{packets[0]};
        auto rec = reconstruct(partial, perm, y.size(), 0.4);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!rec.mask[i]) REQUIRE(rec.values[i] == 0.0);
        }
        REQUIRE(rec.received_packets == 1);
        REQUIRE(rec.received_elements() == packets[0].payload.size());
    }

    SECTION("duplicate packets are idempotent") {
        std::vector<Packet> dup = packets;
        dup.push_back(packets[0]);
        auto once = reconstruct(packets, perm, y.size(), 0.1);
        auto twice = reconstruct(dup, perm, y.size(), 0.1);
        REQUIRE(once.values == twice.values);
    }

    SECTION("conflicting payloads are an integrity error") {
        std::vector<Packet> bad = packets;
        Packet corrupt = packets[0];
        corrupt.payload[0] += 1.0f;
        bad.push_back(corrupt);
        REQUIRE_THROWS_AS(reconstruct(bad, perm, y.size(), 0.1), IntegrityError);
    }

    SECTION("unknown session or tensor id is a protocol error") {
        std::vector<Packet> mixed = packets;
        mixed[1].header.session_id = 999 & 0xffff;
        REQUIRE_THROWS_AS(reconstruct(mixed, perm, y.size(), 0.1), ProtocolError);

        std::vector<Packet> wrong_tensor = packets;
        wrong_tensor[1].header.tensor_id = 5;
        REQUIRE_THROWS_AS(reconstruct(wrong_tensor, perm, y.size(), 0.1), ProtocolError);

        REQUIRE_THROWS_AS(
            reconstruct(packets, perm, y.size(), 0.1, ChannelConfig::ScaleMode::Nominal,
                        std::uint16_t{42}, std::nullopt),
            ProtocolError);
    }

    SECTION("slots beyond n_elem are a protocol error") {
        std::vector<Packet> bad = packets;
        bad[0].header.start_slot = static_cast<std::uint32_t>(y.size());
        REQUIRE_THROWS_AS(reconstruct(bad, perm, y.size(), 0.1), ProtocolError);
    }
}

TEST_CASE("reconstruction is unbiased over many channel draws") {
    ChannelConfig cfg = default_cfg(0.4);
    const std::size_t n = 121;
    std::vector<double> y(n);
    RngStream vals(71);
    for (auto& v : y) v = static_cast<double>(static_cast<float>(vals.uniform(0.5, 1.5)));
    Permutation perm(17, n);
    const double p = 0.4;
    const std::size_t draws = 10000;

    std::vector<double> sum(n, 0.0);
    auto packets = packetize(y, perm, cfg);
    for (std::size_t t = 0; t < draws; ++t) {
        RngStream rng = RngStream(81).derive(t);
        auto rec = reconstruct(drop_packets(packets, p, rng), perm, n, p);
        for (std::size_t i = 0; i < n; ++i) sum[i] += rec.values[i];
    }
    std::size_t outside = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = sum[i] / static_cast<double>(draws);
        const double se = std::abs(y[i]) * std::sqrt(p / ((1 - p) * static_cast<double>(draws)));
        if (std::abs(mean - y[i]) > 3 * se) ++outside;
    }
    REQUIRE(outside <= n / 100 + 2);
}

TEST_CASE("empirical scale mode divides by the received fraction") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(242, 61);
    Permutation perm(13, y.size());
    auto packets = packetize(y, perm, cfg);
    std::vector<Packet> half{packets[0]};  // 121 of 242 elements
    auto rec = reconstruct(half, perm, y.size(), 0.9, ChannelConfig::ScaleMode::Empirical);
    REQUIRE(rec.scale == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("retransmit baseline delivers everything and counts attempts") {
    ChannelConfig cfg = default_cfg(0.0);
    auto y = wire_exact_vector(484, 81);
    Permutation perm(19, y.size());
    auto packets = packetize(y, perm, cfg);

    SECTION("p = 0 means one attempt per packet") {
        RngStream rng(1);
        auto r = retransmit_baseline(packets, 0.0, rng);
        REQUIRE(r.delivered.size() == packets.size());
        for (auto a : r.attempts) REQUIRE(a == 1);
        REQUIRE(r.total_transmissions() == packets.size());
    }

    SECTION("mean attempts at p = 0.5 is close to 2") {
        RngStream rng(2);
        std::vector<Packet> many(100000, packets[0]);
        auto r = retransmit_baseline(many, 0.5, rng);
        double mean = static_cast<double>(r.total_transmissions()) /
                      static_cast<double>(many.size());
        REQUIRE(mean > 1.98);
        REQUIRE(mean < 2.02);
    }
}

TEST_CASE("element channel masks the expected fraction with inverse scaling") {
    auto ch = element_channel(0.3);
    std::vector<double> x(100000, 1.0);
    RngStream rng(91);
    auto y = ch(x, rng);
    std::size_t zeros = 0;
    for (double v : y) {
        if (v == 0.0) {
            ++zeros;
        } else {
            REQUIRE(v == Catch::Approx(1.0 / 0.7).epsilon(1e-12));
        }
    }
    const double frac = static_cast<double>(zeros) / static_cast<double>(x.size());
    const double sigma = std::sqrt(0.3 * 0.7 / static_cast<double>(x.size()));
    REQUIRE(std::abs(frac - 0.3) < 3 * sigma);
}

TEST_CASE("wire headers and payloads round-trip bit-exactly") {
    RngStream rng(2025);
    for (int trial = 0; trial < 2000; ++trial) {
        Packet p;
        p.header.session_id = static_cast<std::uint16_t>(rng.next_u64());
        p.header.tensor_id = static_cast<std::uint16_t>(rng.next_u64());
        p.header.start_slot = static_cast<std::uint32_t>(rng.next_u64());
        p.header.flags = static_cast<std::uint16_t>(rng.next_u64());
        const std::size_t count = rng.uniform_int(122);
        p.header.element_count = static_cast<std::uint16_t>(count);
        p.payload.resize(count);
        for (auto& v : p.payload) v = static_cast<float>(rng.uniform(-100.0, 100.0));

        auto bytes = encode_packet(p);
        REQUIRE(bytes.size() == kPacketHeaderSize + 4 * count);
        Packet q = decode_packet(bytes);
        REQUIRE(q.header.session_id == p.header.session_id);
        REQUIRE(q.header.tensor_id == p.header.tensor_id);
        REQUIRE(q.header.start_slot == p.header.start_slot);
        REQUIRE(q.header.element_count == p.header.element_count);
        REQUIRE(q.header.flags == p.header.flags);
        REQUIRE(encode_packet(q) == bytes);
    }

    SECTION("boundary values") {
        Packet p;
        p.header.session_id = 0xffff;
        p.header.tensor_id = 0xffff;
        p.header.start_slot = 0xffffffffu;
        p.header.element_count = 0;  // zero-length tail
        p.header.flags = 0xffff;
        auto bytes = encode_packet(p);
        REQUIRE(bytes.size() == kPacketHeaderSize);
        Packet q = decode_packet(bytes);
        REQUIRE(q.header.start_slot == 0xffffffffu);
        REQUIRE(q.payload.empty());
    }

    SECTION("length mismatch is rejected") {
        Packet p;
        p.header.element_count = 3;
        p.payload = {1.0f, 2.0f, 3.0f};
        auto bytes = encode_packet(p);
        bytes.pop_back();
        REQUIRE_THROWS_AS(decode_packet(bytes), FormatError);
    }

    SECTION("session setup, ack, fin round-trip") {
        SessionSetup s{0xBEEF, 0x0123456789abcdefull, 4096, 0.25f};
        auto bytes = encode_setup(s);
        REQUIRE(bytes.size() == 22);
        SessionSetup t = decode_setup(bytes);
        REQUIRE(t.session_id == s.session_id);
        REQUIRE(t.perm_seed == s.perm_seed);
        REQUIRE(t.n_elem == s.n_elem);
        REQUIRE(t.p_scale == s.p_scale);

        REQUIRE(decode_ack(encode_ack(0x1234)) == 0x1234);
        REQUIRE(classify_datagram(encode_fin(1)) == DatagramType::Fin);
        REQUIRE(classify_datagram(encode_setup(s)) == DatagramType::Setup);
        REQUIRE(classify_datagram(bytes) == DatagramType::Setup);
    }
}
