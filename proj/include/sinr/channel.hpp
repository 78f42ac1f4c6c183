// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/model.hpp"
#include "sinr/rng.hpp"
#include "sinr/wire.hpp"

namespace sinr {

// Single source of truth for the transport, shared by the packet simulator,
// the UDP path, and the latency analytics.
struct ChannelConfig {
    double loss_rate = 0.0;         // p: per-packet (and per-element) loss probability
    std::size_t packet_size = 500;  // l in bytes, the 16-byte header included
    double throughput_bps = 9.0e6;  // b in bit/s
    std::uint64_t seed = 0;

    enum class TransportMode { Simulated, Udp };
    TransportMode mode = TransportMode::Simulated;

    // Eq-faithful scaling uses the configured (nominal) loss rate; empirical
    // mode divides by the actually-received fraction instead.
    enum class ScaleMode { Nominal, Empirical };
    ScaleMode scale_mode = ScaleMode::Nominal;

    void validate() const {
        if (!(loss_rate >= 0.0 && loss_rate < 1.0)) {
            throw ConfigError("channel loss rate must be in [0, 1), got " +
                              std::to_string(loss_rate));
        }
        if (packet_size < kPacketHeaderSize + kWireElementSize) {
            throw ConfigError("packet size must fit the 16-byte header plus one element");
        }
        if (!(throughput_bps > 0.0)) throw ConfigError("throughput must be positive");
    }

    // s: elements per full packet.
    std::size_t elements_per_packet() const {
        validate();
        return (packet_size - kPacketHeaderSize) / kWireElementSize;
    }

    // T: seconds on the channel per packet (l bytes at b bit/s).
    double packet_time_s() const { return static_cast<double>(packet_size) * 8.0 / throughput_bps; }

    std::size_t packets_for(std::size_t n_elem) const {
        const std::size_t s = elements_per_packet();
        return (n_elem + s - 1) / s;
    }

    // The p the receiver actually applies. The wire carries p as f32, so the
    // simulated path quantizes identically to keep both transports bit-equal.
    double wire_scale_rate() const { return static_cast<double>(static_cast<float>(loss_rate)); }

    // Session permutation seed derived from the run seed; both endpoints and
    // the simulator regenerate the same mapping from it.
    std::uint64_t permutation_seed() const { return RngStream(seed).derive(0x9e37).next_u64(); }
};

// Bijection j -> k_j over element indices, regenerable from the seed alone.
class Permutation {
public:
    Permutation(std::uint64_t seed, std::size_t n) : seed_(seed), map_(n) {
        std::iota(map_.begin(), map_.end(), std::uint32_t{0});
        RngStream rng(seed);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = rng.uniform_int(i);
            std::swap(map_[i - 1], map_[j]);
        }
    }

    static Permutation identity(std::size_t n) {
        Permutation p(0, 0);
        p.map_.resize(n);
        std::iota(p.map_.begin(), p.map_.end(), std::uint32_t{0});
        return p;
    }

    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return map_.size(); }
    std::size_t operator[](std::size_t slot) const { return map_[slot]; }

private:
    std::uint64_t seed_;
    std::vector<std::uint32_t> map_;
};

// Element-level channel: each element survives with probability 1-p, lost
// elements read exactly zero. Values of survivors are untouched.
inline std::vector<double> mask_channel(const std::vector<double>& x, double p, RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("mask_channel: p must be in [0, 1)");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = rng.bernoulli(p) ? 0.0 : x[i];
    return y;
}

// Splits the intermediate representation into ceil(n/s) packets; the packet
// starting at slot i carries y[k_j] for j in [i, i+count). Elements are
// converted to f32, which is what the wire carries.
inline std::vector<Packet> packetize(const std::vector<double>& y_int, const Permutation& perm,
                                     const ChannelConfig& cfg, std::uint16_t session_id = 0,
                                     std::uint16_t tensor_id = 0) {
    if (perm.size() != y_int.size()) {
        throw ConfigError("packetize: permutation covers " + std::to_string(perm.size()) +
                          " elements, tensor has " + std::to_string(y_int.size()));
    }
    const std::size_t s = cfg.elements_per_packet();
    const std::size_t n = y_int.size();
    std::vector<Packet> packets;
    packets.reserve(cfg.packets_for(n));
    for (std::size_t start = 0; start < n; start += s) {
        const std::size_t count = std::min(s, n - start);
        Packet p;
        p.header.session_id = session_id;
        p.header.tensor_id = tensor_id;
        p.header.start_slot = static_cast<std::uint32_t>(start);
        p.header.element_count = static_cast<std::uint16_t>(count);
        p.payload.reserve(count);
        for (std::size_t j = start; j < start + count; ++j) {
            p.payload.push_back(static_cast<float>(y_int[perm[j]]));
        }
        packets.push_back(std::move(p));
    }
    return packets;
}

// i.i.d. Bernoulli packet loss; arrival order preserved.
inline std::vector<Packet> drop_packets(const std::vector<Packet>& packets, double p,
                                        RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("drop_packets: p must be in [0, 1)");
    std::vector<Packet> kept;
    kept.reserve(packets.size());
    for (const auto& pk : packets) {
        if (!rng.bernoulli(p)) kept.push_back(pk);
    }
    return kept;
}

struct ReceivedTensor {
    std::vector<double> values;      // scaled; unreceived slots exactly 0
    std::vector<std::uint8_t> mask;  // 1 where the element arrived
    double scale = 1.0;
    std::size_t received_packets = 0;

    std::size_t received_elements() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

// Places received elements back at their original positions and applies the
// 1/(1-p) scale. Duplicated packets are idempotent; packets that disagree
// about a slot's value are an integrity error.
inline ReceivedTensor reconstruct(const std::vector<Packet>& received, const Permutation& perm,
                                  std::size_t n_elem, double p_scale,
                                  ChannelConfig::ScaleMode scale_mode = ChannelConfig::ScaleMode::Nominal,
                                  std::optional<std::uint16_t> expect_session = std::nullopt,
                                  std::optional<std::uint16_t> expect_tensor = std::nullopt) {
    if (!(p_scale >= 0.0 && p_scale < 1.0)) {
        throw ConfigError("reconstruct: p_scale must be in [0, 1)");
    }
    if (perm.size() != n_elem) {
        throw ConfigError("reconstruct: permutation size does not match n_elem");
    }
    ReceivedTensor out;
    out.values.assign(n_elem, 0.0);
    out.mask.assign(n_elem, 0);

    std::vector<float> raw(n_elem, 0.0f);
    std::optional<std::uint16_t> session = expect_session, tensor = expect_tensor;
    for (const auto& pk : received) {
        if (session && pk.header.session_id != *session) {
            throw ProtocolError("reconstruct: packet from unknown session " +
                                std::to_string(pk.header.session_id));
        }
        if (tensor && pk.header.tensor_id != *tensor) {
            throw ProtocolError("reconstruct: packet for unknown tensor " +
                                std::to_string(pk.header.tensor_id));
        }
        session = pk.header.session_id;
        tensor = pk.header.tensor_id;
        const std::size_t start = pk.header.start_slot;
        if (start + pk.payload.size() > n_elem) {
            throw ProtocolError("reconstruct: packet slots [" + std::to_string(start) + ", " +
                                std::to_string(start + pk.payload.size()) +
                                ") exceed element count " + std::to_string(n_elem));
        }
        for (std::size_t k = 0; k < pk.payload.size(); ++k) {
            const std::size_t pos = perm[start + k];
            if (out.mask[pos]) {
                if (raw[pos] != pk.payload[k]) {
                    throw IntegrityError("reconstruct: conflicting values for element " +
                                         std::to_string(pos));
                }
                continue;  // duplicate packet, idempotent
            }
            out.mask[pos] = 1;
            raw[pos] = pk.payload[k];
        }
        ++out.received_packets;
    }

    double scale;
    if (scale_mode == ChannelConfig::ScaleMode::Nominal) {
        scale = 1.0 / (1.0 - p_scale);
    } else {
        const std::size_t got = out.received_elements();
        scale = got == 0 ? 1.0 : static_cast<double>(n_elem) / static_cast<double>(got);
    }
    out.scale = scale;
    // scaling zeros is a no-op, so whole-vector scaling matches scaling only
    // the received elements
    for (std::size_t i = 0; i < n_elem; ++i) {
        out.values[i] = static_cast<double>(raw[i]) * scale;
    }
    return out;
}

// Stop-and-wait retransmission baseline: every packet is resent until it gets
// through; attempt counts feed the latency accounting.
struct RetransmitResult {
    std::vector<Packet> delivered;       // all packets, in order
    std::vector<std::size_t> attempts;   // per packet, >= 1

    std::size_t total_transmissions() const {
        std::size_t n = 0;
        for (auto a : attempts) n += a;
        return n;
    }
};

inline RetransmitResult retransmit_baseline(const std::vector<Packet>& packets, double p,
                                            RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("retransmit_baseline: p must be in [0, 1)");
    RetransmitResult r;
    r.delivered = packets;
    r.attempts.reserve(packets.size());
    for (std::size_t i = 0; i < packets.size(); ++i) {
        std::size_t tries = 1;
        while (rng.bernoulli(p)) ++tries;
        r.attempts.push_back(tries);
    }
    return r;
}

// --- channel functions for evaluation ------------------------------------------

// Transforms applied to the flattened intermediate representation during
// evaluation. The stream passed in is the per-sample channel stream.
using ChannelFn = std::function<std::vector<double>(const std::vector<double>&, RngStream&)>;

// Element-granularity loss with nominal inverse scaling; this is the
// channel-as-dropout evaluation convention.
inline ChannelFn element_channel(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("element_channel: p must be in [0, 1)");
    return [p](const std::vector<double>& x, RngStream& rng) {
        const double scale = 1.0 / (1.0 - p);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = rng.bernoulli(p) ? 0.0 : x[i] * scale;
        }
        return y;
    };
}

// Session: one shared permutation regenerated from cfg.seed, the way the
// transport works. PerSample: a fresh permutation per sample, the idealized
// estimator under which packet loss equals uniformly random element loss.
enum class PermPolicy { Session, PerSample };

// Packet-granularity loss: permute, packetize, drop whole packets, then
// reconstruct with the configured scaling. The per-sample stream drives the
// drops (and the permutation in PerSample mode).
inline ChannelFn packet_channel(const ChannelConfig& cfg,
                                PermPolicy policy = PermPolicy::Session) {
    cfg.validate();
    return [cfg, policy](const std::vector<double>& x, RngStream& rng) {
        const std::uint64_t perm_seed =
            policy == PermPolicy::Session ? cfg.permutation_seed() : rng.next_u64();
        Permutation perm(perm_seed, x.size());
        auto packets = packetize(x, perm, cfg);
        auto kept = drop_packets(packets, cfg.loss_rate, rng);
        auto rec = reconstruct(kept, perm, x.size(), cfg.wire_scale_rate(), cfg.scale_mode);
        return rec.values;
    };
}

// Identity transform (p = 0 path with no quantization).
inline ChannelFn no_channel() {
    return [](const std::vector<double>& x, RngStream&) { return x; };
}

// --- channel-as-dropout evaluation model ----------------------------------------

// Eval-mode pipeline over a split pair with the division-point dropout
// forcibly active at rate p (inverted scaling included); every other dropout
// stays identity. Statistically identical to packetize/drop/reconstruct with
// nominal scaling under a uniformly random permutation.
class ChannelAsDropoutModel {
public:
    ChannelAsDropoutModel(SubModelPair& pair, double p) : pair_(pair), channel_(element_channel(p)) {}

    Tensor forward(const Tensor& input, RngStream& rng) {
        Tensor mid = pair_.input_sub.forward(input, rng);
        std::vector<double> masked = channel_(mid.values(), rng);
        Tensor mid2(pair_.input_sub.intermediate_shape, std::move(masked));
        return pair_.output_sub.forward(mid2, rng);
    }

    std::size_t predict(const Tensor& input, RngStream& rng) {
        Tensor logits = forward(input, rng);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        return best;
    }

private:
    SubModelPair& pair_;
    ChannelFn channel_;
};

inline ChannelAsDropoutModel channel_as_dropout(SubModelPair& pair, double p) {
    return ChannelAsDropoutModel(pair, p);
}

}  // namespace sinr
