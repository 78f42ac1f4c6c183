// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sinr/channel.hpp"
#include "sinr/error.hpp"
#include "sinr/wire.hpp"

namespace sinr {

inline sockaddr_in make_udp_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    const std::string h = (host.empty() || host == "localhost") ? "127.0.0.1" : host;
    if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
        throw ConfigError("not an IPv4 address: " + host);
    }
    return addr;
}

class UdpSocket {
public:
    UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
        if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    }
    ~UdpSocket() {
        if (fd_ >= 0) ::close(fd_);
    }
    UdpSocket(UdpSocket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    UdpSocket& operator=(UdpSocket&& o) noexcept {
        if (this != &o) {
            if (fd_ >= 0) ::close(fd_);
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    void bind_port(std::uint16_t port, const std::string& host = "0.0.0.0") {
        sockaddr_in addr = make_udp_addr(host == "0.0.0.0" ? "0.0.0.0" : host, port);
        if (host == "0.0.0.0") addr.sin_addr.s_addr = htonl(INADDR_ANY);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            throw Error("bind to port " + std::to_string(port) + ": " + std::strerror(errno));
        }
    }

    std::uint16_t local_port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
            throw Error(std::string("getsockname: ") + std::strerror(errno));
        }
        return ntohs(addr.sin_port);
    }

    // Large receive buffer so a sender burst never overflows the kernel queue
    // while the receiver is busy in model code.
    void grow_receive_buffer(int bytes = 16 << 20) {
        if (::setsockopt(fd_, SOL_SOCKET, SO_RCVBUFFORCE, &bytes, sizeof bytes) != 0) {
            ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bytes, sizeof bytes);
        }
    }

    void send_to(const std::vector<std::uint8_t>& bytes, const sockaddr_in& to) {
        ssize_t n = ::sendto(fd_, bytes.data(), bytes.size(), 0,
                             reinterpret_cast<const sockaddr*>(&to), sizeof to);
        if (n < 0 || static_cast<std::size_t>(n) != bytes.size()) {
            throw Error(std::string("sendto: ") + std::strerror(errno));
        }
    }

    // Blocks up to timeout_ms; nullopt on timeout.
    std::optional<std::vector<std::uint8_t>> recv(int timeout_ms, sockaddr_in* from = nullptr) {
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, timeout_ms < 0 ? 0 : timeout_ms);
        if (rc < 0) throw Error(std::string("poll: ") + std::strerror(errno));
        if (rc == 0) return std::nullopt;
        std::vector<std::uint8_t> buf(65536);
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                               reinterpret_cast<sockaddr*>(&addr), &len);
        if (n < 0) throw Error(std::string("recvfrom: ") + std::strerror(errno));
        buf.resize(static_cast<std::size_t>(n));
        if (from) *from = addr;
        return buf;
    }

private:
    int fd_;
};

// Device side of the SI phase. The constructor runs the one-time session
// handshake (setup datagram, single ack); after that every tensor costs
// exactly ceil(n_elem / s) datagrams and send_tensor returns immediately.
//
// With cfg.loss_rate > 0, loss is injected locally before sendto using the
// caller-supplied per-tensor stream, mirroring drop_packets draw for draw, so
// a loopback run reproduces the simulated channel.
class UdpSender {
public:
    UdpSender(const std::string& host, std::uint16_t port, const ChannelConfig& cfg,
              std::size_t n_elem, std::uint16_t session_id, bool pace_to_throughput = false)
        : cfg_(cfg),
          peer_(make_udp_addr(host, port)),
          session_id_(session_id),
          perm_(cfg.permutation_seed(), n_elem),
          pace_(pace_to_throughput) {
        cfg_.validate();
        SessionSetup setup;
        setup.session_id = session_id_;
        setup.perm_seed = cfg_.permutation_seed();
        setup.n_elem = static_cast<std::uint32_t>(n_elem);
        setup.p_scale = static_cast<float>(cfg_.loss_rate);
        auto setup_bytes = encode_setup(setup);

        for (int attempt = 0; attempt < 20; ++attempt) {
            sock_.send_to(setup_bytes, peer_);
            auto reply = sock_.recv(250);
            if (reply && classify_datagram(*reply) == DatagramType::Ack &&
                decode_ack(*reply) == session_id_) {
                return;
            }
        }
        throw ProtocolError("session setup timed out: no ack from receiver");
    }

    const Permutation& permutation() const { return perm_; }
    std::size_t packets_per_tensor() const { return cfg_.packets_for(perm_.size()); }
    std::size_t datagrams_offered() const { return offered_; }
    std::size_t datagrams_sent() const { return sent_; }

    void send_tensor(std::uint16_t tensor_id, const std::vector<double>& y_int,
                     RngStream& loss_rng) {
        auto packets = packetize(y_int, perm_, cfg_, session_id_, tensor_id);
        const auto slot = std::chrono::duration<double>(cfg_.packet_time_s());
        auto next = std::chrono::steady_clock::now();
        for (const auto& pk : packets) {
            ++offered_;
            const bool drop = cfg_.loss_rate > 0.0 && loss_rng.bernoulli(cfg_.loss_rate);
            if (!drop) {
                sock_.send_to(encode_packet(pk), peer_);
                ++sent_;
            }
            if (pace_) {
                next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(slot);
                std::this_thread::sleep_until(next);
            }
        }
    }

    // Best-effort end-of-session marker so the receiver can stop waiting early.
    void finish() {
        auto fin = encode_fin(session_id_);
        for (int i = 0; i < 3; ++i) sock_.send_to(fin, peer_);
    }

private:
    ChannelConfig cfg_;
    UdpSocket sock_;
    sockaddr_in peer_;
    std::uint16_t session_id_;
    Permutation perm_;
    bool pace_;
    std::size_t offered_ = 0;
    std::size_t sent_ = 0;
};

struct UdpSessionInfo {
    std::uint16_t session_id = 0;
    std::uint64_t perm_seed = 0;
    std::size_t n_elem = 0;
    double p_scale = 0.0;
    sockaddr_in peer{};
};

// Edge-server side. recv_tensor assembles whatever arrives before its
// deadline (n_t * T + guard once the first packet is seen) and reconstructs;
// a tensor nobody sent comes back all-zero after the idle timeout. The
// receiver never blocks past its deadline and never requests retransmission.
class UdpReceiver {
public:
    explicit UdpReceiver(std::uint16_t port, const ChannelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        sock_.grow_receive_buffer();
        sock_.bind_port(port);
    }

    std::uint16_t port() const { return sock_.local_port(); }

    const UdpSessionInfo& await_session(int timeout_ms = 10000) {
        const auto start = std::chrono::steady_clock::now();
        while (elapsed_ms(start) < timeout_ms) {
            sockaddr_in from{};
            auto dg = sock_.recv(50, &from);
            if (!dg) continue;
            if (classify_datagram(*dg) != DatagramType::Setup) continue;
            SessionSetup setup = decode_setup(*dg);
            session_.session_id = setup.session_id;
            session_.perm_seed = setup.perm_seed;
            session_.n_elem = setup.n_elem;
            session_.p_scale = static_cast<double>(setup.p_scale);
            session_.peer = from;
            perm_.emplace(setup.perm_seed, setup.n_elem);
            sock_.send_to(encode_ack(setup.session_id), from);
            have_session_ = true;
            return session_;
        }
        throw ProtocolError("await_session: no setup datagram within timeout");
    }

    const UdpSessionInfo& session() const {
        if (!have_session_) throw ProtocolError("no session established");
        return session_;
    }

    bool session_finished() const { return fin_seen_; }

    ReceivedTensor recv_tensor(std::uint16_t tensor_id, double guard_s = 0.05,
                               double idle_timeout_s = 1.0) {
        if (!have_session_) throw ProtocolError("recv_tensor before session setup");
        const std::size_t n_t = cfg_.packets_for(session_.n_elem);
        const double deadline_s = static_cast<double>(n_t) * cfg_.packet_time_s() + guard_s;

        using clock = std::chrono::steady_clock;
        const auto wait_start = clock::now();
        std::optional<clock::time_point> first_seen;

        for (;;) {
            auto& got = buffers_[tensor_id];
            if (!got.empty() && !first_seen) first_seen = clock::now();
            if (got.size() >= n_t) break;          // everything arrived
            if (fin_seen_) break;                  // sender closed the session
            if (has_newer_than(tensor_id)) break;  // sender moved on

            const auto now = clock::now();
            const auto budget_end =
                first_seen ? *first_seen + to_duration(deadline_s)
                           : wait_start + to_duration(idle_timeout_s);
            if (now >= budget_end) break;
            const int wait_ms = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(budget_end - now).count());
            auto dg = sock_.recv(std::max(1, wait_ms));
            if (!dg) continue;
            dispatch(*dg);
        }

        std::vector<Packet> packets = std::move(buffers_[tensor_id]);
        // drop this tensor's buffer and anything older that straggled in
        buffers_.erase(buffers_.begin(), buffers_.upper_bound(tensor_id));
        return reconstruct(packets, *perm_, session_.n_elem, session_.p_scale, cfg_.scale_mode,
                           session_.session_id, tensor_id);
    }

private:
    static std::chrono::steady_clock::duration to_duration(double seconds) {
        return std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(seconds));
    }

    static int elapsed_ms(std::chrono::steady_clock::time_point start) {
        return static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - start)
                                    .count());
    }

    bool has_newer_than(std::uint16_t tensor_id) const {
        auto it = buffers_.upper_bound(tensor_id);
        return it != buffers_.end() && !it->second.empty();
    }

    void dispatch(const std::vector<std::uint8_t>& dg) {
        switch (classify_datagram(dg)) {
            case DatagramType::Data: {
                Packet pk = decode_packet(dg);
                if (pk.header.session_id != session_.session_id) return;  // foreign session
                buffers_[pk.header.tensor_id].push_back(std::move(pk));
                return;
            }
            case DatagramType::Fin:
                fin_seen_ = true;
                return;
            case DatagramType::Setup: {
                // the ack can be lost; re-ack duplicated setups for our session
                SessionSetup setup = decode_setup(dg);
                if (setup.session_id == session_.session_id) {
                    sock_.send_to(encode_ack(setup.session_id), session_.peer);
                }
                return;
            }
            default:
                return;
        }
    }

    ChannelConfig cfg_;
    UdpSocket sock_;
    UdpSessionInfo session_{};
    std::optional<Permutation> perm_;
    std::map<std::uint16_t, std::vector<Packet>> buffers_;
    bool have_session_ = false;
    bool fin_seen_ = false;
};

}  // namespace sinr
