// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/rng.hpp"

namespace sinr {

// Finite discrete distribution over a strictly increasing support.
struct Pmf {
    std::vector<double> support;
    std::vector<double> mass;

    void validate(double tol = 1e-12) const {
        if (support.size() != mass.size()) throw ConfigError("pmf: support/mass length mismatch");
        if (support.empty()) throw ConfigError("pmf: empty");
        double sum = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
            if (i && !(support[i] > support[i - 1])) {
                throw ConfigError("pmf: support must be strictly increasing");
            }
            if (mass[i] < 0.0) throw ConfigError("pmf: negative mass");
            sum += mass[i];
        }
        if (std::abs(sum - 1.0) > tol) {
            throw ConfigError("pmf: masses sum to " + std::to_string(sum));
        }
    }

    double total_mass() const {
        double s = 0.0;
        for (double m : mass) s += m;
        return s;
    }

    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) s += support[i] * mass[i];
        return s;
    }

    double variance() const {
        const double mu = mean();
        double s = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
            s += (support[i] - mu) * (support[i] - mu) * mass[i];
        }
        return s;
    }

    static Pmf point_mass(double value) { return Pmf{{value}, {1.0}}; }
};

namespace detail {

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// Binomial count of received packets out of n_t transmitted at loss rate p:
// mass(n) = C(n_t, n) p^(n_t-n) (1-p)^n. Log-domain coefficients keep this
// stable up to n_t around 1e4.
inline Pmf pmf_received(std::size_t n_t, double p) {
    if (n_t < 1) throw ConfigError("pmf_received: n_t must be >= 1");
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("pmf_received: p must be in [0, 1)");
    if (p == 0.0) return Pmf::point_mass(static_cast<double>(n_t));

    const double nt = static_cast<double>(n_t);
    const double logp = std::log(p), log1mp = std::log1p(-p);
    Pmf out;
    out.support.reserve(n_t + 1);
    out.mass.reserve(n_t + 1);
    double sum = 0.0;
    for (std::size_t n = 0; n <= n_t; ++n) {
        const double nn = static_cast<double>(n);
        double lm = detail::log_choose(nt, nn) + (nt - nn) * logp + nn * log1mp;
        double m = std::exp(lm);
        out.support.push_back(nn);
        out.mass.push_back(m);
        sum += m;
    }
    for (auto& m : out.mass) m /= sum;
    return out;
}

// Measured accuracy as a function of the retained fraction alpha (percent).
// acc(100) is the clean test accuracy; between grid points the curve is
// interpolated linearly.
struct AccuracyCurve {
    std::vector<double> alpha;  // ascending, typically {0, 10, ..., 100}
    std::vector<double> acc;

    static AccuracyCurve default_grid() {
        AccuracyCurve c;
        for (int a = 0; a <= 100; a += 10) c.alpha.push_back(a);
        c.acc.assign(c.alpha.size(), 0.0);
        return c;
    }

    void validate() const {
        if (alpha.size() != acc.size() || alpha.size() < 2) {
            throw ConfigError("accuracy curve: need >= 2 matching grid points");
        }
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            if (i && !(alpha[i] > alpha[i - 1])) {
                throw ConfigError("accuracy curve: alpha grid must be increasing");
            }
            if (acc[i] < 0.0 || acc[i] > 1.0) {
                throw ConfigError("accuracy curve: accuracy outside [0, 1]");
            }
        }
    }

    double operator()(double a) const {
        if (a <= alpha.front()) return acc.front();
        if (a >= alpha.back()) return acc.back();
        auto it = std::upper_bound(alpha.begin(), alpha.end(), a);
        std::size_t hi = static_cast<std::size_t>(it - alpha.begin());
        std::size_t lo = hi - 1;
        double t = (a - alpha[lo]) / (alpha[hi] - alpha[lo]);
        return acc[lo] + t * (acc[hi] - acc[lo]);
    }
};

// Pushes the received-packet count through the accuracy curve: receiving n of
// the n_int representation packets retains alpha = 100 n / n_int percent.
// Counts mapping to the same accuracy merge into one atom.
inline Pmf pmf_accuracy_sinr(std::size_t n_t, std::size_t n_int, double p,
                             const AccuracyCurve& curve) {
    curve.validate();
    if (n_int < 1 || n_int > n_t) {
        throw ConfigError("pmf_accuracy_sinr: need 1 <= n_int <= n_t");
    }
    Pmf rec = pmf_received(n_int, p);
    std::vector<std::pair<double, double>> atoms;  // (accuracy, mass)
    atoms.reserve(rec.support.size());
    for (std::size_t i = 0; i < rec.support.size(); ++i) {
        const double alpha = 100.0 * rec.support[i] / static_cast<double>(n_int);
        atoms.emplace_back(curve(alpha), rec.mass[i]);
    }
    std::sort(atoms.begin(), atoms.end());
    Pmf out;
    for (const auto& [v, m] : atoms) {
        if (!out.support.empty() && out.support.back() == v) {
            out.mass.back() += m;
        } else {
            out.support.push_back(v);
            out.mass.push_back(m);
        }
    }
    return out;
}

// With retransmission every representation packet arrives: a point mass at
// the clean accuracy, independent of p.
inline Pmf pmf_accuracy_retx(const AccuracyCurve& curve) {
    curve.validate();
    return Pmf::point_mass(curve(100.0));
}

// Per-packet channel time T = l*8/b (l in bytes, b in bit/s).
inline double packet_time_s(double l_bytes, double b_bps) {
    if (!(l_bytes > 0.0) || !(b_bps > 0.0)) {
        throw ConfigError("packet_time_s: l and b must be positive");
    }
    return l_bytes * 8.0 / b_bps;
}

// The no-retransmission latency is deterministic: exactly n_t packets on the
// channel, a single atom at n_t * T (zero variance).
inline Pmf latency_sinr(std::size_t n_t, double l_bytes, double b_bps) {
    if (n_t < 1) throw ConfigError("latency_sinr: n_t must be >= 1");
    return Pmf::point_mass(static_cast<double>(n_t) * packet_time_s(l_bytes, b_bps));
}

struct TruncatedPmf {
    Pmf pmf;
    double truncated_tail = 0.0;  // analytic mass beyond n_max, before renormalizing
    std::size_t n_max = 0;        // last transmission count kept
};

// Stop-and-wait retransmission: total transmissions n until all n_t packets
// are delivered follow a negative binomial,
//   mass(n) = C(n-1, n_t-1) p^(n-n_t) (1-p)^n_t,  n >= n_t,
// reported over latency t = n*T. The series is truncated once the remaining
// tail is below tail_tol and renormalized.
inline TruncatedPmf latency_retx(std::size_t n_t, double p, double l_bytes, double b_bps,
                                 double tail_tol = 1e-10) {
    if (n_t < 1) throw ConfigError("latency_retx: n_t must be >= 1");
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("latency_retx: p must be in [0, 1)");
    const double T = packet_time_s(l_bytes, b_bps);

    TruncatedPmf out;
    if (p == 0.0) {
        out.pmf = Pmf::point_mass(static_cast<double>(n_t) * T);
        out.n_max = n_t;
        return out;
    }

    const double nt = static_cast<double>(n_t);
    const double logp = std::log(p), log1mp = std::log1p(-p);
    const std::size_t hard_cap = n_t * std::size_t{1000000};
    double cum = 0.0;
    for (std::size_t n = n_t; n <= hard_cap; ++n) {
        const double nn = static_cast<double>(n);
        double lm = detail::log_choose(nn - 1.0, nt - 1.0) + (nn - nt) * logp + nt * log1mp;
        double m = std::exp(lm);
        out.pmf.support.push_back(nn * T);
        out.pmf.mass.push_back(m);
        cum += m;
        if (1.0 - cum < tail_tol) {
            out.n_max = n;
            break;
        }
        out.n_max = n;
    }
    out.truncated_tail = std::max(0.0, 1.0 - cum);
    for (auto& m : out.pmf.mass) m /= cum;
    return out;
}

// CDF sampled at the support points (right-continuous step function).
struct Cdf {
    std::vector<double> values;
    std::vector<double> cum;

    double at(double x) const {
        auto it = std::upper_bound(values.begin(), values.end(), x);
        if (it == values.begin()) return 0.0;
        return cum[static_cast<std::size_t>(it - values.begin()) - 1];
    }
};

inline Cdf cdf(const Pmf& pmf) {
    Cdf c;
    c.values = pmf.support;
    c.cum.reserve(pmf.mass.size());
    double run = 0.0;
    for (double m : pmf.mass) {
        run += m;
        c.cum.push_back(run);
    }
    return c;
}

// Empirical-vs-analytic CDF comparison with the distribution-free
// Dvoretzky-Kiefer-Wolfowitz band: sup |F_n - F| <= sqrt(ln(2/delta) / 2n)
// with probability 1-delta.
struct DivergenceReport {
    double sup_distance = 0.0;
    double dkw_epsilon = 0.0;
    std::size_t trials = 0;
    bool inside_band = false;
};

template <typename Simulator>
DivergenceReport monte_carlo_check(const Pmf& analytic, Simulator&& draw, std::size_t trials,
                                   double delta = 0.01) {
    analytic.validate(1e-9);
    if (trials < 1) throw ConfigError("monte_carlo_check: trials must be >= 1");
    std::vector<double> samples(trials);
    for (auto& s : samples) s = draw();
    std::sort(samples.begin(), samples.end());

    const Cdf fa = cdf(analytic);
    auto empirical_at = [&](double x) {
        auto it = std::upper_bound(samples.begin(), samples.end(), x);
        return static_cast<double>(it - samples.begin()) / static_cast<double>(trials);
    };
    auto empirical_before = [&](double x) {
        auto it = std::lower_bound(samples.begin(), samples.end(), x);
        return static_cast<double>(it - samples.begin()) / static_cast<double>(trials);
    };
    auto analytic_before = [&](double x) {
        auto it = std::lower_bound(fa.values.begin(), fa.values.end(), x);
        if (it == fa.values.begin()) return 0.0;
        return fa.cum[static_cast<std::size_t>(it - fa.values.begin()) - 1];
    };

    // both CDFs only jump at their atoms, so the sup is attained at (or just
    // below) a point of either support
    std::vector<double> points = fa.values;
    points.insert(points.end(), samples.begin(), samples.end());
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    DivergenceReport rep;
    rep.trials = trials;
    for (double x : points) {
        rep.sup_distance = std::max(rep.sup_distance, std::abs(empirical_at(x) - fa.at(x)));
        rep.sup_distance =
            std::max(rep.sup_distance, std::abs(empirical_before(x) - analytic_before(x)));
    }
    rep.dkw_epsilon = std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(trials)));
    rep.inside_band = rep.sup_distance <= rep.dkw_epsilon;
    return rep;
}

}  // namespace sinr
