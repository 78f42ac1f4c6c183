// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sinr/channel.hpp"
#include "sinr/csv.hpp"
#include "sinr/dataset.hpp"
#include "sinr/loss.hpp"
#include "sinr/model.hpp"
#include "sinr/optim.hpp"

namespace sinr {

struct TrainConfig {
    std::size_t max_epochs = 150;
    std::size_t patience = 20;   // consecutive validation-loss increases
    std::size_t batch_size = 128;
    double lr = 0.001;
    std::uint64_t seed = 0;
    bool restore_best = true;    // hand back the best-validation-loss weights
    bool verbose = false;

    void validate() const {
        if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
        if (patience < 1) throw ConfigError("train: patience must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    }
};

enum class StopReason { MaxEpochs, EarlyStop };

inline const char* stop_reason_name(StopReason r) {
    return r == StopReason::MaxEpochs ? "max_epochs" : "early_stop";
}

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    StopReason stop_reason = StopReason::MaxEpochs;
    std::size_t best_epoch = 0;  // index into the per-epoch vectors
    double wall_seconds = 0.0;

    std::size_t epochs() const { return train_loss.size(); }

    void write_csv(const std::string& path) const {
        CsvWriter w(path, {"epoch", "train_loss", "val_loss", "val_acc"});
        for (std::size_t e = 0; e < epochs(); ++e) {
            w.row({std::to_string(e + 1), CsvWriter::num(train_loss[e]),
                   CsvWriter::num(val_loss[e]), CsvWriter::num(val_acc[e])});
        }
    }

    std::string summary() const {
        return "epochs=" + std::to_string(epochs()) + " stop=" + stop_reason_name(stop_reason) +
               " best_epoch=" + std::to_string(best_epoch + 1) +
               " best_val_loss=" + (epochs() ? std::to_string(val_loss[best_epoch]) : "n/a") +
               " val_acc=" + (epochs() ? std::to_string(val_acc[best_epoch]) : "n/a") +
               " wall_s=" + std::to_string(wall_seconds);
    }
};

// "Increased" means strictly greater than the previous epoch; equality and
// decreases both reset the streak.
inline std::size_t update_rise_streak(std::size_t streak, double prev_val_loss,
                                      double cur_val_loss) {
    return cur_val_loss > prev_val_loss ? streak + 1 : 0;
}

// Seed-deterministic 9:1 split into update and validation index sets.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_train_validation_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    RngStream rng = RngStream(seed).derive(0x5911);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.uniform_int(i);
        std::swap(idx[i - 1], idx[j]);
    }
    const std::size_t n_update = (n * 9) / 10;
    std::vector<std::size_t> update(idx.begin(), idx.begin() + n_update);
    std::vector<std::size_t> validation(idx.begin() + n_update, idx.end());
    return {std::move(update), std::move(validation)};
}

inline std::pair<Dataset, Dataset> split_train_validation(const Dataset& d, std::uint64_t seed) {
    auto [u, v] = split_train_validation_indices(d.size(), seed);
    return {d.subset(u), d.subset(v)};
}

namespace detail {

inline std::pair<double, double> eval_loss_acc(Model& m, const Dataset& ds) {
    RngStream rng(0);  // unused in Eval mode
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Tensor logits = m.forward(ds.image(i), Mode::Eval, rng);
        loss += softmax_cross_entropy(logits, ds.labels[i]).loss;
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k) {
            if (logits[k] > logits[best]) best = k;
        }
        correct += best == ds.labels[i];
    }
    const double n = static_cast<double>(ds.size());
    return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace detail

// Adam + minibatches + early stopping: runs until max_epochs, or until the
// validation loss has strictly increased `patience` epochs in a row (equality
// resets the streak). Returns the weights of the best-validation epoch.
inline TrainReport train(Model& m, const Dataset& update, const Dataset& validation,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (update.size() == 0 || validation.size() == 0) {
        throw ConfigError("train: update and validation sets must be nonempty");
    }
    const auto t0 = std::chrono::steady_clock::now();

    Adam opt(m.parameters(), {.lr = cfg.lr});
    RngStream shuffle_rng = RngStream(cfg.seed).derive(0x50FF);
    RngStream dropout_rng = RngStream(cfg.seed).derive(0xD120);

    TrainReport report;
    std::vector<std::size_t> order(update.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<std::vector<double>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t rise_streak = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - off);
            m.zero_grads();
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t idx = order[off + k];
                Tensor logits = m.forward(update.image(idx), Mode::Train, dropout_rng);
                LossResult lr = softmax_cross_entropy(logits, update.labels[idx]);
                epoch_loss += lr.loss;
                for (auto& g : lr.grad.values()) g /= static_cast<double>(count);
                m.backward(lr.grad);
            }
            opt.step();
        }
        epoch_loss /= static_cast<double>(order.size());

        auto [vloss, vacc] = detail::eval_loss_acc(m, validation);
        report.train_loss.push_back(epoch_loss);
        report.val_loss.push_back(vloss);
        report.val_acc.push_back(vacc);
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %zu  train_loss %.5f  val_loss %.5f  val_acc %.4f\n",
                         epoch + 1, epoch_loss, vloss, vacc);
        }

        if (!std::isfinite(epoch_loss) || !std::isfinite(vloss)) {
            throw Error("training diverged at epoch " + std::to_string(epoch + 1) +
                        ": loss is not finite (train " + std::to_string(epoch_loss) + ", val " +
                        std::to_string(vloss) + ")");
        }

        if (vloss < best_val) {
            best_val = vloss;
            report.best_epoch = epoch;
            if (cfg.restore_best) {
                best_params.clear();
                for (Tensor* p : m.parameters()) best_params.push_back(p->values());
            }
        }
        if (epoch > 0) {
            rise_streak = update_rise_streak(rise_streak, report.val_loss[epoch - 1], vloss);
        }
        if (rise_streak >= cfg.patience) {
            report.stop_reason = StopReason::EarlyStop;
            break;
        }
        if (epoch + 1 == cfg.max_epochs) report.stop_reason = StopReason::MaxEpochs;
    }

    if (cfg.restore_best && !best_params.empty()) {
        auto params = m.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->values() = best_params[i];
    }
    m.clear_caches();

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// --- evaluation ------------------------------------------------------------------

namespace detail {

// Parallel map over samples; workers only read the model, and per-sample
// channel streams derive from (seed, sample index) so the result does not
// depend on scheduling.
template <typename Fn>
std::size_t count_correct(std::size_t n, Fn&& correct_fn) {
    unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    if (n < 256 || workers == 1) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < n; ++i) c += correct_fn(i);
        return c;
    }
    std::vector<std::size_t> partial(workers, 0);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            std::size_t c = 0;
            for (std::size_t i = w; i < n; i += workers) c += correct_fn(i);
            partial[w] = c;
        });
    }
    for (auto& t : pool) t.join();
    std::size_t c = 0;
    for (auto v : partial) c += v;
    return c;
}

}  // namespace detail

inline double evaluate_accuracy(Model& m, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("evaluate_accuracy: empty dataset");
    std::size_t correct = detail::count_correct(ds.size(), [&](std::size_t i) {
        RngStream rng(0);
        return m.predict(ds.image(i), rng) == ds.labels[i] ? 1u : 0u;
    });
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

inline double evaluate_accuracy(SubModelPair& pair, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("evaluate_accuracy: empty dataset");
    std::size_t correct = detail::count_correct(ds.size(), [&](std::size_t i) {
        RngStream rng(0);
        return pair.predict(ds.image(i), rng) == ds.labels[i] ? 1u : 0u;
    });
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Split evaluation with a channel applied to the flattened intermediate
// representation. Sample i's channel stream is derive(seed, i); the flattening
// and un-flattening use the canonical row-major (channel, row, column) order.
inline double evaluate_accuracy(SubModelPair& pair, const Dataset& ds, const ChannelFn& channel,
                                std::uint64_t seed) {
    if (ds.size() == 0) throw ConfigError("evaluate_accuracy: empty dataset");
    const RngStream base(seed);
    std::size_t correct = detail::count_correct(ds.size(), [&](std::size_t i) {
        RngStream rng = base.derive(i);
        Tensor mid = pair.input_sub.forward(ds.image(i), rng);
        std::vector<double> out = channel(mid.values(), rng);
        Tensor mid2(pair.input_sub.intermediate_shape, std::move(out));
        Tensor logits = pair.output_sub.forward(mid2, rng);
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k) {
            if (logits[k] > logits[best]) best = k;
        }
        return best == ds.labels[i] ? 1u : 0u;
    });
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace sinr
