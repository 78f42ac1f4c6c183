// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "sinr/error.hpp"
#include "sinr/tensor.hpp"

namespace sinr {

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits, same shape as logits
};

// Cross entropy of softmax(logits) against a class index, stabilized by
// max-subtraction. loss = logsumexp(logits) - logits[label];
// grad = softmax(logits) - onehot(label).
inline LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1) {
        throw ShapeError("softmax_cross_entropy: expected rank-1 logits, got " +
                         logits.shape_str());
    }
    const std::size_t n = logits.size();
    if (label >= n) {
        throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(n) + " classes");
    }
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);
    const double lse = std::log(sum) + mx;

    LossResult r;
    r.loss = lse - logits[label];
    r.grad = Tensor(logits.shape());
    for (std::size_t i = 0; i < n; ++i) r.grad[i] = std::exp(logits[i] - lse);
    r.grad[label] -= 1.0;
    return r;
}

// Batched form: rows of `logits` are independent samples; returns the mean
// loss and the gradient of the mean (each row scaled by 1/N).
inline LossResult softmax_cross_entropy_batch(const Tensor& logits,
                                              const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax_cross_entropy_batch: expected rank-2 logits, got " +
                         logits.shape_str());
    }
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    if (labels.size() != n) {
        throw ShapeError("softmax_cross_entropy_batch: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    }
    LossResult out;
    out.grad = Tensor(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        Tensor row({k}, {logits.values().begin() + i * k, logits.values().begin() + (i + 1) * k});
        LossResult r = softmax_cross_entropy(row, labels[i]);
        out.loss += r.loss / static_cast<double>(n);
        for (std::size_t j = 0; j < k; ++j) {
            out.grad[i * k + j] = r.grad[j] / static_cast<double>(n);
        }
    }
    return out;
}

}  // namespace sinr
