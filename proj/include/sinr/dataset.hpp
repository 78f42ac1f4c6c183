// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sinr/error.hpp"
#include "sinr/rng.hpp"
#include "sinr/tensor.hpp"

namespace sinr {

// Labeled image set, pixels normalized to [0, 1], layout N x (C, H, W).
struct Dataset {
    std::string name;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t class_count = 0;
    std::vector<double> images;        // size() * sample_size() doubles
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return channels * height * width; }

    Tensor image(std::size_t i) const {
        const std::size_t n = sample_size();
        return Tensor({channels, height, width},
                      {images.begin() + i * n, images.begin() + (i + 1) * n});
    }

    Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset d;
        d.name = name;
        d.channels = channels;
        d.height = height;
        d.width = width;
        d.class_count = class_count;
        const std::size_t n = sample_size();
        d.images.reserve(indices.size() * n);
        d.labels.reserve(indices.size());
        for (std::size_t i : indices) {
            d.images.insert(d.images.end(), images.begin() + i * n, images.begin() + (i + 1) * n);
            d.labels.push_back(labels[i]);
        }
        return d;
    }
};

// --- CIFAR-10 binary batches -------------------------------------------------

namespace detail {

inline void load_cifar10_batch(const std::string& path, Dataset& out) {
    namespace fs = std::filesystem;
    constexpr std::size_t kRecord = 3073;  // 1 label byte + 3*32*32 pixels
    constexpr std::size_t kRecords = 10000;
    if (!fs::exists(path)) {
        throw FormatError("CIFAR-10 batch missing: " + path + " (expected " +
                          std::to_string(kRecord * kRecords) + " bytes)");
    }
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    const auto size = static_cast<std::size_t>(f.tellg());
    if (size != kRecord * kRecords) {
        throw FormatError("CIFAR-10 batch " + path + " has " + std::to_string(size) +
                          " bytes, expected " + std::to_string(kRecord * kRecords));
    }
    f.seekg(0);
    std::vector<std::uint8_t> buf(size);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw FormatError("short read from " + path);
    for (std::size_t r = 0; r < kRecords; ++r) {
        const std::uint8_t* rec = buf.data() + r * kRecord;
        if (rec[0] > 9) {
            throw FormatError("CIFAR-10 batch " + path + ": invalid label " +
                              std::to_string(rec[0]) + " in record " + std::to_string(r));
        }
        out.labels.push_back(rec[0]);
        for (std::size_t i = 0; i < 3072; ++i) {
            out.images.push_back(static_cast<double>(rec[1 + i]) / 255.0);
        }
    }
}

}  // namespace detail

// Loads the standard binary batches (data_batch_1..5.bin + test_batch.bin).
inline std::pair<Dataset, Dataset> load_cifar10(const std::string& dir) {
    auto blank = [] {
        Dataset d;
        d.name = "cifar10";
        d.channels = 3;
        d.height = 32;
        d.width = 32;
        d.class_count = 10;
        return d;
    };
    Dataset train = blank(), test = blank();
    for (int b = 1; b <= 5; ++b) {
        detail::load_cifar10_batch(dir + "/data_batch_" + std::to_string(b) + ".bin", train);
    }
    detail::load_cifar10_batch(dir + "/test_batch.bin", test);
    return {std::move(train), std::move(test)};
}

// --- IDX (big-endian) ---------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
    std::uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw FormatError("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ofstream& f, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                         static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw FormatError("cannot open " + images_path);
    if (detail::read_be32(fi, images_path) != kIdxImagesMagic) {
        throw FormatError("IDX magic mismatch in " + images_path + " (expected images file)");
    }
    const std::uint32_t n = detail::read_be32(fi, images_path);
    const std::uint32_t rows = detail::read_be32(fi, images_path);
    const std::uint32_t cols = detail::read_be32(fi, images_path);

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw FormatError("cannot open " + labels_path);
    if (detail::read_be32(fl, labels_path) != kIdxLabelsMagic) {
        throw FormatError("IDX magic mismatch in " + labels_path + " (expected labels file)");
    }
    const std::uint32_t nl = detail::read_be32(fl, labels_path);
    if (n != nl) {
        throw FormatError("IDX dimension mismatch: " + std::to_string(n) + " images vs " +
                          std::to_string(nl) + " labels");
    }

    Dataset d;
    d.name = "idx";
    d.channels = 1;
    d.height = rows;
    d.width = cols;
    d.images.reserve(std::size_t(n) * rows * cols);
    d.labels.reserve(n);

    std::vector<std::uint8_t> img(std::size_t(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        fi.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
        if (!fi) throw FormatError("truncated IDX file: " + images_path);
        for (std::uint8_t p : img) d.images.push_back(static_cast<double>(p) / 255.0);
        int lb = fl.get();
        if (lb == EOF) throw FormatError("truncated IDX file: " + labels_path);
        d.labels.push_back(static_cast<std::size_t>(lb));
    }
    d.class_count = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
    return d;
}

// Writes a dataset pair of IDX files (pixels quantized back to bytes).
inline void save_idx(const Dataset& d, const std::string& images_path,
                     const std::string& labels_path) {
    if (d.channels != 1) throw ConfigError("IDX export supports single-channel data only");
    std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
    detail::write_be32(fi, kIdxImagesMagic);
    detail::write_be32(fi, static_cast<std::uint32_t>(d.size()));
    detail::write_be32(fi, static_cast<std::uint32_t>(d.height));
    detail::write_be32(fi, static_cast<std::uint32_t>(d.width));
    for (double v : d.images) {
        fi.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
    }
    std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
    detail::write_be32(fl, kIdxLabelsMagic);
    detail::write_be32(fl, static_cast<std::uint32_t>(d.size()));
    for (std::size_t l : d.labels) fl.put(static_cast<char>(static_cast<std::uint8_t>(l)));
    if (!fi || !fl) throw FormatError("short IDX write");
}

// --- Synthetic desk-scale corpus ----------------------------------------------

// Gaussian blob per class: each class has a fixed random center image, and
// samples are the center plus pixel noise. High separation / low noise makes
// the task linearly learnable.
struct SyntheticSpec {
    std::size_t class_count = 10;
    std::size_t samples_per_class = 100;
    std::size_t channels = 1;
    std::size_t height = 16;
    std::size_t width = 16;
    std::uint64_t seed = 1;        // determines class centers
    std::uint64_t noise_seed = 2;  // determines per-sample noise
    double separation = 0.8;       // center contrast around mid-gray
    double noise = 0.25;           // pixel noise stddev
};

inline Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.class_count == 0 || spec.samples_per_class == 0) {
        throw ConfigError("synthetic spec: class_count and samples_per_class must be positive");
    }
    Dataset d;
    d.name = "synthetic";
    d.channels = spec.channels;
    d.height = spec.height;
    d.width = spec.width;
    d.class_count = spec.class_count;
    const std::size_t pix = d.sample_size();

    RngStream center_rng = RngStream(spec.seed).derive(0xC0);
    std::vector<std::vector<double>> centers(spec.class_count);
    for (auto& c : centers) {
        c.resize(pix);
        for (auto& v : c) v = 0.5 + spec.separation * (center_rng.uniform() - 0.5);
    }

    RngStream noise_rng = RngStream(spec.noise_seed).derive(0xD0);
    for (std::size_t cls = 0; cls < spec.class_count; ++cls) {
        for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
            for (std::size_t i = 0; i < pix; ++i) {
                double v = centers[cls][i] + spec.noise * noise_rng.normal();
                d.images.push_back(std::clamp(v, 0.0, 1.0));
            }
            d.labels.push_back(cls);
        }
    }
    return d;
}

}  // namespace sinr
