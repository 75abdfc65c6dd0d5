#include "fedu/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include "fedu/errors.hpp"

namespace fedu {

namespace {

constexpr Index kCifarSide = 32;
constexpr Index kCifarChannels = 3;
constexpr Index kCifarPixels = kCifarSide * kCifarSide * kCifarChannels;  // 3072
constexpr Index kCifarRecord = kCifarPixels + 1;                          // 3073
constexpr int kCifarClasses = 10;

std::vector<std::vector<Index>> indices_by_class(const Dataset& data) {
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(data.class_count));
    for (Index i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    return by_class;
}

}  // namespace

void Dataset::validate() const {
    if (class_count <= 0) throw ContractError("dataset: class_count must be positive");
    if (static_cast<Index>(labels.size()) != features.rows()) {
        throw ContractError("dataset: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(features.rows()) + " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw ContractError("dataset: label " + std::to_string(labels[i]) + " at row " +
                                std::to_string(i) + " outside [0, " + std::to_string(class_count) +
                                ")");
        }
    }
}

Dataset make_blobs(int classes, Index dim, Index per_class, Scalar separation, Rng& rng) {
    if (classes < 1) throw ConfigError("make_blobs: classes must be >= 1");
    if (dim < 1) throw ConfigError("make_blobs: dim must be >= 1");
    if (per_class < 1) throw ConfigError("make_blobs: per_class must be >= 1");
    if (separation < 0) throw ConfigError("make_blobs: separation must be >= 0");
    Matrix means(classes, dim);
    for (int c = 0; c < classes; ++c) {
        for (Index d = 0; d < dim; ++d) means(c, d) = separation * rng.normal();
    }
    Dataset data;
    data.class_count = classes;
    data.features.resize(static_cast<Index>(classes) * per_class, dim);
    data.labels.resize(static_cast<std::size_t>(classes) * static_cast<std::size_t>(per_class));
    Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (Index i = 0; i < per_class; ++i, ++row) {
            for (Index d = 0; d < dim; ++d) data.features(row, d) = means(c, d) + rng.normal();
            data.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return data;
}

Dataset load_cifar10(const std::string& path, int downsample_factor) {
    if (downsample_factor < 1 || kCifarSide % downsample_factor != 0) {
        throw ConfigError("cifar10: downsample factor " + std::to_string(downsample_factor) +
                          " must be a positive divisor of 32");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cifar10: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    const Index side = kCifarSide / downsample_factor;
    const Index dim = kCifarChannels * side * side;
    Dataset data;
    data.class_count = kCifarClasses;
    if (bytes.empty()) {
        std::cerr << "warning: cifar10 file '" << path << "' is empty; loaded 0 samples\n";
        data.features.resize(0, dim);
        return data;
    }
    if (bytes.size() % static_cast<std::size_t>(kCifarRecord) != 0) {
        const std::size_t truncated_at =
            (bytes.size() / static_cast<std::size_t>(kCifarRecord)) *
            static_cast<std::size_t>(kCifarRecord);
        throw ParseError("cifar10: truncated record in '" + path + "'", truncated_at);
    }
    const Index count = static_cast<Index>(bytes.size()) / kCifarRecord;
    data.features.resize(count, dim);
    data.labels.resize(static_cast<std::size_t>(count));
    const Scalar block = static_cast<Scalar>(downsample_factor) * downsample_factor;
    for (Index rec = 0; rec < count; ++rec) {
        const std::size_t base = static_cast<std::size_t>(rec) * kCifarRecord;
        const unsigned char label = bytes[base];
        if (label >= kCifarClasses) {
            throw ParseError("cifar10: label " + std::to_string(label) + " out of range in '" +
                                 path + "'",
                             base);
        }
        data.labels[static_cast<std::size_t>(rec)] = label;
        for (Index ch = 0; ch < kCifarChannels; ++ch) {
            const std::size_t ch_base = base + 1 + static_cast<std::size_t>(ch) * kCifarSide * kCifarSide;
            for (Index r = 0; r < side; ++r) {
                for (Index c = 0; c < side; ++c) {
                    Scalar total = 0;
                    for (int dr = 0; dr < downsample_factor; ++dr) {
                        for (int dc = 0; dc < downsample_factor; ++dc) {
                            const std::size_t px =
                                ch_base +
                                static_cast<std::size_t>(r * downsample_factor + dr) * kCifarSide +
                                static_cast<std::size_t>(c * downsample_factor + dc);
                            total += static_cast<Scalar>(bytes[px]) / Scalar(255);
                        }
                    }
                    data.features(rec, ch * side * side + r * side + c) = total / block;
                }
            }
        }
    }
    return data;
}

Dataset filter_classes(const Dataset& data, const std::vector<int>& keep) {
    data.validate();
    if (keep.empty()) throw ConfigError("filter_classes: empty class list");
    std::vector<int> remap(static_cast<std::size_t>(data.class_count), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] < 0 || keep[i] >= data.class_count) {
            throw ConfigError("filter_classes: class " + std::to_string(keep[i]) +
                              " outside [0, " + std::to_string(data.class_count) + ")");
        }
        if (remap[static_cast<std::size_t>(keep[i])] != -1) {
            throw ConfigError("filter_classes: class " + std::to_string(keep[i]) + " listed twice");
        }
        remap[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);
    }
    std::vector<Index> rows;
    for (Index i = 0; i < data.size(); ++i) {
        if (remap[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])] != -1) {
            rows.push_back(i);
        }
    }
    Dataset out;
    out.class_count = static_cast<int>(keep.size());
    out.features.resize(static_cast<Index>(rows.size()), data.dim());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = data.features.row(rows[i]);
        out.labels[i] = remap[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(rows[i])])];
    }
    return out;
}

Dataset take_rows(const Dataset& data, const std::vector<Index>& indices) {
    Dataset out;
    out.class_count = data.class_count;
    out.features.resize(static_cast<Index>(indices.size()), data.dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= data.size()) {
            throw ContractError("take_rows: index " + std::to_string(indices[i]) + " out of range");
        }
        out.features.row(static_cast<Index>(i)) = data.features.row(indices[i]);
        out.labels[i] = data.labels[static_cast<std::size_t>(indices[i])];
    }
    return out;
}

std::pair<Dataset, Dataset> split_tail_per_class(const Dataset& data, Index holdout_per_class) {
    data.validate();
    if (holdout_per_class < 0) throw ConfigError("split: holdout_per_class must be >= 0");
    auto by_class = indices_by_class(data);
    std::vector<Index> head, tail;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (static_cast<Index>(rows.size()) <= holdout_per_class) {
            throw ConfigError("split: class " + std::to_string(c) + " has only " +
                              std::to_string(rows.size()) + " samples, cannot hold out " +
                              std::to_string(holdout_per_class));
        }
        const std::size_t keep = rows.size() - static_cast<std::size_t>(holdout_per_class);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < keep ? head : tail).push_back(rows[i]);
        }
    }
    std::sort(head.begin(), head.end());
    std::sort(tail.begin(), tail.end());
    return {take_rows(data, head), take_rows(data, tail)};
}

std::pair<std::vector<Index>, std::vector<Index>> stratified_split(const Dataset& data,
                                                                   Scalar fraction, Rng& rng) {
    data.validate();
    if (!(fraction > 0) || fraction > 1) {
        throw ConfigError("stratified_split: fraction must be in (0, 1]");
    }
    auto by_class = indices_by_class(data);
    std::vector<Index> labeled, unlabeled;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        const auto take = static_cast<std::size_t>(
            std::floor(fraction * static_cast<Scalar>(rows.size())));
        if (take == 0) {
            throw ConfigError("stratified_split: fraction " + std::to_string(fraction) +
                              " yields no samples for class " + std::to_string(c));
        }
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < take ? labeled : unlabeled).push_back(rows[i]);
        }
    }
    std::sort(labeled.begin(), labeled.end());
    std::sort(unlabeled.begin(), unlabeled.end());
    return {std::move(labeled), std::move(unlabeled)};
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("export: cannot open '" + path + "' for writing");
    out << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
    for (Index d = 0; d < data.dim(); ++d) out << 'f' << '_' << d << ',';
    out << "label\n";
    for (Index i = 0; i < data.size(); ++i) {
        for (Index d = 0; d < data.dim(); ++d) out << data.features(i, d) << ',';
        out << data.labels[static_cast<std::size_t>(i)] << '\n';
    }
    if (!out) throw ConfigError("export: write to '" + path + "' failed");
}

}  // namespace fedu
