#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedu/rng.hpp"
#include "fedu/types.hpp"

namespace fedu {

struct Dataset {
    Matrix features;          // N x D
    std::vector<int> labels;  // N entries in [0, class_count)
    int class_count = 0;

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }

    void validate() const;
};

// Gaussian clusters with unit covariance. Class means are separation * z with
// z ~ N(0, I), so typical pairwise mean distance scales with `separation`.
// Rows are grouped by class: class c occupies rows [c*per_class, (c+1)*per_class).
Dataset make_blobs(int classes, Index dim, Index per_class, Scalar separation, Rng& rng);

// CIFAR-10 binary format: 3073-byte records, one label byte (0..9) followed by
// 3072 channel-major pixel bytes. Pixels are scaled to [0, 1]. A downsample
// factor f > 1 average-pools each 32x32 channel over f x f blocks (f must
// divide 32); features stay channel-major. An empty file yields a size-0
// dataset and a warning on stderr; a truncated file or an out-of-range label
// is a ParseError carrying the byte offset.
Dataset load_cifar10(const std::string& path, int downsample_factor = 1);

// Keep only the given labels, remapped to 0..keep.size()-1 in the order given.
Dataset filter_classes(const Dataset& data, const std::vector<int>& keep);

Dataset take_rows(const Dataset& data, const std::vector<Index>& indices);

// Deterministic held-out split: within each class, the last `holdout_per_class`
// samples (by dataset order) form the second set. Every class must keep at
// least one sample in the first set.
std::pair<Dataset, Dataset> split_tail_per_class(const Dataset& data, Index holdout_per_class);

// Class-stratified index split: floor(fraction * n_c) samples per class are
// drawn into the first (labeled) list, the rest form the second. A class that
// would receive zero samples is a ConfigError.
std::pair<std::vector<Index>, std::vector<Index>> stratified_split(const Dataset& data,
                                                                   Scalar fraction, Rng& rng);

// Header f_0,...,f_{D-1},label; one row per sample, full double precision.
void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace fedu
