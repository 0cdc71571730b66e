#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enscert/tensor.hpp"

namespace enscert::data {

/// Immutable feature/label table. Features are row vectors of a fixed width.
struct Dataset {
    std::vector<Vector> features;
    std::vector<int> labels;
    int num_classes = 0;
    int dim = 0;

    size_t size() const { return features.size(); }
    void validate() const;
};

/// Interleaved half-circle pair: arc one at the origin, arc two shifted by
/// (0.5, 0.5) and flipped, with isotropic Gaussian jitter. Exactly n/2 points
/// per class; deterministic per seed.
Dataset gen_two_moons(int n, double noise_std, uint64_t seed);

/// Isotropic Gaussian clusters, one class per center.
Dataset gen_blobs(const std::vector<Vector>& centers, int per_center, double noise_std,
                  uint64_t seed);

/// Big-endian IDX pair (images magic 2051, labels magic 2049). Pixels are
/// scaled to [0, 1] by /255. Throws std::runtime_error naming the byte
/// offset on malformed input.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

/// Writes features (clamped to [0,1], quantized to bytes) and labels in the
/// same IDX layout; rows x cols must match the feature width.
void write_idx(const Dataset& ds, int rows, int cols, const std::string& images_path,
               const std::string& labels_path);

/// Deterministic shuffle-split; the test side is optionally strided (every
/// stride-th item). max_n > 0 caps the shuffled pool before splitting.
struct SplitResult {
    Dataset train;
    Dataset test;
};
SplitResult split_and_subsample(const Dataset& ds, double train_fraction, int64_t max_n,
                                int stride, uint64_t seed);

/// CSV export: feature columns then the label column.
std::string to_csv(const Dataset& ds);

}  // namespace enscert::data
