#pragma once

#include <cstddef>
#include <vector>

#include "sparnet/numerics.hpp"

namespace sparnet::partition {

/// Entropy-threshold split of a mini-batch. Samples with entropy strictly
/// below the threshold are reliable; at-or-above goes unreliable. Index order
/// is preserved within each group.
struct SamplePartition {
    std::vector<std::size_t> reliable_idx;
    std::vector<std::size_t> unreliable_idx;
    std::vector<double> entropies;
    double threshold = 0.0;
};

/// The pre-defined entropy threshold 0.4 * ln C. Throws std::invalid_argument
/// for C < 2.
double default_threshold(std::size_t class_count);

/// Split by per-sample prediction entropy. An empty batch yields two empty
/// groups. Throws std::invalid_argument for a negative threshold.
SamplePartition partition_by_entropy(const numerics::ProbBatch& probs, double threshold);

}  // namespace sparnet::partition
