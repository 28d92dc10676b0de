#include "sparnet/partition.hpp"

#include <cmath>
#include <stdexcept>

namespace sparnet::partition {

double default_threshold(std::size_t class_count) {
    if (class_count < 2)
        throw std::invalid_argument("default_threshold: need >= 2 classes");
    return 0.4 * std::log(static_cast<double>(class_count));
}

SamplePartition partition_by_entropy(const numerics::ProbBatch& probs, double threshold) {
    if (threshold < 0.0)
        throw std::invalid_argument("partition_by_entropy: negative threshold");
    SamplePartition part;
    part.threshold = threshold;
    part.entropies.reserve(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double h = numerics::entropy(probs.row(i));
        part.entropies.push_back(h);
        if (h < threshold)
            part.reliable_idx.push_back(i);
        else
            part.unreliable_idx.push_back(i);
    }
    return part;
}

}  // namespace sparnet::partition
