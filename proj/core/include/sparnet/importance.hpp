#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sparnet/model.hpp"

namespace sparnet::importance {

/// Per-parameter nonnegative importance weights, computed once against the
/// deployed source model and frozen for the whole adaptation run.
struct ImportanceVector {
    std::vector<double> values;       // length P, entries >= 0
    std::size_t sample_count = 0;     // Q used for the mean
    std::string theta0_checksum;      // flatten_checksum of the model it was computed for

    bool empty() const { return values.empty(); }
};

/// Mean absolute sensitivity of the squared logit norm:
/// omega_i = (1/Q) * sum_q | d ||f(x_q)||_2^2 / d theta_i |, with single-sample
/// forwards in running_stats mode so batch statistics never couple samples.
/// Fixed-order summation keeps the result order-independent.
ImportanceVector compute_importance(const model::ModelParams& params0,
                                    const Matrix& source_x);

}  // namespace sparnet::importance
