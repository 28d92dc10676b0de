#pragma once

#include <span>
#include <vector>

#include "sparnet/matrix.hpp"

namespace sparnet::numerics {

using LogitsBatch = Matrix;  // N x C pre-softmax scores
using ProbBatch = Matrix;    // N x C rows on the probability simplex

/// Floor applied to probabilities inside every log so hard (one-hot) targets
/// cannot produce infinities.
inline constexpr double kProbFloor = 1e-7;

/// Temperature-scaled softmax. Shift-stable: adding a constant to all logits
/// leaves the output unchanged. Throws std::invalid_argument for tau <= 0 or
/// non-finite logits.
std::vector<double> softmax(std::span<const double> logits, double tau);

/// Shannon entropy -sum p log p with 0*log(0) := 0. Result lies in
/// [0, ln C]. Throws std::invalid_argument if p is not a probability vector
/// (entries >= 0, sum within 1e-9 of 1).
double entropy(std::span<const double> p);

/// -sum target_c * log(pred_c) with pred floored at kProbFloor inside the
/// log. cross_entropy(p, p) == entropy(p).
double cross_entropy(std::span<const double> target, std::span<const double> pred);

/// Population standard deviation (divisor C) of one sample's logits.
double logits_std(std::span<const double> logits);

/// max(1, (s/N) * sum_i logits_std(z_i)): the batch-mean logit spread, scaled
/// by the strength hyperparameter s and clamped below at 1 so scaling only
/// ever softens the distribution. Throws std::invalid_argument on an empty
/// batch or s <= 0.
double dynamic_temperature(const LogitsBatch& batch, double s);

ProbBatch softmax_rows(const LogitsBatch& z, double tau);
std::vector<double> entropy_rows(const ProbBatch& p);

/// Given p = softmax(z, 1) and dL/dp for one sample, write dL/dz into out.
void softmax_backward_row(std::span<const double> probs, std::span<const double> dprobs,
                          std::span<double> dlogits_out);

}  // namespace sparnet::numerics
