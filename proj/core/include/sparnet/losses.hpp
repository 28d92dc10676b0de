#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparnet/numerics.hpp"

namespace sparnet::losses {

/// Per-batch record of every objective term. The weighted sum identity
/// total == sce + lambda*gem + beta*reg holds within 1e-9; a term whose
/// sample group is empty is exactly 0.
struct LossBreakdown {
    double gem = 0.0;   // unweighted generalized entropy term
    double sce = 0.0;   // unweighted symmetric cross-entropy term
    double reg = 0.0;   // unweighted importance-weighted drift penalty
    double total = 0.0;
    double tau_used = 1.0;
    std::size_t n_reliable = 0;
    std::size_t n_unreliable = 0;
};

/// Mean prediction entropy over the batch; 0 for an empty batch.
double em_loss(const numerics::ProbBatch& probs);

struct GemResult {
    double value = 0.0;
    Matrix dlogits;  // analytic gradient, tau treated as a constant
};

/// Generalized entropy minimization: mean over samples of
/// tau^2 * H(softmax(z / tau)). At tau == 1 this is exactly em_loss of the
/// softmax probabilities. Throws std::invalid_argument for tau <= 0 or an
/// empty batch.
GemResult gem_loss(const numerics::LogitsBatch& logits, double tau);

struct SceResult {
    double value = 0.0;
    Matrix dstudent_probs;  // gradient w.r.t. student probabilities only
};

/// Symmetric cross-entropy between teacher pseudo-labels and student
/// predictions: mean over samples of (CE(pseudo->student) +
/// CE(student->pseudo)) / 2 with the probability floor inside every log.
/// Pseudo-labels are constants. An empty pair of batches yields {0, empty}.
SceResult sce_loss(const numerics::ProbBatch& pseudo, const numerics::ProbBatch& student);

struct RegResult {
    double value = 0.0;
    std::vector<double> dtheta;
};

/// Importance-weighted drift penalty sum_i omega_i * (theta_i - theta0_i)^2.
RegResult reg_loss(std::span<const double> theta, std::span<const double> theta0,
                   std::span<const double> omega);

struct LossParts {
    double gem = 0.0;
    double sce = 0.0;
    double reg = 0.0;
    double tau = 1.0;
    std::size_t n_reliable = 0;
    std::size_t n_unreliable = 0;
};

/// Combine per-term values into the full objective
/// total = sce + lambda*gem + beta*reg, zeroing terms whose group is empty.
LossBreakdown total_objective(const LossParts& parts, double lambda, double beta);

}  // namespace sparnet::losses
