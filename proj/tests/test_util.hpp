#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sparnet/matrix.hpp"
#include "sparnet/model.hpp"
#include "sparnet/rng.hpp"

namespace testutil {

using sparnet::Matrix;
using sparnet::Rng;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = normal(rng);
    return m;
}

inline sparnet::numerics::ProbBatch random_prob_batch(std::size_t rows, std::size_t cols,
                                                      Rng& rng) {
    const Matrix z = random_matrix(rows, cols, rng, 2.0);
    return sparnet::numerics::softmax_rows(z, 1.0);
}

/// Central finite differences of a scalar function of a flat parameter
/// vector.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> theta,
    double h = 1e-5) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// max_i |a_i - f_i| / max(|a_i| + |f_i|, floor). The floor keeps
/// finite-difference roundoff on near-zero entries from dominating; a wrong
/// gradient still shows up as an O(1) ratio.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& fd,
                          double floor = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max(std::abs(analytic[i]) + std::abs(fd[i]), floor);
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
    }
    return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

/// Small random architecture with every dimension in [2, cap].
inline sparnet::model::Architecture random_small_arch(Rng& rng, std::size_t cap = 16) {
    std::uniform_int_distribution<std::size_t> dim(2, cap);
    sparnet::model::Architecture arch;
    arch.input_dim = dim(rng);
    arch.hidden = {dim(rng)};
    arch.classes = dim(rng);
    return arch;
}

}  // namespace testutil
