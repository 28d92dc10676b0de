#include "sparnet/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "sparnet/errors.hpp"

namespace sparnet::losses {

double em_loss(const numerics::ProbBatch& probs) {
    if (probs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) acc += numerics::entropy(probs.row(i));
    return acc / static_cast<double>(probs.rows());
}

GemResult gem_loss(const numerics::LogitsBatch& logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("gem_loss: tau must be > 0");
    if (logits.empty()) throw std::invalid_argument("gem_loss: empty batch");

    const std::size_t n = logits.rows();
    const std::size_t c_count = logits.cols();
    GemResult res;
    res.dlogits = Matrix(n, c_count);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = numerics::softmax(logits.row(i), tau);
        const double h = numerics::entropy(p);
        res.value += tau * tau * h;
        // d/dz_j of tau^2 * H(softmax(z/tau)) = -tau * p_j * (log p_j + H)
        auto d = res.dlogits.row(i);
        for (std::size_t j = 0; j < c_count; ++j) {
            d[j] = (p[j] > 0.0)
                       ? -tau * p[j] * (std::log(p[j]) + h) / static_cast<double>(n)
                       : 0.0;
        }
    }
    res.value /= static_cast<double>(n);
    return res;
}

SceResult sce_loss(const numerics::ProbBatch& pseudo, const numerics::ProbBatch& student) {
    if (pseudo.rows() != student.rows() || pseudo.cols() != student.cols())
        throw ShapeError("sce_loss: batch shapes differ");
    SceResult res;
    if (pseudo.empty()) return res;

    const std::size_t n = pseudo.rows();
    const std::size_t c_count = pseudo.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    res.dstudent_probs = Matrix(n, c_count);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ps = pseudo.row(i);
        const auto st = student.row(i);
        res.value += 0.5 * (numerics::cross_entropy(ps, st) + numerics::cross_entropy(st, ps)) * inv_n;
        auto d = res.dstudent_probs.row(i);
        for (std::size_t c = 0; c < c_count; ++c) {
            double g = 0.0;
            if (st[c] > numerics::kProbFloor) g -= ps[c] / st[c];
            g -= std::log(std::max(ps[c], numerics::kProbFloor));
            d[c] = 0.5 * inv_n * g;
        }
    }
    return res;
}

RegResult reg_loss(std::span<const double> theta, std::span<const double> theta0,
                   std::span<const double> omega) {
    if (theta.size() != theta0.size() || theta.size() != omega.size())
        throw ShapeError("reg_loss: vector lengths differ");
    RegResult res;
    res.dtheta.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (omega[i] < 0.0) throw std::invalid_argument("reg_loss: negative importance");
        const double d = theta[i] - theta0[i];
        res.value += omega[i] * d * d;
        res.dtheta[i] = 2.0 * omega[i] * d;
    }
    return res;
}

LossBreakdown total_objective(const LossParts& parts, double lambda, double beta) {
    if (lambda < 0.0 || beta < 0.0)
        throw std::invalid_argument("total_objective: lambda and beta must be >= 0");
    LossBreakdown b;
    b.gem = parts.n_reliable == 0 ? 0.0 : parts.gem;
    b.sce = parts.n_unreliable == 0 ? 0.0 : parts.sce;
    b.reg = parts.reg;
    b.tau_used = parts.tau;
    b.n_reliable = parts.n_reliable;
    b.n_unreliable = parts.n_unreliable;
    b.total = b.sce + lambda * b.gem + beta * b.reg;
    return b;
}

}  // namespace sparnet::losses
