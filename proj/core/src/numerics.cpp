#include "sparnet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparnet/errors.hpp"

namespace sparnet::numerics {

namespace {

void check_prob_vector(std::span<const double> p) {
    if (p.size() < 2) throw std::invalid_argument("probability vector needs >= 2 classes");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= -1e-12) || !(v <= 1.0 + 1e-9))
            throw std::invalid_argument("probability entry outside [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("probability vector does not sum to 1");
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("softmax: tau must be > 0");
    if (logits.size() < 2) throw std::invalid_argument("softmax: need >= 2 classes");
    double m = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");
        m = std::max(m, z);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp((logits[c] - m) / tau);
        sum += out[c];
    }
    for (double& v : out) v /= sum;
    return out;
}

double entropy(std::span<const double> p) {
    check_prob_vector(p);
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

double cross_entropy(std::span<const double> target, std::span<const double> pred) {
    check_prob_vector(target);
    check_prob_vector(pred);
    if (target.size() != pred.size())
        throw ShapeError("cross_entropy: class counts differ");
    double ce = 0.0;
    for (std::size_t c = 0; c < target.size(); ++c) {
        if (target[c] > 0.0) ce -= target[c] * std::log(std::max(pred[c], kProbFloor));
    }
    return std::max(ce, 0.0);
}

double logits_std(std::span<const double> logits) {
    if (logits.size() < 2) throw std::invalid_argument("logits_std: need >= 2 classes");
    const double n = static_cast<double>(logits.size());
    double mean = 0.0;
    for (double z : logits) mean += z;
    mean /= n;
    double var = 0.0;
    for (double z : logits) var += (z - mean) * (z - mean);
    return std::sqrt(var / n);
}

double dynamic_temperature(const LogitsBatch& batch, double s) {
    if (s <= 0.0) throw std::invalid_argument("dynamic_temperature: s must be > 0");
    if (batch.empty()) throw std::invalid_argument("dynamic_temperature: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.rows(); ++i) acc += logits_std(batch.row(i));
    return std::max(1.0, s * acc / static_cast<double>(batch.rows()));
}

ProbBatch softmax_rows(const LogitsBatch& z, double tau) {
    ProbBatch out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) out.set_row(i, softmax(z.row(i), tau));
    return out;
}

std::vector<double> entropy_rows(const ProbBatch& p) {
    std::vector<double> out(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) out[i] = entropy(p.row(i));
    return out;
}

void softmax_backward_row(std::span<const double> probs, std::span<const double> dprobs,
                          std::span<double> dlogits_out) {
    if (probs.size() != dprobs.size() || probs.size() != dlogits_out.size())
        throw ShapeError("softmax_backward_row: size mismatch");
    double dot = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) dot += dprobs[c] * probs[c];
    for (std::size_t c = 0; c < probs.size(); ++c)
        dlogits_out[c] = probs[c] * (dprobs[c] - dot);
}

}  // namespace sparnet::numerics
