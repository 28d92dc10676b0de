#include "sparnet/mean_teacher.hpp"

#include <stdexcept>

#include "sparnet/errors.hpp"

namespace sparnet::mean_teacher {

std::vector<double> weak_augment(std::span<const double> x, Rng& rng,
                                 const WeakAugmentParams& p) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> y(x.begin(), x.end());
    for (double& e : y) e += p.jitter_sigma * normal(rng);
    for (double& e : y)
        if (uniform(rng) < p.mask_rate) e = 0.0;
    return y;
}

Matrix weak_augment_batch(const Matrix& x, Rng& rng, const WeakAugmentParams& p) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) out.set_row(i, weak_augment(x.row(i), rng, p));
    return out;
}

std::vector<double> strong_augment_sample(std::span<const double> x, Rng& rng,
                                          const StrongAugmentParams& p) {
    std::uniform_int_distribution<std::size_t> kind_dist(0, std::size(streambench::kAllCorruptions) - 1);
    std::uniform_int_distribution<int> sev_dist(p.severity_min, p.severity_max);
    streambench::CorruptionSpec spec;
    spec.kind = streambench::kAllCorruptions[kind_dist(rng)];
    spec.severity = sev_dist(rng);
    spec.seed = rng();
    return streambench::corrupt(x, spec, rng, p.corruption);
}

numerics::ProbBatch aug_avg_prediction(const TeacherState& teacher, const Matrix& x,
                                       Rng& rng, const AugmentFn& augment) {
    if (teacher.n_aug < 1) throw std::invalid_argument("aug_avg_prediction: n_aug must be >= 1");
    const std::size_t n = x.rows();
    const auto mode =
        n >= 2 ? model::NormMode::batch_stats : model::NormMode::running_stats;
    numerics::ProbBatch accum(n, teacher.params.arch.classes);
    Matrix xa(n, x.cols());
    for (std::size_t a = 0; a < teacher.n_aug; ++a) {
        for (std::size_t i = 0; i < n; ++i) xa.set_row(i, augment(x.row(i), rng));
        const auto logits = model::forward_pure(teacher.params, xa, mode);
        const auto probs = numerics::softmax_rows(logits, 1.0);
        for (std::size_t i = 0; i < n * accum.cols(); ++i)
            accum.storage()[i] += probs.storage()[i];
    }
    const double inv = 1.0 / static_cast<double>(teacher.n_aug);
    for (double& v : accum.storage()) v *= inv;
    return accum;
}

numerics::ProbBatch aug_avg_prediction(const TeacherState& teacher, const Matrix& x,
                                       Rng& rng, const StrongAugmentParams& p) {
    return aug_avg_prediction(teacher, x, rng,
                              AugmentFn([&p](std::span<const double> row, Rng& r) {
                                  return strong_augment_sample(row, r, p);
                              }));
}

void ema_update(TeacherState& teacher, const model::ModelParams& student) {
    if (teacher.params.arch != student.arch)
        throw ShapeError("ema_update: architecture mismatch");
    if (teacher.alpha < 0.0 || teacher.alpha > 1.0)
        throw std::invalid_argument("ema_update: alpha outside [0, 1]");
    const double a = teacher.alpha;

    std::vector<double> t = teacher.params.flatten();
    const std::vector<double> s = student.flatten();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = a * t[i] + (1.0 - a) * s[i];
    teacher.params.unflatten(t);

    for (std::size_t k = 0; k < teacher.params.layers.size(); ++k) {
        auto& tl = teacher.params.layers[k];
        const auto& sl = student.layers[k];
        for (std::size_t f = 0; f < tl.running_mean.size(); ++f) {
            tl.running_mean[f] = a * tl.running_mean[f] + (1.0 - a) * sl.running_mean[f];
            tl.running_var[f] = a * tl.running_var[f] + (1.0 - a) * sl.running_var[f];
        }
    }
}

}  // namespace sparnet::mean_teacher
