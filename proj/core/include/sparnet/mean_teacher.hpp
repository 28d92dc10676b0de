#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sparnet/model.hpp"
#include "sparnet/rng.hpp"
#include "sparnet/streambench.hpp"

namespace sparnet::mean_teacher {

/// EMA copy of the student providing stable pseudo-label targets.
/// Initialized from the source model so teacher and student start identical.
struct TeacherState {
    model::ModelParams params;
    double alpha = 0.999;     // EMA smoothing factor, in [0, 1]
    std::size_t n_aug = 32;   // augmentation passes per pseudo-label
};

/// Vector analog of crop-and-flip: small additive Gaussian jitter plus
/// random zero-masking of a small fraction of coordinates. Mean-preserving
/// up to the mask rate.
struct WeakAugmentParams {
    double jitter_sigma = 0.05;
    double mask_rate = 0.1;
};

std::vector<double> weak_augment(std::span<const double> x, Rng& rng,
                                 const WeakAugmentParams& p = {});

Matrix weak_augment_batch(const Matrix& x, Rng& rng, const WeakAugmentParams& p = {});

/// One draw from the benchmark corruption family at a random mild severity;
/// every call consumes fresh randomness, so repeated draws differ.
struct StrongAugmentParams {
    int severity_min = 1;
    int severity_max = 3;
    streambench::CorruptionConfig corruption;
};

std::vector<double> strong_augment_sample(std::span<const double> x, Rng& rng,
                                          const StrongAugmentParams& p = {});

using AugmentFn = std::function<std::vector<double>(std::span<const double>, Rng&)>;

/// Augmentation-averaged pseudo-labels: the mean over n_aug independent
/// strong augmentations of the teacher's softmax output, per sample. Forward
/// passes use batch statistics over the full passed batch (running stats for
/// a single-sample batch); the teacher state itself is never mutated.
numerics::ProbBatch aug_avg_prediction(const TeacherState& teacher, const Matrix& x,
                                       Rng& rng, const StrongAugmentParams& p = {});

/// Same, with a caller-supplied augmentation operator (test hook).
numerics::ProbBatch aug_avg_prediction(const TeacherState& teacher, const Matrix& x,
                                       Rng& rng, const AugmentFn& augment);

/// theta' <- alpha * theta' + (1 - alpha) * theta, elementwise over the
/// trainable parameters; running statistics blend with the same alpha.
void ema_update(TeacherState& teacher, const model::ModelParams& student);

}  // namespace sparnet::mean_teacher
