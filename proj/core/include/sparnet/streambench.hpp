#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparnet/matrix.hpp"
#include "sparnet/model.hpp"
#include "sparnet/rng.hpp"

namespace sparnet::streambench {

struct SourceTaskConfig {
    double sigma = 0.25;  // within-class noise
    std::size_t train_size = 4000;
    std::size_t holdout_size = 1000;
};

/// Gaussian class clusters with unit-sphere means; the stand-in source
/// distribution every stream draws from.
struct SourceTask {
    std::size_t dim = 32;
    std::size_t classes = 10;
    double sigma = 0.25;
    std::uint64_t seed = 0;
    Matrix class_means;  // C x d, unit rows
    Dataset train;
    Dataset holdout;
};

SourceTask make_source_task(std::size_t d, std::size_t c, std::uint64_t seed,
                            const SourceTaskConfig& cfg = {});

/// Fresh labeled draws from the task's class-cluster distribution.
Dataset draw_source_samples(const SourceTask& task, std::size_t n, Rng& rng);

enum class CorruptionKind {
    gauss_noise,
    impulse_mask,
    rotation,
    scale,
    shift,
    blur_avg,
};

inline constexpr CorruptionKind kAllCorruptions[] = {
    CorruptionKind::gauss_noise, CorruptionKind::impulse_mask, CorruptionKind::rotation,
    CorruptionKind::scale,       CorruptionKind::shift,        CorruptionKind::blur_avg,
};

std::string corruption_name(CorruptionKind kind);
CorruptionKind corruption_from_name(const std::string& name);  // invalid_argument on unknown

/// Per-kind maximum magnitudes; severity s in 1..5 applies magnitude
/// (s/5) * max. Severity 0 is the identity.
struct CorruptionConfig {
    double feature_scale = 1.0;
    double gauss_sigma_max = 1.0;       // additive noise stddev at severity 5
    double mask_rate_max = 0.3;         // coordinate zeroing probability
    double rotation_angle_max = 0.7853981633974483;  // pi/4, in a seeded 2-plane
    double scale_factor_max = 2.0;      // multiplicative factor at severity 5
    double shift_dist_max = 1.0;        // translation along a seeded direction
    double blur_weight_max = 0.5;       // blend weight with a seeded neighbor
};

/// One corruption domain: kind, severity, and the seed that fixes the
/// domain's deterministic transform draw (rotation plane, shift direction,
/// blur stencil).
struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::gauss_noise;
    int severity = 5;
    std::uint64_t seed = 0;
};

/// Apply the corruption to one sample. The spec's seed fixes the structural
/// transform; rng supplies the per-sample randomness (noise, masks).
/// Throws std::invalid_argument for severity outside [0, 5].
std::vector<double> corrupt(std::span<const double> x, const CorruptionSpec& spec,
                            Rng& rng, const CorruptionConfig& cfg = {});

struct StreamBatch {
    Matrix x;
    std::vector<int> labels;  // metrics only; adaptation never sees these
    std::string domain;
    int severity = 0;
};

/// Ordered continual stream: one segment per corruption kind, fresh source
/// draws corrupted per segment.
struct DomainStream {
    std::vector<StreamBatch> batches;
    std::size_t batch_size = 0;
    std::vector<std::string> domain_order;
};

DomainStream build_stream(const SourceTask& task, std::span<const CorruptionKind> kinds,
                          int severity, std::size_t batches_per_domain,
                          std::size_t batch_size, std::uint64_t seed,
                          const CorruptionConfig& cfg = {});

/// Fraction of predictions that disagree with the labels.
double error_rate(std::span<const int> predictions, std::span<const int> labels);

/// Error of the current student on uncorrupted source holdout data,
/// running_stats mode; pure, no adaptation side effects.
double forgetting_probe(const model::ModelParams& params, const Dataset& holdout);

}  // namespace sparnet::streambench
