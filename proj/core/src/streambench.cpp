#include "sparnet/streambench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sparnet/errors.hpp"

namespace sparnet::streambench {

namespace {

std::vector<double> unit_gaussian_vector(std::size_t d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& e : v) {
            e = normal(rng);
            norm += e * e;
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-9);
    for (double& e : v) e /= norm;
    return v;
}

}  // namespace

SourceTask make_source_task(std::size_t d, std::size_t c, std::uint64_t seed,
                            const SourceTaskConfig& cfg) {
    if (d < 2 || c < 2) throw std::invalid_argument("make_source_task: need d >= 2, C >= 2");
    SourceTask task;
    task.dim = d;
    task.classes = c;
    task.sigma = cfg.sigma;
    task.seed = seed;

    Rng rng = make_rng(seed, seed_tag::task);
    task.class_means = Matrix(c, d);
    for (std::size_t k = 0; k < c; ++k) task.class_means.set_row(k, unit_gaussian_vector(d, rng));

    task.train = draw_source_samples(task, cfg.train_size, rng);
    task.holdout = draw_source_samples(task, cfg.holdout_size, rng);
    return task;
}

Dataset draw_source_samples(const SourceTask& task, std::size_t n, Rng& rng) {
    std::uniform_int_distribution<int> label_dist(0, static_cast<int>(task.classes) - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data;
    data.x = Matrix(n, task.dim);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = label_dist(rng);
        data.labels[i] = y;
        const auto mean = task.class_means.row(static_cast<std::size_t>(y));
        auto row = data.x.row(i);
        for (std::size_t j = 0; j < task.dim; ++j) row[j] = mean[j] + task.sigma * normal(rng);
    }
    return data;
}

std::string corruption_name(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::gauss_noise: return "gauss_noise";
        case CorruptionKind::impulse_mask: return "impulse_mask";
        case CorruptionKind::rotation: return "rotation";
        case CorruptionKind::scale: return "scale";
        case CorruptionKind::shift: return "shift";
        case CorruptionKind::blur_avg: return "blur_avg";
    }
    throw std::invalid_argument("corruption_name: unknown kind");
}

CorruptionKind corruption_from_name(const std::string& name) {
    for (CorruptionKind k : kAllCorruptions) {
        if (corruption_name(k) == name) return k;
    }
    throw std::invalid_argument("unknown corruption kind: " + name);
}

std::vector<double> corrupt(std::span<const double> x, const CorruptionSpec& spec,
                            Rng& rng, const CorruptionConfig& cfg) {
    if (spec.severity < 0 || spec.severity > 5)
        throw std::invalid_argument("corrupt: severity outside [0, 5]");
    std::vector<double> y(x.begin(), x.end());
    if (spec.severity == 0) return y;

    const double m = static_cast<double>(spec.severity) / 5.0;
    const std::size_t d = x.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    switch (spec.kind) {
        case CorruptionKind::gauss_noise: {
            const double sigma = m * cfg.gauss_sigma_max * cfg.feature_scale;
            for (double& e : y) e += sigma * normal(rng);
            break;
        }
        case CorruptionKind::impulse_mask: {
            const double rate = m * cfg.mask_rate_max;
            for (double& e : y)
                if (uniform(rng) < rate) e = 0.0;
            break;
        }
        case CorruptionKind::rotation: {
            // Plane fixed by the domain seed; rotate by the severity angle.
            Rng plane_rng = make_rng(spec.seed, 0x21);
            auto u = unit_gaussian_vector(d, plane_rng);
            auto v = unit_gaussian_vector(d, plane_rng);
            double uv = 0.0;
            for (std::size_t j = 0; j < d; ++j) uv += u[j] * v[j];
            double vnorm = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                v[j] -= uv * u[j];
                vnorm += v[j] * v[j];
            }
            vnorm = std::sqrt(vnorm);
            for (double& e : v) e /= vnorm;

            const double angle = m * cfg.rotation_angle_max;
            const double cu = std::cos(angle) - 1.0;
            const double su = std::sin(angle);
            double xu = 0.0, xv = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                xu += u[j] * x[j];
                xv += v[j] * x[j];
            }
            for (std::size_t j = 0; j < d; ++j)
                y[j] = x[j] + cu * (xu * u[j] + xv * v[j]) + su * (xu * v[j] - xv * u[j]);
            break;
        }
        case CorruptionKind::scale: {
            const double c = 1.0 + m * (cfg.scale_factor_max - 1.0);
            for (double& e : y) e *= c;
            break;
        }
        case CorruptionKind::shift: {
            Rng dir_rng = make_rng(spec.seed, 0x22);
            const auto dir = unit_gaussian_vector(d, dir_rng);
            const double dist = m * cfg.shift_dist_max * cfg.feature_scale;
            for (std::size_t j = 0; j < d; ++j) y[j] += dist * dir[j];
            break;
        }
        case CorruptionKind::blur_avg: {
            Rng stencil_rng = make_rng(spec.seed, 0x23);
            std::vector<std::size_t> neighbor(d);
            std::iota(neighbor.begin(), neighbor.end(), 0);
            std::shuffle(neighbor.begin(), neighbor.end(), stencil_rng);
            const double w = m * cfg.blur_weight_max;
            for (std::size_t j = 0; j < d; ++j) y[j] = (1.0 - w) * x[j] + w * x[neighbor[j]];
            break;
        }
    }
    return y;
}

DomainStream build_stream(const SourceTask& task, std::span<const CorruptionKind> kinds,
                          int severity, std::size_t batches_per_domain,
                          std::size_t batch_size, std::uint64_t seed,
                          const CorruptionConfig& cfg) {
    if (batches_per_domain < 1)
        throw std::invalid_argument("build_stream: batches_per_domain must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("build_stream: batch_size must be >= 1");

    DomainStream stream;
    stream.batch_size = batch_size;
    Rng rng = make_rng(seed, seed_tag::stream);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        CorruptionSpec spec{kinds[k], severity, derive_seed(seed, 0x1000 + k)};
        stream.domain_order.push_back(corruption_name(spec.kind));
        for (std::size_t b = 0; b < batches_per_domain; ++b) {
            Dataset clean = draw_source_samples(task, batch_size, rng);
            StreamBatch batch;
            batch.labels = std::move(clean.labels);
            batch.domain = corruption_name(spec.kind);
            batch.severity = severity;
            batch.x = Matrix(batch_size, task.dim);
            for (std::size_t i = 0; i < batch_size; ++i)
                batch.x.set_row(i, corrupt(clean.x.row(i), spec, rng, cfg));
            stream.batches.push_back(std::move(batch));
        }
    }
    return stream;
}

double error_rate(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw ShapeError("error_rate: length mismatch");
    if (predictions.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] != labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double forgetting_probe(const model::ModelParams& params, const Dataset& holdout) {
    return model::eval_error(params, holdout);
}

}  // namespace sparnet::streambench
