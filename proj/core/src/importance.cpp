#include "sparnet/importance.hpp"

#include <cmath>
#include <stdexcept>

namespace sparnet::importance {

ImportanceVector compute_importance(const model::ModelParams& params0,
                                    const Matrix& source_x) {
    const std::size_t q = source_x.rows();
    if (q == 0) throw std::invalid_argument("compute_importance: no samples");

    const std::size_t p = params0.param_count();
    ImportanceVector omega;
    omega.values.assign(p, 0.0);
    omega.sample_count = q;
    omega.theta0_checksum = model::flatten_checksum(params0);

    Matrix x1(1, source_x.cols());
    for (std::size_t s = 0; s < q; ++s) {
        x1.set_row(0, source_x.row(s));
        model::ForwardTrace trace;
        const auto logits = model::forward_pure(params0, x1, model::NormMode::running_stats, &trace);
        Matrix dlogits(1, logits.cols());
        for (std::size_t c = 0; c < logits.cols(); ++c) dlogits(0, c) = 2.0 * logits(0, c);
        const auto grad = model::backward(trace, dlogits);
        for (std::size_t i = 0; i < p; ++i) omega.values[i] += std::abs(grad[i]);
    }
    const double inv_q = 1.0 / static_cast<double>(q);
    for (double& v : omega.values) v *= inv_q;
    return omega;
}

}  // namespace sparnet::importance
