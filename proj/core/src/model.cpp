#include "sparnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "sparnet/errors.hpp"
#include "sparnet/rng.hpp"

namespace sparnet::model {

std::size_t Architecture::param_count() const {
    std::size_t p = 0;
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
        p += h * in + 3 * h;  // weight, bias, gamma, beta
        in = h;
    }
    p += classes * in + classes;
    return p;
}

ModelParams ModelParams::init(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim < 1 || arch.classes < 1)
        throw std::invalid_argument("init: bad architecture");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    ModelParams p;
    p.arch = arch;
    std::size_t in = arch.input_dim;
    for (std::size_t h : arch.hidden) {
        HiddenLayer layer;
        layer.weight = Matrix(h, in);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : layer.weight.storage()) w = scale * normal(rng);
        layer.bias.assign(h, 0.0);
        layer.gamma.assign(h, 1.0);
        layer.beta.assign(h, 0.0);
        layer.running_mean.assign(h, 0.0);
        layer.running_var.assign(h, 1.0);
        p.layers.push_back(std::move(layer));
        in = h;
    }
    p.out_weight = Matrix(arch.classes, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : p.out_weight.storage()) w = scale * normal(rng);
    p.out_bias.assign(arch.classes, 0.0);
    return p;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> v;
    v.reserve(param_count());
    for (const auto& l : layers) {
        v.insert(v.end(), l.weight.storage().begin(), l.weight.storage().end());
        v.insert(v.end(), l.bias.begin(), l.bias.end());
        v.insert(v.end(), l.gamma.begin(), l.gamma.end());
        v.insert(v.end(), l.beta.begin(), l.beta.end());
    }
    v.insert(v.end(), out_weight.storage().begin(), out_weight.storage().end());
    v.insert(v.end(), out_bias.begin(), out_bias.end());
    return v;
}

void ModelParams::unflatten(std::span<const double> v) {
    if (v.size() != param_count()) throw ShapeError("unflatten: wrong length");
    std::size_t pos = 0;
    auto take = [&](double* dst, std::size_t n) {
        std::copy(v.begin() + pos, v.begin() + pos + n, dst);
        pos += n;
    };
    for (auto& l : layers) {
        take(l.weight.storage().data(), l.weight.storage().size());
        take(l.bias.data(), l.bias.size());
        take(l.gamma.data(), l.gamma.size());
        take(l.beta.data(), l.beta.size());
    }
    take(out_weight.storage().data(), out_weight.storage().size());
    take(out_bias.data(), out_bias.size());
}

std::vector<std::uint8_t> ModelParams::norm_mask() const {
    std::vector<std::uint8_t> mask(param_count(), 0);
    std::size_t pos = 0;
    for (const auto& l : layers) {
        pos += l.weight.storage().size() + l.bias.size();
        std::fill(mask.begin() + pos, mask.begin() + pos + 2 * l.gamma.size(), 1);
        pos += 2 * l.gamma.size();
    }
    return mask;
}

std::string flatten_checksum(const ModelParams& p) {
    const std::vector<double> flat = p.flatten();
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (double d : flat) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            hash ^= (bits >> (8 * b)) & 0xffull;
            hash *= 0x100000001b3ull;
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

// y[i][f] = sum_j x[i][j] * w[f][j] + b[f]
Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> b) {
    Matrix y(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t f = 0; f < w.rows(); ++f) {
            const auto wf = w.row(f);
            double acc = b[f];
            for (std::size_t j = 0; j < wf.size(); ++j) acc += wf[j] * xi[j];
            yi[f] = acc;
        }
    }
    return y;
}

}  // namespace

numerics::LogitsBatch forward_pure(const ModelParams& params, const Matrix& x,
                                   NormMode mode, ForwardTrace* trace) {
    const std::size_t n = x.rows();
    if (n == 0) throw std::invalid_argument("forward: empty batch");
    if (x.cols() != params.arch.input_dim)
        throw ShapeError("forward: input dim mismatch");
    if (mode == NormMode::batch_stats && n < 2)
        throw std::invalid_argument("forward: batch_stats mode needs N >= 2");

    if (trace) {
        *trace = ForwardTrace{};
        trace->mode = mode;
        trace->batch = n;
        trace->arch = params.arch;
    }

    Matrix act = x;
    for (const auto& layer : params.layers) {
        const std::size_t h = layer.bias.size();
        Matrix u = affine(act, layer.weight, layer.bias);

        std::vector<double> mu(h), var(h);
        std::vector<double> new_rm, new_rv;
        if (mode == NormMode::batch_stats) {
            for (std::size_t f = 0; f < h; ++f) {
                double m = 0.0;
                for (std::size_t i = 0; i < n; ++i) m += u(i, f);
                m /= static_cast<double>(n);
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = u(i, f) - m;
                    s += d * d;
                }
                mu[f] = m;
                var[f] = s / static_cast<double>(n);
            }
            new_rm.resize(h);
            new_rv.resize(h);
            for (std::size_t f = 0; f < h; ++f) {
                new_rm[f] = (1.0 - kBnMomentum) * layer.running_mean[f] + kBnMomentum * mu[f];
                new_rv[f] = (1.0 - kBnMomentum) * layer.running_var[f] + kBnMomentum * var[f];
            }
        } else {
            mu = layer.running_mean;
            var = layer.running_var;
        }

        std::vector<double> inv_std(h);
        for (std::size_t f = 0; f < h; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + kBnEps);

        Matrix xhat(n, h), t(n, h);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < h; ++f) {
                const double xh = (u(i, f) - mu[f]) * inv_std[f];
                xhat(i, f) = xh;
                t(i, f) = std::tanh(layer.gamma[f] * xh + layer.beta[f]);
            }
        }

        if (trace) {
            ForwardTrace::LayerCache cache;
            cache.input = act;
            cache.xhat = xhat;
            cache.tanh_out = t;
            cache.mu = std::move(mu);
            cache.inv_std = std::move(inv_std);
            cache.gamma = layer.gamma;
            cache.weight = layer.weight;
            cache.new_running_mean = std::move(new_rm);
            cache.new_running_var = std::move(new_rv);
            trace->layers.push_back(std::move(cache));
        }
        act = std::move(t);
    }

    Matrix logits = affine(act, params.out_weight, params.out_bias);
    if (trace) {
        trace->last_input = std::move(act);
        trace->out_weight = params.out_weight;
    }
    return logits;
}

void commit_running_stats(ModelParams& params, const ForwardTrace& trace) {
    if (trace.mode != NormMode::batch_stats) return;
    if (trace.arch != params.arch) throw StateError("commit_running_stats: trace mismatch");
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        params.layers[k].running_mean = trace.layers[k].new_running_mean;
        params.layers[k].running_var = trace.layers[k].new_running_var;
    }
}

numerics::LogitsBatch forward(ModelParams& params, const Matrix& x, NormMode mode,
                              ForwardTrace* trace) {
    ForwardTrace local;
    ForwardTrace* t = trace ? trace : &local;
    auto logits = forward_pure(params, x, mode, t);
    commit_running_stats(params, *t);
    return logits;
}

std::vector<double> backward(ForwardTrace& trace, const Matrix& dlogits) {
    if (trace.consumed) throw StateError("backward: trace already consumed");
    if (dlogits.rows() != trace.batch || dlogits.cols() != trace.arch.classes)
        throw ShapeError("backward: dlogits shape mismatch");
    trace.consumed = true;

    const std::size_t n = trace.batch;
    std::vector<double> grad(trace.arch.param_count(), 0.0);

    // Flat offsets mirror ModelParams::flatten.
    std::vector<std::size_t> offsets;
    std::size_t pos = 0, in = trace.arch.input_dim;
    for (std::size_t h : trace.arch.hidden) {
        offsets.push_back(pos);
        pos += h * in + 3 * h;
        in = h;
    }
    const std::size_t out_off = pos;

    // Output affine.
    const Matrix& a_last = trace.last_input;
    const std::size_t c_count = trace.arch.classes;
    const std::size_t last_in = a_last.cols();
    Matrix dact(n, last_in);
    for (std::size_t c = 0; c < c_count; ++c) {
        double db = 0.0;
        for (std::size_t i = 0; i < n; ++i) db += dlogits(i, c);
        grad[out_off + c_count * last_in + c] = db;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto dli = dlogits.row(i);
        const auto ai = a_last.row(i);
        auto dai = dact.row(i);
        for (std::size_t c = 0; c < c_count; ++c) {
            const double g = dli[c];
            const auto wc = trace.out_weight.row(c);
            for (std::size_t j = 0; j < last_in; ++j) {
                grad[out_off + c * last_in + j] += g * ai[j];
                dai[j] += g * wc[j];
            }
        }
    }

    // Hidden layers, reversed.
    for (std::size_t k = trace.layers.size(); k-- > 0;) {
        const auto& cache = trace.layers[k];
        const std::size_t h = cache.gamma.size();
        const std::size_t lin = cache.input.cols();
        const std::size_t off = offsets[k];
        const std::size_t off_b = off + h * lin;
        const std::size_t off_g = off_b + h;
        const std::size_t off_be = off_g + h;

        // Through tanh: dy = dact * (1 - t^2), then batchnorm scale/shift.
        Matrix dxhat(n, h);
        std::vector<double> dgamma(h, 0.0), dbeta(h, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < h; ++f) {
                const double t = cache.tanh_out(i, f);
                const double dy = dact(i, f) * (1.0 - t * t);
                dgamma[f] += dy * cache.xhat(i, f);
                dbeta[f] += dy;
                dxhat(i, f) = dy * cache.gamma[f];
            }
        }
        for (std::size_t f = 0; f < h; ++f) {
            grad[off_g + f] = dgamma[f];
            grad[off_be + f] = dbeta[f];
        }

        // Through the normalization to the affine output u.
        Matrix du(n, h);
        if (trace.mode == NormMode::batch_stats) {
            const double dn = static_cast<double>(n);
            for (std::size_t f = 0; f < h; ++f) {
                const double istd = cache.inv_std[f];
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    sum_dxhat += dxhat(i, f);
                    sum_dxhat_xhat += dxhat(i, f) * cache.xhat(i, f);
                }
                // du = istd/N * (N*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
                for (std::size_t i = 0; i < n; ++i) {
                    du(i, f) = istd / dn *
                               (dn * dxhat(i, f) - sum_dxhat -
                                cache.xhat(i, f) * sum_dxhat_xhat);
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t f = 0; f < h; ++f) du(i, f) = dxhat(i, f) * cache.inv_std[f];
        }

        // Through the affine.
        Matrix dinput(n, lin);
        for (std::size_t f = 0; f < h; ++f) {
            double db = 0.0;
            for (std::size_t i = 0; i < n; ++i) db += du(i, f);
            grad[off_b + f] = db;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto xi = cache.input.row(i);
            auto dxi = dinput.row(i);
            for (std::size_t f = 0; f < h; ++f) {
                const double g = du(i, f);
                const auto wf = cache.weight.row(f);
                for (std::size_t j = 0; j < lin; ++j) {
                    grad[off + f * lin + j] += g * xi[j];
                    dxi[j] += g * wf[j];
                }
            }
        }
        dact = std::move(dinput);
    }
    return grad;
}

OptimizerState make_optimizer(OptimizerKind kind, double lr, std::size_t param_count) {
    OptimizerState s;
    s.kind = kind;
    s.lr = lr;
    s.m.assign(param_count, 0.0);
    s.v.assign(param_count, 0.0);
    return s;
}

void optimizer_step(OptimizerState& state, ModelParams& params,
                    std::span<const double> grad) {
    const std::size_t p = params.param_count();
    if (grad.size() != p) throw ShapeError("optimizer_step: gradient length mismatch");
    for (double g : grad) {
        if (!std::isfinite(g))
            throw NumericalError("optimizer_step: non-finite gradient entry");
    }

    std::vector<double> theta = params.flatten();
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < p; ++i) theta[i] -= state.lr * grad[i];
    } else {
        if (state.m.size() != p || state.v.size() != p)
            throw ShapeError("optimizer_step: moment length mismatch");
        state.step += 1;
        const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < p; ++i) {
            state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
            state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            const double mhat = state.m[i] / bc1;
            const double vhat = state.v[i] / bc2;
            theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    params.unflatten(theta);
}

double eval_error(const ModelParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("eval_error: empty dataset");
    auto logits = forward_pure(params, data.x, NormMode::running_stats);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto zi = logits.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < zi.size(); ++c)
            if (zi[c] > zi[best]) best = c;
        if (static_cast<int>(best) != data.labels[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(logits.rows());
}

ModelParams pretrain_source(const Dataset& train, const Dataset& holdout,
                            const Architecture& arch, const PretrainConfig& cfg) {
    if (train.size() == 0) throw std::invalid_argument("pretrain_source: empty dataset");
    for (int y : train.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= arch.classes)
            throw std::invalid_argument("pretrain_source: label out of range");
    }

    ModelParams params = ModelParams::init(arch, derive_seed(cfg.seed, 0x11));
    OptimizerState opt = make_optimizer(OptimizerKind::adam, cfg.lr, arch.param_count());
    Rng shuffle_rng = make_rng(cfg.seed, 0x12);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    double err = 1.0;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start + 1 < order.size(); start += cfg.batch_size) {
            const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
            if (bs < 2) break;  // batch_stats needs at least two samples
            Matrix xb(bs, arch.input_dim);
            std::vector<int> yb(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                xb.set_row(i, train.x.row(order[start + i]));
                yb[i] = train.labels[order[start + i]];
            }
            ForwardTrace trace;
            auto logits = forward(params, xb, NormMode::batch_stats, &trace);
            auto probs = numerics::softmax_rows(logits, 1.0);
            Matrix dlogits(bs, arch.classes);
            for (std::size_t i = 0; i < bs; ++i) {
                for (std::size_t c = 0; c < arch.classes; ++c) {
                    const double target = (static_cast<int>(c) == yb[i]) ? 1.0 : 0.0;
                    dlogits(i, c) = (probs(i, c) - target) / static_cast<double>(bs);
                }
            }
            auto grad = backward(trace, dlogits);
            optimizer_step(opt, params, grad);
        }
        err = eval_error(params, holdout);
        if (err <= cfg.target_error) return params;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "pretrain_source: holdout error %.4f above target %.4f after %zu epochs",
                  err, cfg.target_error, cfg.max_epochs);
    throw TrainingFailedError(buf, err);
}

}  // namespace sparnet::model
