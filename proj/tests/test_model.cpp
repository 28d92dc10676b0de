#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sparnet/checkpoint.hpp"
#include "sparnet/errors.hpp"
#include "sparnet/model.hpp"
#include "sparnet/streambench.hpp"
#include "test_util.hpp"

using namespace sparnet;
using namespace sparnet::model;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("forward: zero weights give zero logits, identity affine maps e1") {
    Architecture arch{4, {3}, 5};
    ModelParams p = ModelParams::init(arch, 1);
    std::vector<double> zeros(p.param_count(), 0.0);
    p.unflatten(zeros);
    Rng rng(2);
    Matrix x = testutil::random_matrix(3, 4, rng);
    auto logits = forward_pure(p, x, NormMode::running_stats);
    for (double v : logits.storage()) CHECK(v == 0.0);
    auto probs = numerics::softmax_rows(logits, 1.0);
    for (double v : probs.storage()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

    // Single affine layer with identity weights: logits reproduce the input.
    Architecture ident{3, {}, 3};
    ModelParams q = ModelParams::init(ident, 1);
    std::vector<double> flat(q.param_count(), 0.0);
    flat[0] = flat[4] = flat[8] = 1.0;  // 3x3 identity, zero bias
    q.unflatten(flat);
    Matrix e1 = Matrix::from_rows({{1.0, 0.0, 0.0}});
    auto out = forward_pure(q, e1, NormMode::running_stats);
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(0, 1) == doctest::Approx(0.0));
    CHECK(out(0, 2) == doctest::Approx(0.0));
}

TEST_CASE("forward: norm modes differ unless batch stats equal running stats") {
    Rng rng(3);
    Architecture arch{6, {8}, 4};
    ModelParams p = ModelParams::init(arch, 17);
    const Matrix x = testutil::random_matrix(5, 6, rng);
    const auto a = forward_pure(p, x, NormMode::batch_stats);
    const auto b = forward_pure(p, x, NormMode::running_stats);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.storage().size(); ++i)
        diff = std::max(diff, std::abs(a.storage()[i] - b.storage()[i]));
    CHECK(diff > 1e-6);
}

TEST_CASE("forward: preconditions") {
    Architecture arch{4, {3}, 2};
    ModelParams p = ModelParams::init(arch, 1);
    Matrix one(1, 4, 0.5);
    CHECK_THROWS_AS((void)forward_pure(p, one, NormMode::batch_stats), std::invalid_argument);
    CHECK_NOTHROW((void)forward_pure(p, one, NormMode::running_stats));
    Matrix bad(2, 5, 0.0);
    CHECK_THROWS_AS((void)forward_pure(p, bad, NormMode::running_stats), ShapeError);
}

TEST_CASE("forward is deterministic and batch_stats commits running stats") {
    Rng rng(5);
    Architecture arch{4, {6}, 3};
    ModelParams p = ModelParams::init(arch, 9);
    const Matrix x = testutil::random_matrix(8, 4, rng);

    const auto a = forward_pure(p, x, NormMode::batch_stats);
    const auto b = forward_pure(p, x, NormMode::batch_stats);
    CHECK(a == b);

    const auto rm_before = p.layers[0].running_mean;
    auto c = forward(p, x, NormMode::batch_stats);
    CHECK(p.layers[0].running_mean != rm_before);  // momentum 0.1 update applied
    auto d = forward(p, x, NormMode::running_stats);
    const auto rm_after = p.layers[0].running_mean;
    (void)d;
    CHECK(p.layers[0].running_mean == rm_after);
}

TEST_CASE("backward: zero dlogits, linear-map derivative") {
    Architecture arch{3, {4}, 2};
    ModelParams p = ModelParams::init(arch, 21);
    Rng rng(6);
    const Matrix x = testutil::random_matrix(4, 3, rng);

    ForwardTrace trace;
    (void)forward_pure(p, x, NormMode::batch_stats, &trace);
    Matrix zeros(4, 2);
    auto g = backward(trace, zeros);
    for (double v : g) CHECK(v == 0.0);

    // Single affine: loss = z_k for one sample; dW_kj = x_j, other rows 0.
    Architecture ident{3, {}, 2};
    ModelParams q = ModelParams::init(ident, 4);
    Matrix xs = Matrix::from_rows({{0.3, -0.7, 1.1}});
    ForwardTrace t2;
    (void)forward_pure(q, xs, NormMode::running_stats, &t2);
    Matrix dl(1, 2);
    dl(0, 1) = 1.0;  // loss = z_1
    auto g2 = backward(t2, dl);
    // Flat order: W row 0 (3), W row 1 (3), bias (2).
    CHECK(g2[0] == 0.0);
    CHECK(g2[1] == 0.0);
    CHECK(g2[2] == 0.0);
    CHECK(g2[3] == doctest::Approx(0.3));
    CHECK(g2[4] == doctest::Approx(-0.7));
    CHECK(g2[5] == doctest::Approx(1.1));
    CHECK(g2[6] == 0.0);
    CHECK(g2[7] == doctest::Approx(1.0));
}

TEST_CASE("backward: trace is single-use and shape-checked") {
    Architecture arch{3, {4}, 2};
    ModelParams p = ModelParams::init(arch, 2);
    Rng rng(8);
    const Matrix x = testutil::random_matrix(4, 3, rng);
    ForwardTrace trace;
    (void)forward_pure(p, x, NormMode::batch_stats, &trace);
    Matrix wrong(3, 2);
    CHECK_THROWS_AS((void)backward(trace, wrong), ShapeError);
    Matrix ok(4, 2, 0.1);
    (void)backward(trace, ok);
    CHECK_THROWS_AS((void)backward(trace, ok), StateError);
}

TEST_CASE("backward matches finite differences in both norm modes") {
    Rng rng(31);
    int trials = 0;
    for (int t = 0; t < 20; ++t) {
        const auto arch = testutil::random_small_arch(rng);
        ModelParams p = ModelParams::init(arch, rng());
        const std::size_t n = 2 + t % 4;
        const Matrix x = testutil::random_matrix(n, arch.input_dim, rng);
        const Matrix dir = testutil::random_matrix(n, arch.classes, rng);
        const auto mode = (t % 2 == 0) ? NormMode::batch_stats : NormMode::running_stats;

        ForwardTrace trace;
        (void)forward_pure(p, x, mode, &trace);
        const auto analytic = backward(trace, dir);

        ModelParams probe = p;
        auto loss = [&](const std::vector<double>& theta) {
            probe.unflatten(theta);
            const auto z = forward_pure(probe, x, mode);
            double acc = 0.0;
            for (std::size_t i = 0; i < z.storage().size(); ++i)
                acc += z.storage()[i] * dir.storage()[i];
            return acc;
        };
        const auto fd = testutil::finite_difference(loss, p.flatten(), 1e-5);
        CHECK(testutil::max_rel_err(analytic, fd) < 1e-4);
        ++trials;
    }
    CHECK(trials == 20);
}

TEST_CASE("flatten/unflatten round-trips exactly") {
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const auto arch = testutil::random_small_arch(rng);
        ModelParams p = ModelParams::init(arch, rng());
        const auto flat = p.flatten();
        CHECK(flat.size() == arch.param_count());
        ModelParams q = ModelParams::init(arch, rng());
        q.unflatten(flat);
        CHECK(q.flatten() == flat);
    }
}

TEST_CASE("norm_mask marks exactly the batchnorm scale/shift entries") {
    Architecture arch{3, {4, 2}, 5};
    ModelParams p = ModelParams::init(arch, 1);
    const auto mask = p.norm_mask();
    std::size_t marked = 0;
    for (auto b : mask) marked += b;
    CHECK(marked == 2 * (4 + 2));
    // First weight block is unmarked.
    for (std::size_t i = 0; i < 12; ++i) CHECK(mask[i] == 0);
}

TEST_CASE("optimizer: sgd definition and zero gradient") {
    Architecture arch{2, {}, 2};
    ModelParams p = ModelParams::init(arch, 3);
    std::vector<double> theta(p.param_count(), 1.0);
    p.unflatten(theta);

    auto opt = make_optimizer(OptimizerKind::sgd, 0.1, p.param_count());
    std::vector<double> g(p.param_count(), 0.0);
    g[0] = 2.0;
    optimizer_step(opt, p, g);
    CHECK(p.flatten()[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p.flatten()[1] == 1.0);

    ModelParams q = p;
    auto opt2 = make_optimizer(OptimizerKind::sgd, 0.1, p.param_count());
    std::vector<double> zeros(p.param_count(), 0.0);
    optimizer_step(opt2, q, zeros);
    CHECK(q.flatten() == p.flatten());
}

TEST_CASE("optimizer: adam first step and zero-gradient fixed point") {
    Architecture arch{2, {}, 2};
    ModelParams p = ModelParams::init(arch, 3);
    std::vector<double> theta(p.param_count(), 0.0);
    p.unflatten(theta);

    auto opt = make_optimizer(OptimizerKind::adam, 1e-3, p.param_count());
    std::vector<double> g(p.param_count(), 1.0);
    optimizer_step(opt, p, g);
    // Bias-corrected m_hat / sqrt(v_hat) = 1 on the first step.
    for (double v : p.flatten())
        CHECK(v == doctest::Approx(-0.0009999999900000003).epsilon(1e-12));

    // Zero gradient with zero moments: parameters unchanged.
    ModelParams q = ModelParams::init(arch, 5);
    const auto before = q.flatten();
    auto opt2 = make_optimizer(OptimizerKind::adam, 1e-3, q.param_count());
    std::vector<double> zeros(q.param_count(), 0.0);
    optimizer_step(opt2, q, zeros);
    CHECK(q.flatten() == before);
}

TEST_CASE("optimizer: non-finite gradient refused, state unchanged") {
    Architecture arch{2, {}, 2};
    ModelParams p = ModelParams::init(arch, 3);
    const auto before = p.flatten();
    auto opt = make_optimizer(OptimizerKind::adam, 1e-3, p.param_count());
    std::vector<double> g(p.param_count(), 0.0);
    g[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(optimizer_step(opt, p, g), NumericalError);
    CHECK(p.flatten() == before);
    CHECK(opt.step == 0);
    for (double v : opt.m) CHECK(v == 0.0);
}

TEST_CASE("checkpoint: bit-exact round trip") {
    Rng rng(40);
    Architecture arch{5, {7}, 3};
    ModelParams p = ModelParams::init(arch, rng());
    // Give running stats non-default values.
    Matrix x = testutil::random_matrix(6, 5, rng);
    (void)forward(p, x, NormMode::batch_stats);

    const auto path = temp_file("sparnet_ckpt_roundtrip.json");
    checkpoint::save_checkpoint({p, "seed=40", std::nullopt}, path);
    const auto loaded = checkpoint::load_checkpoint(path);
    CHECK(loaded.params.flatten() == p.flatten());
    CHECK(loaded.params.layers[0].running_mean == p.layers[0].running_mean);
    CHECK(loaded.params.layers[0].running_var == p.layers[0].running_var);
    CHECK(loaded.rng_note == "seed=40");
    CHECK_FALSE(loaded.omega.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncated file and architecture mismatch") {
    Architecture arch{4, {3}, 10};
    ModelParams p = ModelParams::init(arch, 77);
    const auto path = temp_file("sparnet_ckpt_truncated.json");
    checkpoint::save_checkpoint({p, "", std::nullopt}, path);

    // Truncate.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << text.substr(0, text.size() / 2);
    out.close();
    CHECK_THROWS_AS((void)checkpoint::load_checkpoint(path), FormatError);

    checkpoint::save_checkpoint({p, "", std::nullopt}, path);
    const auto loaded = checkpoint::load_checkpoint(path);
    Architecture bigger{4, {3}, 100};
    CHECK_THROWS_AS(checkpoint::check_architecture(loaded.params, bigger), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("pretrain: separable blobs reach zero error, empty dataset rejected") {
    // Two well-separated clusters in 2D.
    Rng rng(50);
    std::normal_distribution<double> noise(0.0, 0.05);
    Dataset train, holdout;
    train.x = Matrix(80, 2);
    holdout.x = Matrix(40, 2);
    for (std::size_t i = 0; i < 80; ++i) {
        const int y = static_cast<int>(i % 2);
        train.labels.push_back(y);
        train.x(i, 0) = (y ? 1.0 : -1.0) + noise(rng);
        train.x(i, 1) = noise(rng);
    }
    for (std::size_t i = 0; i < 40; ++i) {
        const int y = static_cast<int>(i % 2);
        holdout.labels.push_back(y);
        holdout.x(i, 0) = (y ? 1.0 : -1.0) + noise(rng);
        holdout.x(i, 1) = noise(rng);
    }
    Architecture arch{2, {8}, 2};
    PretrainConfig cfg;
    cfg.target_error = 0.0;
    cfg.max_epochs = 50;
    cfg.seed = 1;
    const auto params = pretrain_source(train, holdout, arch, cfg);
    CHECK(eval_error(params, holdout) == 0.0);

    Dataset empty;
    CHECK_THROWS_AS((void)pretrain_source(empty, holdout, arch, cfg), std::invalid_argument);
}

TEST_CASE("pretrain: unreachable target raises TrainingFailedError with the error rate") {
    Rng rng(51);
    Dataset train, holdout;
    train.x = testutil::random_matrix(60, 3, rng);
    holdout.x = testutil::random_matrix(30, 3, rng);
    std::uniform_int_distribution<int> lab(0, 1);
    for (std::size_t i = 0; i < 60; ++i) train.labels.push_back(lab(rng));
    for (std::size_t i = 0; i < 30; ++i) holdout.labels.push_back(lab(rng));

    Architecture arch{3, {4}, 2};
    PretrainConfig cfg;
    cfg.target_error = 0.0;  // unreachable on pure-noise labels
    cfg.max_epochs = 2;
    try {
        (void)pretrain_source(train, holdout, arch, cfg);
        FAIL("expected TrainingFailedError");
    } catch (const TrainingFailedError& e) {
        CHECK(e.final_error() > 0.0);
    }
}

}  // TEST_SUITE
