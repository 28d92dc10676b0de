#include <doctest.h>

#include <cmath>

#include "sparnet/numerics.hpp"
#include "test_util.hpp"

using namespace sparnet;
using namespace sparnet::numerics;

TEST_SUITE("numerics") {

TEST_CASE("softmax: symmetry, direct evaluation, temperature") {
    const std::vector<double> z01 = {0.0, 0.0};
    auto p = softmax(z01, 1.0);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));

    // Oracle: e^z / sum e^z evaluated directly.
    const std::vector<double> z10 = {1.0, 0.0};
    p = softmax(z10, 1.0);
    CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-9));

    p = softmax(z10, 2.0);
    CHECK(p[0] == doctest::Approx(0.6224593312018546).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.3775406687981454).epsilon(1e-9));
}

TEST_CASE("softmax: nonpositive tau and bad logits rejected") {
    const std::vector<double> z = {1.0, 0.0};
    CHECK_THROWS_AS((void)softmax(z, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)softmax(z, -1.0), std::invalid_argument);
    const std::vector<double> bad = {1.0, std::nan("")};
    CHECK_THROWS_AS((void)softmax(bad, 1.0), std::invalid_argument);
}

TEST_CASE("softmax: shift stability over random inputs") {
    Rng rng(7);
    std::normal_distribution<double> normal(0.0, 3.0);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> z(5);
        for (double& v : z) v = normal(rng);
        const double c = shift(rng);
        std::vector<double> zc = z;
        for (double& v : zc) v += c;
        const auto a = softmax(z, 1.7);
        const auto b = softmax(zc, 1.7);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
}

TEST_CASE("entropy: one-hot, uniform, direct evaluation") {
    CHECK(entropy(std::vector<double>{1.0, 0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<double> uniform10(10, 0.1);
    CHECK(entropy(uniform10) == doctest::Approx(2.302585092994046).epsilon(1e-12));
    // Oracle: -sum p ln p.
    CHECK(entropy(std::vector<double>{0.7, 0.2, 0.1}) ==
          doctest::Approx(0.8018185525433372).epsilon(1e-12));
}

TEST_CASE("entropy: invalid probability vectors rejected") {
    CHECK_THROWS_AS((void)entropy(std::vector<double>{0.5, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS((void)entropy(std::vector<double>{1.4, -0.4}), std::invalid_argument);
}

TEST_CASE("entropy: output in [0, ln C] and nondecreasing in tau") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto z = testutil::random_matrix(1, 6, rng, 4.0);
        double prev = -1.0;
        for (double tau : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 32.0}) {
            const double h = entropy(softmax(z.row(0), tau));
            CHECK(h >= 0.0);
            CHECK(h <= std::log(6.0));
            CHECK(h >= prev - 1e-12);
            prev = h;
        }
    }
}

TEST_CASE("cross_entropy: identities and the probability floor") {
    const std::vector<double> onehot = {1.0, 0.0};
    CHECK(cross_entropy(onehot, onehot) == doctest::Approx(0.0).epsilon(1e-15));

    const std::vector<double> u2 = {0.5, 0.5};
    CHECK(cross_entropy(u2, u2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK(cross_entropy(onehot, u2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // CE(p, p) == entropy(p) for random p.
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = testutil::random_prob_batch(1, 8, rng);
        CHECK(cross_entropy(p.row(0), p.row(0)) ==
              doctest::Approx(entropy(p.row(0))).epsilon(1e-12));
    }
}

TEST_CASE("logits_std: constant, two-point, direct evaluation") {
    CHECK(logits_std(std::vector<double>{3.0, 3.0, 3.0}) == doctest::Approx(0.0));
    CHECK(logits_std(std::vector<double>{1.0, -1.0}) == doctest::Approx(1.0).epsilon(1e-15));
    // Oracle: sqrt(8/3) for [2, 0, -2] with the population divisor.
    CHECK(logits_std(std::vector<double>{2.0, 0.0, -2.0}) ==
          doctest::Approx(1.632993161855452).epsilon(1e-12));
}

TEST_CASE("dynamic_temperature: clamping and averaging") {
    Matrix constant(3, 4, 1.5);
    CHECK(dynamic_temperature(constant, 1.0) == doctest::Approx(1.0));

    Matrix one = Matrix::from_rows({{2.0, 0.0, -2.0}});
    CHECK(dynamic_temperature(one, 1.0) == doctest::Approx(1.632993161855452).epsilon(1e-12));

    // Two samples with stds 1 and 3: mean 2.
    Matrix two = Matrix::from_rows({{1.0, -1.0}, {3.0, -3.0}});
    CHECK(dynamic_temperature(two, 1.0) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)dynamic_temperature(Matrix(), 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)dynamic_temperature(two, 0.0), std::invalid_argument);

    // Always >= 1 over random batches.
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto z = testutil::random_matrix(4, 5, rng, 0.01);
        CHECK(dynamic_temperature(z, 1.0) >= 1.0);
    }
}

}  // TEST_SUITE
