#include <doctest.h>

#include <cmath>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"
#include "maelm/tensor.hpp"
#include "oracles.hpp"

using namespace maelm;

TEST_CASE("matmul identity") {
    Tensor i2 = Tensor::matrix({{1, 0}, {0, 1}});
    Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor out = matmul(i2, a);
    for (std::size_t k = 0; k < 4; ++k) CHECK(out(k) == a(k));
}

TEST_CASE("matmul hand product") {
    Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor b = Tensor::matrix({{0}, {1}});
    Tensor out = matmul(a, b);
    CHECK(out.rows() == 2);
    CHECK(out.cols() == 1);
    CHECK(out(0) == 2.0);
    CHECK(out(1) == 4.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = oracle::random_tensor(rng, {3, 4});
        Tensor b = oracle::random_tensor(rng, {4, 5});
        Tensor c = oracle::random_tensor(rng, {5, 2});
        Tensor left = matmul(matmul(a, b), c);
        Tensor right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            CHECK(std::abs(left(i) - right(i)) <= 1e-9 * std::max(1.0, std::abs(left(i))));
        }
    }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transpose") {
    Rng rng(12);
    Tensor a = oracle::random_tensor(rng, {4, 3});
    Tensor b = oracle::random_tensor(rng, {5, 3});
    Tensor nt = matmul_nt(a, b);
    Tensor ref = matmul(a, transpose(b));
    REQUIRE(nt.same_shape(ref));
    for (std::size_t i = 0; i < nt.size(); ++i)
        CHECK(nt(i) == doctest::Approx(ref(i)).epsilon(1e-12));

    Tensor c = oracle::random_tensor(rng, {4, 5});
    Tensor tn = matmul_tn(a, c);
    Tensor ref2 = matmul(transpose(a), c);
    REQUIRE(tn.same_shape(ref2));
    for (std::size_t i = 0; i < tn.size(); ++i)
        CHECK(tn(i) == doctest::Approx(ref2(i)).epsilon(1e-12));
}

TEST_CASE("softmax symmetry") {
    Tensor out = softmax_rows(Tensor::matrix({{0, 0}}));
    CHECK(out(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax hand ratios") {
    Tensor out = softmax_rows(Tensor::matrix({{std::log(2.0), 0.0}}));
    CHECK(out(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(out(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax stability under large logits") {
    Tensor out = softmax_rows(Tensor::matrix({{1000.0, 0.0}}));
    CHECK(std::isfinite(out(0)));
    CHECK(out(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out(1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay within [0,1]") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = oracle::random_tensor(rng, {4, 7}, 5.0);
        Tensor y = softmax_rows(x);
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                s += y.at2(i, j);
                CHECK(y.at2(i, j) >= 0.0);
                CHECK(y.at2(i, j) <= 1.0);
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("layer_norm hand case") {
    Tensor out = layer_norm(Tensor::row({1, 3}), Tensor::full({2}, 1.0), Tensor({2}), 1e-12);
    CHECK(out(0) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(out(1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("layer_norm constant row collapses to bias") {
    Tensor out = layer_norm(Tensor::row({5, 5, 5}), Tensor::full({3}, 1.0), Tensor({3}), 1e-12);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out(i) == doctest::Approx(0.0));

    Tensor bias({3}, {7, 8, 9});
    Tensor out2 = layer_norm(Tensor::row({1, 2, 3}), Tensor({3}), bias, 1e-12);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out2(i) == bias(i));
}

TEST_CASE("layer_norm rejects degenerate last axis") {
    CHECK_THROWS_AS(layer_norm(Tensor::row({1}), Tensor::full({1}, 1.0), Tensor({1}), 1e-12),
                    DimensionError);
}

TEST_CASE("gelu table values") {
    CHECK(gelu_scalar(0.0) == 0.0);
    CHECK(gelu_scalar(10.0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(gelu_scalar(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("cross entropy uniform logits") {
    Tensor logits({3, 4});
    const double loss = cross_entropy_masked(logits, {0, 3}, {0, 2});
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy confident correct") {
    Tensor logits({1, 4});
    logits(2) = 100.0;
    CHECK(cross_entropy_masked(logits, {2}, {0}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy hand case") {
    Tensor logits = Tensor::matrix({{1, 0}});
    CHECK(cross_entropy_masked(logits, {1}, {0}) ==
          doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects empty mask") {
    Tensor logits({2, 3});
    CHECK_THROWS_AS(cross_entropy_masked(logits, {}, {}), EmptyMaskError);
}

TEST_CASE("induced norms") {
    Tensor m = Tensor::matrix({{-1, -1}, {1, 1}});
    CHECK(norm_l1(m) == 2.0);
    CHECK(norm_linf(m) == 2.0);
    CHECK(norm_composite(m) == 2.0);
}
