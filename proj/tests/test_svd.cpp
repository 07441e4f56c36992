#include <doctest.h>

#include <cmath>

#include "maelm/rng.hpp"
#include "maelm/svd.hpp"
#include "maelm/tensor.hpp"
#include "oracles.hpp"

using namespace maelm;

TEST_CASE("identity singular values") {
    Tensor i3 = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    auto sv = singular_values(i3);
    REQUIRE(sv.size() == 3);
    for (double s : sv) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagonal absolute values") {
    Tensor d = Tensor::matrix({{3, 0, 0}, {0, -2, 0}, {0, 0, 1}});
    auto sv = singular_values(d);
    CHECK(sv[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sv[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sv[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random matrix matches the independent Jacobi oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor m = oracle::random_tensor(rng, {6, 4});
        auto sv = singular_values(m);
        auto ref = oracle::gram_singular_values(m);
        REQUIRE(sv.size() == ref.size());
        for (std::size_t i = 0; i < sv.size(); ++i)
            CHECK(sv[i] == doctest::Approx(ref[i]).epsilon(1e-9));
    }
}

TEST_CASE("sum of squares equals squared Frobenius norm") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t r = 2 + rng.next_below(6);
        const std::size_t c = 2 + rng.next_below(6);
        Tensor m = oracle::random_tensor(rng, {r, c});
        auto sv = singular_values(m);
        double sum_sq = 0.0;
        for (double s : sv) sum_sq += s * s;
        const double fro = frobenius_norm(m);
        CHECK(std::abs(sum_sq - fro * fro) <= 1e-9 * fro * fro);
    }
}

TEST_CASE("singular values invariant under row permutation") {
    Rng rng(7);
    Tensor m = oracle::random_tensor(rng, {5, 3});
    auto sv = singular_values(m);

    std::vector<std::size_t> perm = {4, 2, 0, 3, 1};
    Tensor shuffled({5, 3});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) shuffled.at2(i, j) = m.at2(perm[i], j);
    auto sv2 = singular_values(shuffled);
    for (std::size_t i = 0; i < sv.size(); ++i)
        CHECK(sv[i] == doctest::Approx(sv2[i]).epsilon(1e-10));
}

TEST_CASE("sorted descending and nonnegative") {
    Rng rng(8);
    Tensor m = oracle::random_tensor(rng, {4, 6});
    auto sv = singular_values(m);
    REQUIRE(sv.size() == 4);
    for (std::size_t i = 0; i < sv.size(); ++i) {
        CHECK(sv[i] >= 0.0);
        if (i > 0) CHECK(sv[i - 1] >= sv[i]);
    }
}
