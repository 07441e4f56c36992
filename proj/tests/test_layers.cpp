#include <doctest.h>

#include <cmath>

#include "maelm/errors.hpp"
#include "maelm/layers.hpp"
#include "maelm/rng.hpp"
#include "oracles.hpp"

using namespace maelm;

namespace {

AttentionWeights random_attention(Rng& rng, std::size_t d, std::size_t heads) {
    AttentionWeights w;
    w.heads = heads;
    w.head_dim = d / heads;
    for (std::size_t h = 0; h < heads; ++h) {
        w.wq.push_back(constant(oracle::random_tensor(rng, {d, w.head_dim}, 0.3)));
        w.wk.push_back(constant(oracle::random_tensor(rng, {d, w.head_dim}, 0.3)));
        w.wv.push_back(constant(oracle::random_tensor(rng, {d, w.head_dim}, 0.3)));
    }
    w.wo = constant(oracle::random_tensor(rng, {d, d}, 0.3));
    return w;
}

std::vector<std::size_t> iota_positions(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    return p;
}

// The multi-head display computed with plain loops, one head at a time.
Tensor reference_mhsa(const Tensor& x, const AttentionWeights& w) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Tensor concat({n, d});
    for (std::size_t h = 0; h < w.heads; ++h) {
        Tensor q = matmul(x, val(w.wq[h]));
        Tensor k = matmul(x, val(w.wk[h]));
        Tensor v = matmul(x, val(w.wv[h]));
        Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(double(w.head_dim)));
        Tensor probs = softmax_rows(scores);
        Tensor head = matmul(probs, v);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w.head_dim; ++j)
                concat.at2(i, h * w.head_dim + j) = head.at2(i, j);
    }
    return matmul(concat, val(w.wo));
}

}  // namespace

TEST_CASE("relative bucket derived values") {
    CHECK(relative_bucket(0, 32, 128) == 16);
    CHECK(relative_bucket(-1, 32, 128) == 1);
    CHECK(relative_bucket(50, 32, 128) == 29);
}

TEST_CASE("relative bucket monotone within each sign half and saturating") {
    int prev = -1;
    for (long long rel = 0; rel <= 300; ++rel) {
        const int b = relative_bucket(rel, 32, 128);
        CHECK(b >= 16);
        CHECK(b < 32);
        CHECK(b >= prev);
        prev = b;
        if (rel >= 128) CHECK(b == 31);
    }
    prev = -1;
    for (long long rel = 0; rel >= -300; --rel) {
        const int b = relative_bucket(rel, 32, 128);
        if (rel < 0) {
            CHECK(b >= 0);
            CHECK(b < 16);
            if (prev >= 0 && prev < 16) CHECK(b >= prev);
            prev = b;
            if (-rel >= 128) CHECK(b == 15);
        }
    }
}

TEST_CASE("single token attends only to itself") {
    Rng rng(41);
    const std::size_t d = 6;
    AttentionWeights w = random_attention(rng, d, 2);
    Tensor x = oracle::random_tensor(rng, {1, d});
    Var out = mhsa_forward(constant(x), w, nullptr, {0});

    // weight 1 on the only token: output = concat_h(x W^V_h) W^O
    std::vector<Var> heads;
    for (std::size_t h = 0; h < 2; ++h) heads.push_back(matmul(constant(x), w.wv[h]));
    Var expect = matmul(concat_cols(heads), w.wo);
    for (std::size_t i = 0; i < d; ++i)
        CHECK(val(out)(i) == doctest::Approx(val(expect)(i)).epsilon(1e-12));
}

TEST_CASE("identical rows produce identical outputs") {
    Rng rng(42);
    const std::size_t d = 8;
    AttentionWeights w = random_attention(rng, d, 2);
    Tensor row = oracle::random_tensor(rng, {1, d});
    Tensor x({3, d});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < d; ++j) x.at2(i, j) = row(j);
    Var out = mhsa_forward(constant(x), w, nullptr, iota_positions(3));
    for (std::size_t i = 1; i < 3; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(val(out).at2(i, j) == doctest::Approx(val(out).at2(0, j)).epsilon(1e-12));
}

TEST_CASE("mhsa matches the per-head reference loop") {
    Rng rng(43);
    const std::size_t n = 3, d = 4;
    AttentionWeights w = random_attention(rng, d, 2);
    Tensor x = oracle::random_tensor(rng, {n, d});
    Var out = mhsa_forward(constant(x), w, nullptr, iota_positions(n));
    Tensor ref = reference_mhsa(x, w);
    for (std::size_t i = 0; i < n * d; ++i)
        CHECK(val(out)(i) == doctest::Approx(ref(i)).epsilon(1e-12));
}

TEST_CASE("mhsa rejects a positions list of the wrong length") {
    Rng rng(44);
    AttentionWeights w = random_attention(rng, 4, 2);
    Tensor x = oracle::random_tensor(rng, {3, 4});
    CHECK_THROWS_AS(mhsa_forward(constant(x), w, nullptr, {0, 1}), ContractError);
}

TEST_CASE("constant logit shift leaves attention outputs unchanged") {
    Rng rng(45);
    const std::size_t n = 4, d = 8, heads = 2;
    AttentionWeights w = random_attention(rng, d, heads);
    Tensor x = oracle::random_tensor(rng, {n, d});

    RelativePositionBias none;
    RelativePositionBias flat;
    flat.buckets = 32;
    flat.max_distance = 128;
    flat.table = constant(Tensor::full({32, heads}, 3.7));  // every bucket the same shift

    Var base = mhsa_forward(constant(x), w, nullptr, iota_positions(n));
    Var shifted = mhsa_forward(constant(x), w, &flat, iota_positions(n));
    for (std::size_t i = 0; i < n * d; ++i)
        CHECK(val(shifted)(i) == doctest::Approx(val(base)(i)).epsilon(1e-10));
}

TEST_CASE("ffn annihilation and bias passthrough") {
    Rng rng(46);
    const std::size_t n = 2, d = 4, f = 6;
    Tensor x = oracle::random_tensor(rng, {n, d});

    Var zero_out = ffn_forward(constant(x), constant(Tensor({d, f})), constant(Tensor({f})),
                               constant(Tensor({f, d})), constant(Tensor({d})));
    for (std::size_t i = 0; i < n * d; ++i) CHECK(val(zero_out)(i) == 0.0);

    Tensor c = oracle::random_tensor(rng, {d});
    Var bias_out = ffn_forward(constant(Tensor({n, d})), constant(oracle::random_tensor(rng, {d, f})),
                               constant(Tensor({f})), constant(oracle::random_tensor(rng, {f, d})),
                               constant(c));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) CHECK(val(bias_out).at2(i, j) == c(j));
}

TEST_CASE("ffn matches the composed primitive chain") {
    Rng rng(47);
    const std::size_t n = 2, d = 4, f = 8;
    Tensor x = oracle::random_tensor(rng, {n, d});
    Tensor w1 = oracle::random_tensor(rng, {d, f});
    Tensor b1 = oracle::random_tensor(rng, {f});
    Tensor w2 = oracle::random_tensor(rng, {f, d});
    Tensor b2 = oracle::random_tensor(rng, {d});

    Var out = ffn_forward(constant(x), constant(w1), constant(b1), constant(w2), constant(b2));

    Tensor hidden = matmul(x, w1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) hidden.at2(i, j) += b1(j);
    hidden = gelu(hidden);
    Tensor ref = matmul(hidden, w2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) ref.at2(i, j) += b2(j);
    for (std::size_t i = 0; i < n * d; ++i)
        CHECK(val(out)(i) == doctest::Approx(ref(i)).epsilon(1e-12));
}

namespace {

EncoderLayerWeights random_layer(Rng& rng, std::size_t d, std::size_t heads, std::size_t f) {
    EncoderLayerWeights layer;
    layer.ln1_gain = constant(Tensor::full({d}, 1.0));
    layer.ln1_bias = constant(Tensor({d}));
    layer.attn = random_attention(rng, d, heads);
    layer.ln2_gain = constant(Tensor::full({d}, 1.0));
    layer.ln2_bias = constant(Tensor({d}));
    layer.ffn_w1 = constant(oracle::random_tensor(rng, {d, f}, 0.3));
    layer.ffn_b1 = constant(oracle::random_tensor(rng, {f}, 0.3));
    layer.ffn_w2 = constant(oracle::random_tensor(rng, {f, d}, 0.3));
    layer.ffn_b2 = constant(oracle::random_tensor(rng, {d}, 0.3));
    return layer;
}

EncoderLayerWeights zero_layer(std::size_t d, std::size_t heads, std::size_t f) {
    EncoderLayerWeights layer;
    layer.ln1_gain = constant(Tensor({d}));
    layer.ln1_bias = constant(Tensor({d}));
    layer.attn.heads = heads;
    layer.attn.head_dim = d / heads;
    for (std::size_t h = 0; h < heads; ++h) {
        layer.attn.wq.push_back(constant(Tensor({d, d / heads})));
        layer.attn.wk.push_back(constant(Tensor({d, d / heads})));
        layer.attn.wv.push_back(constant(Tensor({d, d / heads})));
    }
    layer.attn.wo = constant(Tensor({d, d}));
    layer.ln2_gain = constant(Tensor({d}));
    layer.ln2_bias = constant(Tensor({d}));
    layer.ffn_w1 = constant(Tensor({d, f}));
    layer.ffn_b1 = constant(Tensor({f}));
    layer.ffn_w2 = constant(Tensor({f, d}));
    layer.ffn_b2 = constant(Tensor({d}));
    return layer;
}

}  // namespace

TEST_CASE("empty encoder stack returns the input") {
    Rng rng(48);
    Tensor h0 = oracle::random_tensor(rng, {3, 4});
    auto acts = encoder_stack_forward(constant(h0), {}, iota_positions(3), nullptr);
    REQUIRE(acts.size() == 1);
    for (std::size_t i = 0; i < h0.size(); ++i) CHECK(val(acts[0])(i) == h0(i));
}

TEST_CASE("encoder stack emits L+1 activations of fixed shape") {
    Rng rng(49);
    const std::size_t n = 5, d = 8;
    std::vector<EncoderLayerWeights> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(random_layer(rng, d, 2, 16));
    auto acts = encoder_stack_forward(constant(oracle::random_tensor(rng, {n, d})), layers,
                                      iota_positions(n), nullptr);
    REQUIRE(acts.size() == 4);
    for (const auto& a : acts) {
        CHECK(val(a).rows() == n);
        CHECK(val(a).cols() == d);
    }
}

TEST_CASE("two-layer stack equals applying one layer twice") {
    Rng rng(50);
    const std::size_t n = 4, d = 8;
    auto layer1 = random_layer(rng, d, 2, 16);
    auto layer2 = random_layer(rng, d, 2, 16);
    Tensor h0 = oracle::random_tensor(rng, {n, d});

    auto both = encoder_stack_forward(constant(h0), {layer1, layer2}, iota_positions(n), nullptr);
    auto first = encoder_stack_forward(constant(h0), {layer1}, iota_positions(n), nullptr);
    auto second = encoder_stack_forward(first.back(), {layer2}, iota_positions(n), nullptr);
    for (std::size_t i = 0; i < n * d; ++i)
        CHECK(val(both.back())(i) == doctest::Approx(val(second.back())(i)).epsilon(1e-12));
}

TEST_CASE("zero-weight stack is the identity at every layer") {
    Rng rng(51);
    const std::size_t n = 3, d = 6;
    Tensor h0 = oracle::random_tensor(rng, {n, d});
    std::vector<EncoderLayerWeights> layers = {zero_layer(d, 2, 12), zero_layer(d, 2, 12)};
    auto acts = encoder_stack_forward(constant(h0), layers, iota_positions(n), nullptr);
    for (const auto& a : acts)
        for (std::size_t i = 0; i < n * d; ++i) CHECK(val(a)(i) == h0(i));
}

TEST_CASE("causal mask blocks upper triangle") {
    Tensor m = causal_mask(3);
    CHECK(m.at2(0, 0) == 0.0);
    CHECK(m.at2(0, 2) == -1e30);
    CHECK(m.at2(2, 1) == 0.0);
}
