#include "maelm/layers.hpp"

#include <cmath>

#include "maelm/errors.hpp"

namespace maelm {

int relative_bucket(long long rel, std::size_t buckets, std::size_t max_distance) {
    if (buckets % 2 != 0) throw ContractError("relative_bucket: bucket count must be even");
    const std::size_t half = buckets / 2;
    const std::size_t exact = buckets / 4;
    if (max_distance <= exact) throw ContractError("relative_bucket: max distance must exceed B/4");
    const std::size_t base = (rel >= 0) ? half : 0;
    const std::size_t a = static_cast<std::size_t>(rel >= 0 ? rel : -rel);
    std::size_t index;
    if (a < exact) {
        index = a;
    } else {
        const double log_ratio = std::log(static_cast<double>(a) / static_cast<double>(exact)) /
                                 std::log(static_cast<double>(max_distance) / static_cast<double>(exact));
        const std::size_t log_index =
            exact + static_cast<std::size_t>(log_ratio * static_cast<double>(half - exact));
        index = std::min(half - 1, log_index);
    }
    return static_cast<int>(base + index);
}

Tensor causal_mask(std::size_t n) {
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m.at2(i, j) = -1e30;
    return m;
}

Var attention_forward(const Var& q_input, const Var& kv_input, const AttentionWeights& w,
                      const RelativePositionBias* bias,
                      const std::vector<std::size_t>& q_positions,
                      const std::vector<std::size_t>& kv_positions,
                      const Tensor* additive_mask, DropoutConfig dropout) {
    const std::size_t nq = q_input->value.rows();
    const std::size_t nk = kv_input->value.rows();
    if (q_positions.size() != nq) {
        throw ContractError("attention: " + std::to_string(q_positions.size()) +
                            " query positions for " + std::to_string(nq) + " rows");
    }
    if (kv_positions.size() != nk) {
        throw ContractError("attention: " + std::to_string(kv_positions.size()) +
                            " key positions for " + std::to_string(nk) + " rows");
    }

    // Bucket indices depend only on original-index differences; shared by all heads.
    std::vector<int> bucket_idx;
    if (bias != nullptr) {
        bucket_idx.resize(nq * nk);
        for (std::size_t i = 0; i < nq; ++i)
            for (std::size_t j = 0; j < nk; ++j)
                bucket_idx[i * nk + j] = relative_bucket(
                    static_cast<long long>(kv_positions[j]) - static_cast<long long>(q_positions[i]),
                    bias->buckets, bias->max_distance);
    }

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(w.head_dim));
    std::vector<Var> heads;
    heads.reserve(w.heads);
    for (std::size_t h = 0; h < w.heads; ++h) {
        Var q = matmul(q_input, w.wq[h]);
        Var k = matmul(kv_input, w.wk[h]);
        Var v = matmul(kv_input, w.wv[h]);
        Var logits = scale(matmul_nt(q, k), inv_sqrt_dh);
        if (bias != nullptr)
            logits = add(logits, gather_bucket_bias(bias->table, bucket_idx, nq, nk, h));
        if (additive_mask != nullptr) logits = add_constant(logits, *additive_mask);
        Var probs = softmax_rows(logits);
        if (dropout.active()) probs = maelm::dropout(probs, dropout.rate, *dropout.rng);
        heads.push_back(matmul(probs, v));
    }
    return matmul(concat_cols(heads), w.wo);
}

Var mhsa_forward(const Var& x, const AttentionWeights& w, const RelativePositionBias* bias,
                 const std::vector<std::size_t>& positions, DropoutConfig dropout) {
    return attention_forward(x, x, w, bias, positions, positions, nullptr, dropout);
}

Var ffn_forward(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
    Var hidden = gelu(add_row_broadcast(matmul(x, w1), b1));
    return add_row_broadcast(matmul(hidden, w2), b2);
}

std::vector<Var> encoder_stack_forward(const Var& h0,
                                       const std::vector<EncoderLayerWeights>& layers,
                                       const std::vector<std::size_t>& positions,
                                       const RelativePositionBias* bias,
                                       DropoutConfig dropout) {
    std::vector<Var> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(h0);
    Var h = h0;
    for (const auto& layer : layers) {
        Var attn_in = layer_norm(h, layer.ln1_gain, layer.ln1_bias, kLayerNormEps);
        h = add(h, mhsa_forward(attn_in, layer.attn, bias, positions, dropout));
        Var ffn_in = layer_norm(h, layer.ln2_gain, layer.ln2_bias, kLayerNormEps);
        Var ffn_out = ffn_forward(ffn_in, layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2);
        if (dropout.active()) ffn_out = maelm::dropout(ffn_out, dropout.rate, *dropout.rng);
        h = add(h, ffn_out);
        acts.push_back(h);
    }
    return acts;
}

}  // namespace maelm
