#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "maelm/autodiff.hpp"
#include "maelm/rng.hpp"

namespace maelm {

inline constexpr double kLayerNormEps = 1e-6;

// Token/position lookup tables. The [MASK] embedding is the reserved row of
// the token table, and the same table is reused as the tied output softmax.
struct EmbeddingTable {
    Var tokens;     // [|V| × d]
    Var positions;  // [max_len × d]
};

// Per-head projections plus the shared output projection.
struct AttentionWeights {
    std::vector<Var> wq, wk, wv;  // each [d_in × d_h]
    Var wo;                       // [N·d_h × d_out]
    std::size_t heads = 0;
    std::size_t head_dim = 0;
};

// T5-style bucketed relative position bias, one scalar per bucket per head,
// shared across layers and added to pre-softmax logits.
struct RelativePositionBias {
    std::size_t buckets = 0;       // B, even
    std::size_t max_distance = 0;  // D, > B/4
    Var table;                     // [B × heads]
};

// Bucket index for a signed relative distance. Sign-separated halves of
// B/2 buckets each; exact buckets for |rel| < B/4, a logarithmic region
// above that, clamped at the half boundary for |rel| >= D.
int relative_bucket(long long rel, std::size_t buckets, std::size_t max_distance);

struct EncoderLayerWeights {
    Var ln1_gain, ln1_bias;
    AttentionWeights attn;
    Var ln2_gain, ln2_bias;
    Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct DecoderLayerWeights {
    Var ln1_gain, ln1_bias;
    AttentionWeights self_attn;  // unused in cross-only mode
    Var lnx_gain, lnx_bias;      // present iff cross-attention is used
    AttentionWeights cross_attn;
    Var ln2_gain, ln2_bias;
    Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Dropout is active only when a stream is attached and the rate is positive.
struct DropoutConfig {
    double rate = 0.0;
    Rng* rng = nullptr;
    bool active() const { return rng != nullptr && rate > 0.0; }
};

// Multi-head self-attention over x[n×d]; `positions` carries each row's
// original sequence index and drives the relative bias lookup.
Var mhsa_forward(const Var& x, const AttentionWeights& w,
                 const RelativePositionBias* bias,
                 const std::vector<std::size_t>& positions,
                 DropoutConfig dropout = {});

// General attention: queries from `q_input`, keys/values from `kv_input`.
// `additive_mask` (if any) is added to every head's logits pre-softmax.
Var attention_forward(const Var& q_input, const Var& kv_input, const AttentionWeights& w,
                      const RelativePositionBias* bias,
                      const std::vector<std::size_t>& q_positions,
                      const std::vector<std::size_t>& kv_positions,
                      const Tensor* additive_mask, DropoutConfig dropout);

Var ffn_forward(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2);

// Pre-norm residual stack: H += MHSA(LN(H)); H += FFN(LN(H)).
// Returns H^0 .. H^L.
std::vector<Var> encoder_stack_forward(const Var& h0,
                                       const std::vector<EncoderLayerWeights>& layers,
                                       const std::vector<std::size_t>& positions,
                                       const RelativePositionBias* bias,
                                       DropoutConfig dropout = {});

// Lower-triangular additive mask (0 on/below diagonal, -1e30 above).
Tensor causal_mask(std::size_t n);

}  // namespace maelm
