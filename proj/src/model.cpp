#include "maelm/model.hpp"

#include <algorithm>
#include <cmath>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"
#include "maelm/special_tokens.hpp"

namespace maelm {

MaskMode parse_mask_mode(const std::string& s) {
    if (s == "exclude") return MaskMode::Exclude;
    if (s == "include") return MaskMode::Include;
    if (s == "include-dec-resets") return MaskMode::IncludeDecResets;
    if (s == "random-replace") return MaskMode::RandomReplace;
    throw ContractError("unknown mask_mode: " + s);
}

DecoderAttn parse_decoder_attn(const std::string& s) {
    if (s == "bi-self") return DecoderAttn::BiSelf;
    if (s == "bi-self+cross") return DecoderAttn::BiSelfCross;
    if (s == "uni-self+cross") return DecoderAttn::UniSelfCross;
    if (s == "cross-only") return DecoderAttn::CrossOnly;
    throw ContractError("unknown decoder_attn: " + s);
}

std::string to_string(MaskMode m) {
    switch (m) {
        case MaskMode::Exclude: return "exclude";
        case MaskMode::Include: return "include";
        case MaskMode::IncludeDecResets: return "include-dec-resets";
        case MaskMode::RandomReplace: return "random-replace";
    }
    return "?";
}

std::string to_string(DecoderAttn a) {
    switch (a) {
        case DecoderAttn::BiSelf: return "bi-self";
        case DecoderAttn::BiSelfCross: return "bi-self+cross";
        case DecoderAttn::UniSelfCross: return "uni-self+cross";
        case DecoderAttn::CrossOnly: return "cross-only";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (dim == 0 || heads == 0 || dim % heads != 0) {
        throw ContractError("model dim " + std::to_string(dim) + " not divisible by " +
                            std::to_string(heads) + " heads");
    }
    if (has_decoder() && dec_dim % heads != 0) {
        throw ContractError("decoder dim " + std::to_string(dec_dim) + " not divisible by " +
                            std::to_string(heads) + " heads");
    }
    if (vocab_size <= static_cast<std::size_t>(kNumReserved)) {
        throw ContractError("vocabulary must contain non-special tokens");
    }
    if (!(delta >= 0.0 && delta <= 1.0)) throw ContractError("delta must lie in [0,1]");
    if (mask_mode == MaskMode::Exclude && !has_decoder() && delta < 1.0) {
        throw ContractError("exclude mode without a decoder cannot predict dropped positions");
    }
    if (use_relative_bias) {
        if (rel_buckets % 2 != 0 || rel_max_distance <= rel_buckets / 4) {
            throw ContractError("relative bias needs an even bucket count and D > B/4");
        }
    }
}

Var ModelParameters::find(const std::string& name) const {
    for (const auto& [n, v] : manifest) {
        if (n == name) return v;
    }
    throw ContractError("no parameter named " + name);
}

namespace {

Tensor gaussian_init(Rng& rng, std::vector<std::size_t> shape, double std_dev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t(i) = rng.next_gaussian() * std_dev;
    return t;
}

AttentionWeights init_attention(Rng& rng, std::vector<std::pair<std::string, Var>>& manifest,
                                const std::string& prefix, std::size_t d_in, std::size_t heads,
                                std::size_t head_dim, double std_dev) {
    AttentionWeights w;
    w.heads = heads;
    w.head_dim = head_dim;
    for (std::size_t h = 0; h < heads; ++h) {
        w.wq.push_back(parameter(gaussian_init(rng, {d_in, head_dim}, std_dev)));
        manifest.emplace_back(prefix + "/q/" + std::to_string(h), w.wq.back());
        w.wk.push_back(parameter(gaussian_init(rng, {d_in, head_dim}, std_dev)));
        manifest.emplace_back(prefix + "/k/" + std::to_string(h), w.wk.back());
        w.wv.push_back(parameter(gaussian_init(rng, {d_in, head_dim}, std_dev)));
        manifest.emplace_back(prefix + "/v/" + std::to_string(h), w.wv.back());
    }
    w.wo = parameter(gaussian_init(rng, {heads * head_dim, d_in}, std_dev));
    manifest.emplace_back(prefix + "/o", w.wo);
    return w;
}

void init_ffn(Rng& rng, std::vector<std::pair<std::string, Var>>& manifest,
              const std::string& prefix, std::size_t d, std::size_t ffn_dim, double std_dev,
              Var& w1, Var& b1, Var& w2, Var& b2) {
    w1 = parameter(gaussian_init(rng, {d, ffn_dim}, std_dev));
    b1 = parameter(Tensor({ffn_dim}));
    w2 = parameter(gaussian_init(rng, {ffn_dim, d}, std_dev));
    b2 = parameter(Tensor({d}));
    manifest.emplace_back(prefix + "/w1", w1);
    manifest.emplace_back(prefix + "/b1", b1);
    manifest.emplace_back(prefix + "/w2", w2);
    manifest.emplace_back(prefix + "/b2", b2);
}

void init_layer_norm(std::vector<std::pair<std::string, Var>>& manifest,
                     const std::string& prefix, std::size_t d, Var& gain, Var& bias) {
    gain = parameter(Tensor::full({d}, 1.0));
    bias = parameter(Tensor({d}));
    manifest.emplace_back(prefix + "/gain", gain);
    manifest.emplace_back(prefix + "/bias", bias);
}

}  // namespace

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(Rng::derive(seed, rng_purpose::kInit));
    const double std_dev = 0.02;
    ModelParameters p;

    // Token embeddings start at zero so the tied softmax is exactly uniform
    // before training; everything else gets small gaussian init.
    p.embed.tokens = parameter(Tensor({config.vocab_size, config.dim}));
    p.manifest.emplace_back("embed/tokens", p.embed.tokens);
    p.embed.positions = parameter(gaussian_init(rng, {config.max_len, config.dim}, std_dev));
    p.manifest.emplace_back("embed/positions", p.embed.positions);

    if (config.use_relative_bias) {
        p.rel_bias.buckets = config.rel_buckets;
        p.rel_bias.max_distance = config.rel_max_distance;
        p.rel_bias.table = parameter(Tensor({config.rel_buckets, config.heads}));
        p.manifest.emplace_back("embed/rel_bias", p.rel_bias.table);
    }

    const std::size_t head_dim = config.dim / config.heads;
    for (std::size_t l = 0; l < config.enc_layers; ++l) {
        const std::string prefix = "enc/" + std::to_string(l);
        EncoderLayerWeights layer;
        init_layer_norm(p.manifest, prefix + "/ln1", config.dim, layer.ln1_gain, layer.ln1_bias);
        layer.attn = init_attention(rng, p.manifest, prefix + "/attn", config.dim, config.heads,
                                    head_dim, std_dev);
        init_layer_norm(p.manifest, prefix + "/ln2", config.dim, layer.ln2_gain, layer.ln2_bias);
        init_ffn(rng, p.manifest, prefix + "/ffn", config.dim, config.ffn_dim, std_dev,
                 layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2);
        p.encoder.push_back(std::move(layer));
    }

    const bool has_cross = config.decoder_attn != DecoderAttn::BiSelf;
    const bool has_self = config.decoder_attn != DecoderAttn::CrossOnly;
    const std::size_t dec_head_dim = config.has_decoder() ? config.dec_dim / config.heads : 0;
    for (std::size_t l = 0; l < config.dec_layers; ++l) {
        const std::string prefix = "dec/" + std::to_string(l);
        DecoderLayerWeights layer;
        if (has_self) {
            init_layer_norm(p.manifest, prefix + "/ln1", config.dec_dim, layer.ln1_gain,
                            layer.ln1_bias);
            layer.self_attn = init_attention(rng, p.manifest, prefix + "/self", config.dec_dim,
                                             config.heads, dec_head_dim, std_dev);
        }
        if (has_cross) {
            init_layer_norm(p.manifest, prefix + "/lnx", config.dec_dim, layer.lnx_gain,
                            layer.lnx_bias);
            layer.cross_attn = init_attention(rng, p.manifest, prefix + "/cross", config.dec_dim,
                                              config.heads, dec_head_dim, std_dev);
        }
        init_layer_norm(p.manifest, prefix + "/ln2", config.dec_dim, layer.ln2_gain,
                        layer.ln2_bias);
        init_ffn(rng, p.manifest, prefix + "/ffn", config.dec_dim, config.ffn_dim, std_dev,
                 layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2);
        p.decoder.push_back(std::move(layer));
    }

    if (config.has_decoder() && config.needs_projection()) {
        p.enc_to_dec = parameter(gaussian_init(rng, {config.dim, config.dec_dim}, std_dev));
        p.manifest.emplace_back("proj/enc_to_dec", p.enc_to_dec);
        p.dec_to_emb = parameter(gaussian_init(rng, {config.dec_dim, config.dim}, std_dev));
        p.manifest.emplace_back("proj/dec_to_emb", p.dec_to_emb);
    }
    return p;
}

EncoderInputs build_encoder_inputs(const std::vector<int>& tokens, const MaskPlan& plan,
                                   const ModelParameters& params, const ModelConfig& config) {
    if (plan.seq_len != tokens.size()) {
        throw ContractError("mask plan covers " + std::to_string(plan.seq_len) +
                            " positions but sequence has " + std::to_string(tokens.size()));
    }
    const std::size_t n = tokens.size();

    // Exclude mode drops the decoder-only positions that would carry the
    // [MASK] symbol; corrupted positions holding real tokens stay visible.
    std::vector<bool> dropped(n, false);
    if (config.mask_mode == MaskMode::Exclude) {
        for (std::size_t k = 0; k < plan.mask_count(); ++k) {
            if (plan.corruption[k] != MaskPlan::Corruption::MaskToken) continue;
            const std::size_t pos = plan.positions[k];
            if (std::binary_search(plan.decoder_only.begin(), plan.decoder_only.end(), pos))
                dropped[pos] = true;
        }
    }

    EncoderInputs out;
    std::vector<int> token_ids;
    std::vector<int> pos_ids;
    for (std::size_t i = 0; i < n; ++i) {
        if (dropped[i]) continue;
        const long long k = plan.mask_index(i);
        int content = tokens[i];
        bool is_mask_row = false;
        if (k >= 0) {
            content = plan.corrupted_tokens[static_cast<std::size_t>(k)];
            is_mask_row = (content == kMaskId);
        }
        const std::size_t pos = config.aligned_positions ? i : out.retained.size();
        if (pos >= config.max_len) {
            throw PositionRangeError("position " + std::to_string(pos) +
                                     " outside embedding table of " +
                                     std::to_string(config.max_len));
        }
        out.retained.push_back(i);
        out.positions.push_back(pos);
        out.row_is_mask.push_back(is_mask_row);
        token_ids.push_back(content);
        pos_ids.push_back(static_cast<int>(pos));
    }
    out.h0 = add(gather_rows(params.embed.tokens, token_ids),
                 gather_rows(params.embed.positions, pos_ids));
    return out;
}

Var build_decoder_inputs(const Var& enc_out, const MaskPlan& plan,
                         const std::vector<std::size_t>& retained,
                         const ModelParameters& params, const ModelConfig& config) {
    if (enc_out->value.rows() != retained.size()) {
        throw ContractError("retained index list of " + std::to_string(retained.size()) +
                            " rows does not align with encoder output of " +
                            std::to_string(enc_out->value.rows()));
    }
    const std::size_t n = plan.seq_len;
    if (n > config.max_len) {
        throw PositionRangeError("sequence of " + std::to_string(n) +
                                 " exceeds embedding table of " + std::to_string(config.max_len));
    }

    // Which masked positions the decoder re-seeds with the mask embedding.
    std::vector<bool> handled(n, false);
    if (config.mask_mode == MaskMode::IncludeDecResets) {
        for (std::size_t pos : plan.positions) handled[pos] = true;
    } else if (config.mask_mode == MaskMode::Exclude) {
        for (std::size_t i = 0; i < n; ++i) handled[i] = true;
        for (std::size_t i : retained) handled[i] = false;
    }

    // Scatter encoder rows and mask rows back into original sequence order.
    std::vector<std::size_t> enc_row_of(n, 0);
    std::vector<bool> from_encoder(n, false);
    for (std::size_t r = 0; r < retained.size(); ++r) {
        if (!handled[retained[r]]) {
            enc_row_of[retained[r]] = r;
            from_encoder[retained[r]] = true;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!from_encoder[i] && !handled[i]) {
            throw ContractError("decoder input row " + std::to_string(i) +
                                " is neither retained nor decoder-handled");
        }
    }

    std::vector<std::size_t> enc_rows;   // rows taken from the encoder, in output order
    std::vector<int> mask_pos_ids;       // positions re-seeded with e_[MASK]
    for (std::size_t i = 0; i < n; ++i) {
        if (from_encoder[i]) enc_rows.push_back(enc_row_of[i]);
        else mask_pos_ids.push_back(static_cast<int>(i));
    }

    // Assemble: rows from the encoder get h_i^L, handled rows get e_[MASK];
    // everybody gets the absolute position embedding of its original index.
    std::vector<int> all_pos(n);
    for (std::size_t i = 0; i < n; ++i) all_pos[i] = static_cast<int>(i);
    Var positions = gather_rows(params.embed.positions, all_pos);

    Var content;
    if (mask_pos_ids.empty()) {
        content = select_rows(enc_out, enc_rows);
    } else if (enc_rows.empty()) {
        content = gather_rows(params.embed.tokens, std::vector<int>(n, kMaskId));
    } else {
        // Stack encoder rows over mask rows, then permute into sequence order.
        Var enc_part = select_rows(enc_out, enc_rows);
        Var mask_part = gather_rows(params.embed.tokens,
                                    std::vector<int>(mask_pos_ids.size(), kMaskId));
        Var stacked = concat_rows({enc_part, mask_part});
        std::vector<std::size_t> perm(n);
        std::size_t enc_seen = 0, mask_seen = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (from_encoder[i]) perm[i] = enc_seen++;
            else perm[i] = enc_rows.size() + mask_seen++;
        }
        content = select_rows(stacked, perm);
    }

    Var dec_in = add(content, positions);
    if (config.needs_projection()) dec_in = matmul(dec_in, params.enc_to_dec);
    return dec_in;
}

std::vector<Var> decoder_stack_forward(const Var& dec_in, const Var& memory,
                                       const ModelParameters& params, const ModelConfig& config) {
    const std::size_t n = dec_in->value.rows();
    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;
    std::vector<std::size_t> mem_positions;
    if (memory) {
        mem_positions.resize(memory->value.rows());
        for (std::size_t i = 0; i < mem_positions.size(); ++i) mem_positions[i] = i;
    }
    const bool has_self = config.decoder_attn != DecoderAttn::CrossOnly;
    const bool has_cross = config.decoder_attn != DecoderAttn::BiSelf;
    const bool causal = config.decoder_attn == DecoderAttn::UniSelfCross;
    Tensor mask = causal ? causal_mask(n) : Tensor();

    std::vector<Var> acts;
    acts.push_back(dec_in);
    Var h = dec_in;
    for (const auto& layer : params.decoder) {
        if (has_self) {
            Var x = layer_norm(h, layer.ln1_gain, layer.ln1_bias, kLayerNormEps);
            Var attn = attention_forward(x, x, layer.self_attn, nullptr, positions, positions,
                                         causal ? &mask : nullptr, {});
            h = add(h, attn);
        }
        if (has_cross) {
            if (!memory) throw ContractError("cross-attention decoder requires encoder memory");
            Var x = layer_norm(h, layer.lnx_gain, layer.lnx_bias, kLayerNormEps);
            Var attn = attention_forward(x, memory, layer.cross_attn, nullptr, positions,
                                         mem_positions, nullptr, {});
            h = add(h, attn);
        }
        Var x = layer_norm(h, layer.ln2_gain, layer.ln2_bias, kLayerNormEps);
        h = add(h, ffn_forward(x, layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2));
        acts.push_back(h);
    }
    return acts;
}

ForwardResult forward(const std::vector<int>& tokens, const MaskPlan& plan,
                      const ModelParameters& params, const ModelConfig& config,
                      DropoutConfig dropout) {
    config.validate();
    ForwardResult res;

    EncoderInputs inputs = build_encoder_inputs(tokens, plan, params, config);
    res.retained = inputs.retained;
    res.enc_positions = inputs.positions;
    res.enc_row_is_mask = inputs.row_is_mask;

    const RelativePositionBias* bias = config.use_relative_bias ? &params.rel_bias : nullptr;
    res.enc_acts =
        encoder_stack_forward(inputs.h0, params.encoder, inputs.positions, bias, dropout);
    Var enc_out = res.enc_acts.back();

    Var prediction_rows;  // [|M| × dim] rows feeding the tied softmax
    if (!config.has_decoder()) {
        // Encoder-only MLM: all masked positions must still be encoder rows.
        std::vector<std::size_t> rows;
        for (std::size_t pos : plan.positions) {
            auto it = std::lower_bound(res.retained.begin(), res.retained.end(), pos);
            if (it == res.retained.end() || *it != pos) {
                throw ContractError("masked position " + std::to_string(pos) +
                                    " absent from encoder outputs and no decoder configured");
            }
            rows.push_back(static_cast<std::size_t>(it - res.retained.begin()));
        }
        prediction_rows = select_rows(enc_out, rows);
    } else {
        Var memory = enc_out;
        if (config.needs_projection()) memory = matmul(memory, params.enc_to_dec);
        Var dec_in = build_decoder_inputs(enc_out, plan, res.retained, params, config);
        res.dec_acts = decoder_stack_forward(dec_in, memory, params, config);
        Var dec_out = res.dec_acts.back();
        if (config.needs_projection()) dec_out = matmul(dec_out, params.dec_to_emb);
        prediction_rows = select_rows(dec_out, plan.positions);
    }

    // Tied softmax: logits = rows · E^T.
    res.logits = matmul_nt(prediction_rows, params.embed.tokens);
    return res;
}

Var mlm_loss(const Var& logits_at_m, const MaskPlan& plan) {
    if (plan.mask_count() == 0) throw EmptyMaskError("mlm_loss: empty masked-position set");
    if (logits_at_m->value.rows() != plan.mask_count()) {
        throw ContractError("mlm_loss: " + std::to_string(logits_at_m->value.rows()) +
                            " logit rows for " + std::to_string(plan.mask_count()) +
                            " masked positions");
    }
    std::vector<std::size_t> all_rows(plan.mask_count());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    return cross_entropy_masked(logits_at_m, plan.original_tokens, all_rows);
}

}  // namespace maelm
