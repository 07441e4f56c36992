#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maelm/layers.hpp"
#include "maelm/masking.hpp"

namespace maelm {

// How masked positions reach the encoder.
enum class MaskMode {
    Exclude,           // [MASK] rows dropped from encoder inputs
    Include,           // standard MLM: [MASK] embedding rows in the encoder
    IncludeDecResets,  // encoder sees [MASK]; decoder resets masked rows
    RandomReplace,     // masked content replaced by random real tokens
};

enum class DecoderAttn { BiSelf, BiSelfCross, UniSelfCross, CrossOnly };

MaskMode parse_mask_mode(const std::string& s);
DecoderAttn parse_decoder_attn(const std::string& s);
std::string to_string(MaskMode m);
std::string to_string(DecoderAttn a);

struct ModelConfig {
    std::size_t enc_layers = 4;
    std::size_t dec_layers = 2;
    std::size_t dim = 128;
    std::size_t dec_dim = 128;
    std::size_t heads = 4;
    std::size_t ffn_dim = 512;
    std::size_t vocab_size = 0;  // filled in from the corpus vocabulary
    std::size_t max_len = 512;
    bool use_relative_bias = true;
    bool aligned_positions = true;
    double delta = 0.0;
    MaskMode mask_mode = MaskMode::Exclude;
    DecoderAttn decoder_attn = DecoderAttn::BiSelf;
    std::size_t rel_buckets = 32;
    std::size_t rel_max_distance = 128;

    bool has_decoder() const { return dec_layers > 0; }
    bool needs_projection() const { return dec_dim != dim; }
    void validate() const;
};

// All trainable state. `manifest` lists every tensor in a fixed order; the
// checkpoint format and the optimizer both iterate it.
struct ModelParameters {
    EmbeddingTable embed;
    RelativePositionBias rel_bias;  // table is null when relative bias is off
    std::vector<EncoderLayerWeights> encoder;
    std::vector<DecoderLayerWeights> decoder;
    Var enc_to_dec;  // [dim × dec_dim], present iff dims differ
    Var dec_to_emb;  // [dec_dim × dim], present iff dims differ

    std::vector<std::pair<std::string, Var>> manifest;
    Var find(const std::string& name) const;
};

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

// Encoder input assembly: one row per retained position, each row the sum of
// a token embedding and the position embedding of the row's index (original
// index when positions are aligned, consecutive otherwise).
struct EncoderInputs {
    Var h0;
    std::vector<std::size_t> retained;       // original indices, ascending
    std::vector<std::size_t> positions;      // per-row index used for embeddings/bias
    std::vector<bool> row_is_mask;           // row carries the [MASK] symbol
};

EncoderInputs build_encoder_inputs(const std::vector<int>& tokens, const MaskPlan& plan,
                                   const ModelParameters& params, const ModelConfig& config);

// Decoder input assembly over the full sequence: mask rows are re-inserted
// as e_[MASK] + p_i, retained rows carry the encoder output plus p_i.
Var build_decoder_inputs(const Var& enc_out, const MaskPlan& plan,
                         const std::vector<std::size_t>& retained,
                         const ModelParameters& params, const ModelConfig& config);

// Decoder stack over prepared inputs; `memory` is the (projected) encoder
// output sequence for the cross-attention modes.
std::vector<Var> decoder_stack_forward(const Var& dec_in, const Var& memory,
                                       const ModelParameters& params, const ModelConfig& config);

struct ForwardResult {
    Var logits;                  // [|M| × |V|], rows follow sorted M
    std::vector<Var> enc_acts;   // H^0 .. H^L_enc
    std::vector<Var> dec_acts;   // empty when the model has no decoder
    std::vector<std::size_t> retained;
    std::vector<std::size_t> enc_positions;
    std::vector<bool> enc_row_is_mask;
};

ForwardResult forward(const std::vector<int>& tokens, const MaskPlan& plan,
                      const ModelParameters& params, const ModelConfig& config,
                      DropoutConfig dropout = {});

// MLM objective over the masked positions of the plan.
Var mlm_loss(const Var& logits_at_m, const MaskPlan& plan);

}  // namespace maelm
