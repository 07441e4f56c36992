#pragma once

#include <cstdint>
#include <vector>

namespace maelm {

// A masked view of one token sequence: which positions are hidden, what the
// originals were, how each hidden position was corrupted, and the delta
// split into encoder-visible vs decoder-only masks.
struct MaskPlan {
    enum class Corruption { MaskToken, KeptOriginal, RandomReplace };

    std::size_t seq_len = 0;
    std::vector<std::size_t> positions;        // M, sorted
    std::vector<int> original_tokens;          // aligned with positions
    std::vector<Corruption> corruption;        // aligned with positions
    std::vector<int> corrupted_tokens;         // content at M after corruption
    std::vector<std::size_t> encoder_visible;  // subset of M, sorted
    std::vector<std::size_t> decoder_only;     // complement within M, sorted

    std::size_t mask_count() const { return positions.size(); }
    bool is_masked(std::size_t i) const;
    // Index into the aligned arrays for a masked position, or -1.
    long long mask_index(std::size_t i) const;
};

// Exactly max(1, round(rate * n)) positions chosen uniformly without
// replacement among maskable positions ([CLS]/[PAD] are never masked).
// Every corruption record is kept-as-MASK; the plan starts fully
// decoder-only (encoder_visible empty) until delta_split assigns a split.
MaskPlan uniform_mask(const std::vector<int>& tokens, double rate, std::uint64_t seed);

// BERT-style corruption of the selected positions: 80% kept-as-MASK,
// 10% kept-original, 10% replaced by a random non-special token, with
// largest-remainder rounding resolved in the order MASK, original, random.
MaskPlan bert_mask(const std::vector<int>& tokens, double rate, std::uint64_t seed,
                   std::size_t vocab_size);

// Replaces every masked position's content with a random non-special token
// (the "random replace w. real token" ablation).
MaskPlan randomize_plan(MaskPlan plan, std::uint64_t seed, std::size_t vocab_size);

// Assigns round(delta * |M|) masked positions to the encoder-visible set,
// the remainder to decoder-only. delta=0 is the pure masked-autoencoder
// view, delta=1 the standard MLM view.
MaskPlan delta_split(MaskPlan plan, double delta, std::uint64_t seed);

}  // namespace maelm
