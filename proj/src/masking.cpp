#include "maelm/masking.hpp"

#include <algorithm>
#include <cmath>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"
#include "maelm/special_tokens.hpp"

namespace maelm {

bool MaskPlan::is_masked(std::size_t i) const {
    return std::binary_search(positions.begin(), positions.end(), i);
}

long long MaskPlan::mask_index(std::size_t i) const {
    auto it = std::lower_bound(positions.begin(), positions.end(), i);
    if (it == positions.end() || *it != i) return -1;
    return it - positions.begin();
}

static std::vector<std::size_t> choose_positions(const std::vector<int>& tokens, double rate,
                                                 Rng& rng) {
    if (!(rate > 0.0 && rate < 1.0)) {
        throw ContractError("mask rate must lie strictly inside (0,1), got " + std::to_string(rate));
    }
    const std::size_t n = tokens.size();
    if (n < 1) throw ContractError("cannot mask an empty sequence");

    std::vector<std::size_t> maskable;
    maskable.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (tokens[i] != kPadId && tokens[i] != kClsId) maskable.push_back(i);

    const std::size_t target =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))));
    if (maskable.size() < target) {
        throw ContractError("sequence has " + std::to_string(maskable.size()) +
                            " maskable positions, need " + std::to_string(target));
    }
    // Partial Fisher-Yates: the first `target` entries are a uniform sample.
    for (std::size_t i = 0; i < target; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(maskable.size() - i));
        std::swap(maskable[i], maskable[j]);
    }
    maskable.resize(target);
    std::sort(maskable.begin(), maskable.end());
    return maskable;
}

static MaskPlan plan_from_positions(const std::vector<int>& tokens,
                                    std::vector<std::size_t> positions) {
    MaskPlan plan;
    plan.seq_len = tokens.size();
    plan.positions = std::move(positions);
    plan.original_tokens.reserve(plan.positions.size());
    for (std::size_t p : plan.positions) plan.original_tokens.push_back(tokens[p]);
    plan.corruption.assign(plan.positions.size(), MaskPlan::Corruption::MaskToken);
    plan.corrupted_tokens.assign(plan.positions.size(), kMaskId);
    plan.decoder_only = plan.positions;  // pure exclusion view until delta_split
    return plan;
}

MaskPlan uniform_mask(const std::vector<int>& tokens, double rate, std::uint64_t seed) {
    Rng rng(seed);
    return plan_from_positions(tokens, choose_positions(tokens, rate, rng));
}

static int sample_non_special(Rng& rng, std::size_t vocab_size) {
    if (vocab_size <= kNumReserved) {
        throw ContractError("vocabulary has no non-special tokens to sample");
    }
    return kNumReserved + static_cast<int>(rng.next_below(vocab_size - kNumReserved));
}

MaskPlan bert_mask(const std::vector<int>& tokens, double rate, std::uint64_t seed,
                   std::size_t vocab_size) {
    Rng rng(seed);
    MaskPlan plan = plan_from_positions(tokens, choose_positions(tokens, rate, rng));
    const std::size_t k = plan.mask_count();

    // Largest-remainder split of k into 80/10/10, ties resolved in the
    // fixed order MASK -> original -> random.
    const double share[3] = {0.8, 0.1, 0.1};
    std::size_t counts[3];
    double fracs[3];
    std::size_t assigned = 0;
    for (int c = 0; c < 3; ++c) {
        const double exact = share[c] * static_cast<double>(k);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        fracs[c] = exact - static_cast<double>(counts[c]);
        assigned += counts[c];
    }
    const std::size_t remainder = k - assigned;  // at most 2
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return fracs[a] > fracs[b]; });
    for (std::size_t r = 0; r < remainder; ++r) counts[order[r]] += 1;

    std::vector<std::size_t> slots(k);
    for (std::size_t i = 0; i < k; ++i) slots[i] = i;
    rng.shuffle(slots);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t s = slots[i];
        if (i < counts[0]) {
            plan.corruption[s] = MaskPlan::Corruption::MaskToken;
            plan.corrupted_tokens[s] = kMaskId;
        } else if (i < counts[0] + counts[1]) {
            plan.corruption[s] = MaskPlan::Corruption::KeptOriginal;
            plan.corrupted_tokens[s] = plan.original_tokens[s];
        } else {
            plan.corruption[s] = MaskPlan::Corruption::RandomReplace;
            plan.corrupted_tokens[s] = sample_non_special(rng, vocab_size);
        }
    }
    return plan;
}

MaskPlan randomize_plan(MaskPlan plan, std::uint64_t seed, std::size_t vocab_size) {
    Rng rng(seed);
    for (std::size_t i = 0; i < plan.mask_count(); ++i) {
        plan.corruption[i] = MaskPlan::Corruption::RandomReplace;
        plan.corrupted_tokens[i] = sample_non_special(rng, vocab_size);
    }
    return plan;
}

MaskPlan delta_split(MaskPlan plan, double delta, std::uint64_t seed) {
    if (!(delta >= 0.0 && delta <= 1.0)) {
        throw ContractError("delta must lie in [0,1], got " + std::to_string(delta));
    }
    Rng rng(seed);
    const std::size_t k = plan.mask_count();
    const std::size_t n_vis =
        static_cast<std::size_t>(std::llround(delta * static_cast<double>(k)));
    std::vector<std::size_t> pool = plan.positions;
    for (std::size_t i = 0; i < n_vis; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    plan.encoder_visible.assign(pool.begin(), pool.begin() + n_vis);
    std::sort(plan.encoder_visible.begin(), plan.encoder_visible.end());
    plan.decoder_only.clear();
    std::set_difference(plan.positions.begin(), plan.positions.end(),
                        plan.encoder_visible.begin(), plan.encoder_visible.end(),
                        std::back_inserter(plan.decoder_only));
    return plan;
}

}  // namespace maelm
