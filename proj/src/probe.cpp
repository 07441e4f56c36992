#include "maelm/probe.hpp"

#include <algorithm>

#include "maelm/checkpoint.hpp"
#include "maelm/config.hpp"
#include "maelm/errors.hpp"
#include "maelm/rank_analysis.hpp"
#include "maelm/rng.hpp"
#include "maelm/special_tokens.hpp"
#include "maelm/training.hpp"

namespace maelm {

ProbeModel load_probe_model(const std::string& checkpoint_path, std::uint64_t seed) {
    Checkpoint ckpt = checkpoint_load(checkpoint_path);
    RunConfig run = parse_config_text(ckpt.config_text);

    Vocab vocab = build_vocab(run.data.corpus, run.data.mode(), run.data.min_freq);

    ProbeModel probe;
    probe.config = run.model;
    probe.config.vocab_size = vocab.size();
    // The decoder is pretraining-only: the probe model never constructs it.
    probe.config.dec_layers = 0;
    probe.config.mask_mode = MaskMode::Include;
    probe.config.delta = 1.0;
    probe.config.validate();

    probe.params = init_parameters(probe.config, seed);
    restore_parameters(probe.params, ckpt);

    Tensor head({probe.config.dim, 2});  // zero head: exact chance before training
    probe.head_w = parameter(head);
    probe.head_b = parameter(Tensor({2}));
    return probe;
}

namespace {

struct ProbeTask {
    std::vector<std::vector<int>> tokens;
    std::vector<int> labels;
};

// Balanced two-class sequences: class 0 draws 70% of its tokens from the
// even half of the non-special vocabulary, class 1 from the odd half.
ProbeTask make_task(std::size_t count, std::size_t seq_len, std::size_t vocab_size, Rng& rng) {
    std::vector<int> set_a, set_b;
    for (int id = kNumReserved; id < static_cast<int>(vocab_size); ++id) {
        ((id - kNumReserved) % 2 == 0 ? set_a : set_b).push_back(id);
    }
    if (set_a.empty() || set_b.empty()) {
        throw ContractError("vocabulary too small for the probe task");
    }
    ProbeTask task;
    for (std::size_t e = 0; e < count; ++e) {
        const int label = static_cast<int>(e % 2);
        std::vector<int> row(seq_len + 1);
        row[0] = kClsId;
        for (std::size_t i = 1; i <= seq_len; ++i) {
            const bool majority = rng.next_double() < 0.7;
            const auto& pool = ((label == 0) == majority) ? set_a : set_b;
            row[i] = pool[rng.next_below(pool.size())];
        }
        task.tokens.push_back(std::move(row));
        task.labels.push_back(label);
    }
    return task;
}

MaskPlan no_masks(std::size_t n) {
    MaskPlan plan;
    plan.seq_len = n;
    return plan;
}

Var class_logits(const ProbeModel& probe, const std::vector<int>& row) {
    auto acts = encoder_activations(row, no_masks(row.size()), probe.params, probe.config);
    Var cls = select_rows(acts.back(), {0});
    return add_row_broadcast(matmul(cls, probe.head_w), probe.head_b);
}

}  // namespace

ProbeResult finetune_probe(const std::string& checkpoint_path, std::uint64_t seed,
                           std::size_t steps, std::size_t batch) {
    ProbeModel probe = load_probe_model(checkpoint_path, seed);

    ProbeResult result;
    result.decoder_absent = true;
    for (const auto& [name, var] : probe.params.manifest) {
        if (name.rfind("dec/", 0) == 0 || name.rfind("proj/", 0) == 0) {
            result.decoder_absent = false;
        }
    }

    Rng task_rng(Rng::derive(seed, rng_purpose::kProbe) ^ 0x7a5e);
    const std::size_t seq_len = 24;
    const std::size_t n_train = 256, n_test = 256;
    ProbeTask train = make_task(n_train, seq_len, probe.config.vocab_size, task_rng);
    ProbeTask test = make_task(n_test, seq_len, probe.config.vocab_size, task_rng);
    for (const auto& row : train.tokens)
        for (int id : row)
            if (id == kMaskId) throw ContractError("probe input contains a [MASK] token");

    // Fine-tune encoder plus head jointly.
    std::vector<std::pair<std::string, Var>> manifest = probe.params.manifest;
    manifest.emplace_back("probe/head_w", probe.head_w);
    manifest.emplace_back("probe/head_b", probe.head_b);
    ModelParameters opt_view;
    opt_view.manifest = manifest;
    AdamState adam = init_adam_state(opt_view);

    const double lr = 1e-3;
    const double clip = 2.0;
    for (std::size_t t = 0; t < steps; ++t) {
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t e = (t * batch + b) % train.tokens.size();
            Var logits = class_logits(probe, train.tokens[e]);
            Var loss = cross_entropy_masked(logits, {train.labels[e]}, {0});
            batch_loss += val(loss)(0);
            backward(loss, 1.0 / static_cast<double>(batch));
        }
        if (!std::isfinite(batch_loss)) {
            throw TrainingDivergedError("probe training diverged", static_cast<long long>(t));
        }
        std::vector<Tensor> grads = collect_gradients(opt_view);
        clip_global_norm(grads, clip);
        adam_step(opt_view.manifest, grads, adam, lr);
    }

    std::size_t correct = 0;
    for (std::size_t e = 0; e < test.tokens.size(); ++e) {
        Var logits = class_logits(probe, test.tokens[e]);
        const int pred = val(logits)(0) >= val(logits)(1) ? 0 : 1;
        if (pred == test.labels[e]) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(test.tokens.size());
    result.train_examples = n_train;
    result.test_examples = n_test;
    return result;
}

}  // namespace maelm
