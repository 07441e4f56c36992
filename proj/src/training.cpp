#include "maelm/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maelm/errors.hpp"
#include "maelm/rank_analysis.hpp"
#include "maelm/rng.hpp"

namespace maelm {

double lr_at_step(std::uint64_t t, const TrainRunConfig& cfg) {
    if (t > cfg.steps) throw ContractError("lr_at_step: step beyond max steps");
    const double td = static_cast<double>(t);
    if (t <= cfg.warmup) {
        if (cfg.warmup == 0) return cfg.peak_lr;
        return cfg.peak_lr * td / static_cast<double>(cfg.warmup);
    }
    return cfg.peak_lr * static_cast<double>(cfg.steps - t) /
           static_cast<double>(cfg.steps - cfg.warmup);
}

double clip_global_norm(std::vector<Tensor>& grads, double threshold) {
    if (threshold <= 0.0) throw ContractError("clip threshold must be positive");
    double sq = 0.0;
    for (const auto& g : grads)
        for (std::size_t i = 0; i < g.size(); ++i) sq += g(i) * g(i);
    const double norm = std::sqrt(sq);
    if (norm > threshold) {
        const double s = threshold / norm;
        for (auto& g : grads)
            for (std::size_t i = 0; i < g.size(); ++i) g(i) *= s;
    }
    return norm;
}

AdamState init_adam_state(const ModelParameters& params) {
    AdamState st;
    for (const auto& [name, var] : params.manifest) {
        st.m.emplace_back(var->value.shape());
        st.v.emplace_back(var->value.shape());
    }
    return st;
}

void adam_step(std::vector<std::pair<std::string, Var>>& manifest,
               const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamConfig& adam) {
    if (grads.size() != manifest.size() || state.m.size() != manifest.size()) {
        throw ContractError("adam_step: gradient/state count does not match parameter manifest");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < manifest.size(); ++p) {
        Tensor& theta = manifest[p].second->value;
        const Tensor& g = grads[p];
        require_same_shape(theta, g, "adam_step");
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m(i) = adam.beta1 * m(i) + (1.0 - adam.beta1) * g(i);
            v(i) = adam.beta2 * v(i) + (1.0 - adam.beta2) * g(i) * g(i);
            const double m_hat = m(i) / bc1;
            const double v_hat = v(i) / bc2;
            theta(i) -= lr * m_hat / (std::sqrt(v_hat) + adam.eps);
            theta(i) -= lr * adam.weight_decay * theta(i);
        }
    }
}

std::vector<Tensor> collect_gradients(const ModelParameters& params) {
    std::vector<Tensor> grads;
    grads.reserve(params.manifest.size());
    for (const auto& [name, var] : params.manifest) {
        if (var->has_grad()) {
            grads.push_back(std::move(var->grad));
        } else {
            grads.emplace_back(var->value.shape());
        }
        var->grad = Tensor();
    }
    return grads;
}

namespace {

std::uint64_t row_seed(std::uint64_t base, std::uint64_t step, std::uint64_t row,
                       std::uint64_t salt) {
    return Rng::derive(base, (step << 24) ^ (row << 4) ^ salt);
}

// One sequence's mask plan under the configured mode.
MaskPlan plan_for_row(const std::vector<int>& row, const ModelConfig& mc, std::size_t vocab_size,
                      std::uint64_t base, std::uint64_t step, std::uint64_t r) {
    MaskPlan plan = uniform_mask(row, kMaskRate, row_seed(base, step, r, 0));
    plan = delta_split(std::move(plan), mc.delta, row_seed(base, step, r, 1));
    if (mc.mask_mode == MaskMode::RandomReplace) {
        plan = randomize_plan(std::move(plan), row_seed(base, step, r, 2), vocab_size);
    }
    return plan;
}

void write_metric(std::ofstream& out, std::uint64_t step, const char* split, double loss,
                  double lr, double grad_norm) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%llu,\"split\":\"%s\",\"loss\":%.17g,\"lr\":%.17g,\"grad_norm\":%.17g}\n",
                  static_cast<unsigned long long>(step), split, loss, lr, grad_norm);
    out << buf;
}

std::string checkpoint_name(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step-%06llu.ckpt", static_cast<unsigned long long>(step));
    return buf;
}

}  // namespace

// Validation evaluation during training runs over at most this many batches
// of the held-out tail; the split itself stays the full 5%.
constexpr std::size_t kValidationBatchCap = 16;

double validation_loss(const ModelParameters& params, const ModelConfig& config,
                       const std::vector<Batch>& batches, std::uint64_t mask_base, double delta,
                       MaskMode mode, std::size_t vocab_size) {
    ModelConfig mc = config;
    mc.delta = delta;
    mc.mask_mode = mode;
    double total = 0.0;
    std::size_t count = 0;
    std::uint64_t g = 0;
    for (const auto& batch : batches) {
        for (std::size_t r = 0; r < batch.rows; ++r, ++g) {
            std::vector<int> row = batch.row_vec(r);
            MaskPlan plan = plan_for_row(row, mc, vocab_size, mask_base, 0, g);
            ForwardResult fwd = forward(row, plan, params, mc, {});
            Var loss = mlm_loss(fwd.logits, plan);
            total += val(loss)(0) * static_cast<double>(plan.mask_count());
            count += plan.mask_count();
        }
    }
    if (count == 0) throw EmptyMaskError("validation produced no masked positions");
    return total / static_cast<double>(count);
}

TrainResult train_mlm(const RunConfig& cfg, const std::string& out_dir,
                      const std::string& resume_from) {
    cfg.train.validate();
    if (cfg.data.corpus.empty()) throw ContractError("data.corpus is required");

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/checkpoints");

    Vocab vocab = build_vocab(cfg.data.corpus, cfg.data.mode(), cfg.data.min_freq);
    vocab.dump(out_dir + "/vocab.txt");

    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    mc.validate();
    if (cfg.data.seq_len + 1 > mc.max_len) {
        throw ContractError("data.seq_len " + std::to_string(cfg.data.seq_len) +
                            " leaves no room for [CLS] under model.max_len " +
                            std::to_string(mc.max_len));
    }

    BatchStream stream = encode_batches(cfg.data.corpus, vocab, cfg.data.seq_len, cfg.train.batch,
                                        cfg.train.seed);
    const std::string config_text = canonical_config_text(cfg);

    ModelParameters params = init_parameters(mc, cfg.train.seed);
    AdamState adam = init_adam_state(params);
    std::uint64_t start_step = 0;

    if (!resume_from.empty()) {
        Checkpoint ckpt = checkpoint_load(resume_from);
        if (ckpt.config_text != config_text) {
            throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                                  "checkpoint was written under a different configuration");
        }
        restore_parameters(params, ckpt);
        restore_adam(adam, params, ckpt);
        stream.restore(ckpt.stream);
        start_step = ckpt.step;
    }

    const std::uint64_t mask_train = Rng::derive(cfg.train.seed, rng_purpose::kMasking);
    const std::uint64_t mask_valid = Rng::derive(mask_train, 0x5eed);
    const std::uint64_t dropout_base = Rng::derive(cfg.train.seed, rng_purpose::kDropout);

    std::vector<Batch> valid_batches = stream.validation_batches();
    if (valid_batches.size() > kValidationBatchCap) valid_batches.resize(kValidationBatchCap);

    const std::string metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError("cannot write metrics file: " + metrics_path);

    TrainResult result;
    result.metrics_path = metrics_path;
    result.vocab_size = vocab.size();

    auto run_validation = [&](std::uint64_t step) {
        const double loss = validation_loss(params, mc, valid_batches, mask_valid, mc.delta,
                                            mc.mask_mode, vocab.size());
        write_metric(metrics, step, "valid", loss, lr_at_step(step, cfg.train), 0.0);
        return loss;
    };

    if (start_step == 0) {
        result.step0_valid_loss = run_validation(0);
    }

    for (std::uint64_t t = start_step + 1; t <= cfg.train.steps; ++t) {
        Batch batch = stream.next_train();

        std::vector<std::vector<int>> rows(batch.rows);
        std::vector<MaskPlan> plans(batch.rows);
        std::size_t total_masked = 0;
        for (std::size_t r = 0; r < batch.rows; ++r) {
            rows[r] = batch.row_vec(r);
            plans[r] = plan_for_row(rows[r], mc, vocab.size(), mask_train, t, r);
            total_masked += plans[r].mask_count();
        }

        double batch_loss = 0.0;
        for (std::size_t r = 0; r < batch.rows; ++r) {
            Rng drop_rng(row_seed(dropout_base, t, r, 3));
            DropoutConfig dropout{kDropoutRate, &drop_rng};
            ForwardResult fwd = forward(rows[r], plans[r], params, mc, dropout);
            Var loss = mlm_loss(fwd.logits, plans[r]);
            const double w = static_cast<double>(plans[r].mask_count()) /
                             static_cast<double>(total_masked);
            batch_loss += val(loss)(0) * w;
            backward(loss, w);
        }

        if (!std::isfinite(batch_loss)) {
            throw TrainingDivergedError(
                "training diverged: non-finite loss at step " + std::to_string(t),
                static_cast<long long>(t));
        }

        std::vector<Tensor> grads = collect_gradients(params);
        const double grad_norm = clip_global_norm(grads, cfg.train.clip);
        const double lr = lr_at_step(t, cfg.train);
        adam_step(params.manifest, grads, adam, lr);

        write_metric(metrics, t, "train", batch_loss, lr, grad_norm);

        if (t % cfg.train.checkpoint_every == 0 || t == cfg.train.steps) {
            const double vloss = run_validation(t);
            const std::string ckpt_path = out_dir + "/checkpoints/" + checkpoint_name(t);
            checkpoint_save(ckpt_path, config_text, t, params, adam, stream.state());
            result.last_checkpoint = ckpt_path;
            if (t == cfg.train.steps) result.final_valid_loss = vloss;
        }
        result.final_step = t;
    }
    return result;
}

}  // namespace maelm
