#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maelm/checkpoint.hpp"
#include "maelm/config.hpp"
#include "maelm/data.hpp"
#include "maelm/model.hpp"

namespace maelm {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 0.01;  // decoupled
};

inline constexpr double kDropoutRate = 0.1;

// Linear ramp to the peak over the warmup, then linear decay to zero.
double lr_at_step(std::uint64_t t, const TrainRunConfig& cfg);

// Rescales all gradients when the global l2 norm exceeds the threshold;
// returns the pre-clip norm.
double clip_global_norm(std::vector<Tensor>& grads, double threshold);

AdamState init_adam_state(const ModelParameters& params);

// Bias-corrected Adam with decoupled weight decay over the manifest order.
void adam_step(std::vector<std::pair<std::string, Var>>& manifest,
               const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamConfig& adam = {});

// Pulls accumulated gradients off the parameter nodes (zeros for parameters
// outside the graph) and clears them for the next step.
std::vector<Tensor> collect_gradients(const ModelParameters& params);

struct TrainResult {
    double step0_valid_loss = 0.0;
    double final_valid_loss = 0.0;
    std::uint64_t final_step = 0;
    std::string metrics_path;
    std::string last_checkpoint;
    std::size_t vocab_size = 0;
};

// Full pretraining run: deterministic under cfg.train.seed, JSON-lines
// metrics, periodic checkpoints, resumable. Writes into out_dir:
//   metrics.jsonl, vocab.txt, checkpoints/step-NNNNNN.ckpt
TrainResult train_mlm(const RunConfig& cfg, const std::string& out_dir,
                      const std::string& resume_from = "");

// Mean validation loss of a parameter set under deterministic masks.
double validation_loss(const ModelParameters& params, const ModelConfig& config,
                       const std::vector<Batch>& batches, std::uint64_t mask_base,
                       double delta, MaskMode mode, std::size_t vocab_size);

}  // namespace maelm
