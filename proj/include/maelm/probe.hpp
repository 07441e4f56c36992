#pragma once

#include <cstdint>
#include <string>

#include "maelm/model.hpp"

namespace maelm {

struct ProbeResult {
    double accuracy = 0.0;
    std::size_t train_examples = 0;
    std::size_t test_examples = 0;
    bool decoder_absent = false;  // no decoder tensor reachable from the probe graph
};

// Loads only the encoder from a pretraining checkpoint, attaches a linear
// head to the [CLS] output and fine-tunes on a synthetic two-class task
// (which of two disjoint token sets dominates the sequence). No [MASK]
// token ever appears in probe inputs.
ProbeResult finetune_probe(const std::string& checkpoint_path, std::uint64_t seed,
                           std::size_t steps = 300, std::size_t batch = 8);

// The probe's encoder-only parameter view, exposed for the structural
// decoder-absence checks.
struct ProbeModel {
    ModelConfig config;
    ModelParameters params;
    Var head_w;  // [dim × 2]
    Var head_b;  // [2]
};

ProbeModel load_probe_model(const std::string& checkpoint_path, std::uint64_t seed);

}  // namespace maelm
