#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maelm/data.hpp"
#include "maelm/model.hpp"

namespace maelm {

struct TrainRunConfig {
    std::uint64_t steps = 2000;
    double peak_lr = 1e-3;
    std::uint64_t warmup = 100;
    std::size_t batch = 8;
    double clip = 2.0;
    std::uint64_t seed = 42;
    std::uint64_t checkpoint_every = 500;

    void validate() const;
};

struct DataConfig {
    std::string corpus;
    std::string tokenizer = "char";  // char | word
    std::size_t seq_len = 64;
    std::size_t min_freq = 1;

    Vocab::Mode mode() const;
};

struct AnalysisConfig {
    double tau = 0.9;
    std::size_t tokens_budget = 50000;
};

// Materialization of the flat key=value run configuration file.
struct RunConfig {
    ModelConfig model;
    TrainRunConfig train;
    DataConfig data;
    AnalysisConfig analysis;
};

// Applies one key=value pair; unknown keys are rejected.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Fixed-order serialization; checkpoints digest this text to detect config
// mismatches on resume.
std::string canonical_config_text(const RunConfig& cfg);

// Every key with its default, for --help.
std::vector<std::pair<std::string, std::string>> config_keys_with_defaults();

std::uint64_t fnv1a64(const std::string& text);

}  // namespace maelm
