#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maelm/data.hpp"
#include "maelm/model.hpp"
#include "maelm/tensor.hpp"

namespace maelm {

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'E', 'L', 'M', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Adam moments aligned with the parameter manifest order.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t t = 0;
};

// Everything a resumed run needs. Tensors appear in manifest order: the
// parameters first, then the first and second Adam moments under the
// "adam/m/" and "adam/v/" prefixes.
struct Checkpoint {
    std::string config_text;  // canonical run configuration
    std::uint64_t step = 0;
    std::uint64_t adam_t = 0;
    BatchStream::State stream;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void checkpoint_save(const std::string& path, const std::string& config_text, std::uint64_t step,
                     const ModelParameters& params, const AdamState& adam,
                     const BatchStream::State& stream);

// Validates magic, version and the config digest; any short read reports a
// truncated file. Never mutates caller state.
Checkpoint checkpoint_load(const std::string& path);

// Copies checkpoint tensors into an initialized parameter set by name.
// Every manifest entry must be present with a matching shape.
void restore_parameters(ModelParameters& params, const Checkpoint& ckpt);
void restore_adam(AdamState& adam, const ModelParameters& params, const Checkpoint& ckpt);

}  // namespace maelm
