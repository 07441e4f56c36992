#include "maelm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "maelm/config.hpp"
#include "maelm/errors.hpp"

namespace maelm {

namespace {

// Values are written in the host's little-endian layout; 64-bit IEEE-754
// doubles and fixed-width integers throughout.

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.raw()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::istream& in) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    const std::uint32_t ndim = read_u32(in);
    std::vector<std::size_t> shape(ndim);
    std::size_t count = 1;
    for (auto& d : shape) {
        d = read_u64(in);
        count *= d;
    }
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void checkpoint_save(const std::string& path, const std::string& config_text, std::uint64_t step,
                     const ModelParameters& params, const AdamState& adam,
                     const BatchStream::State& stream) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    write_u32(out, kCheckpointVersion);
    write_u64(out, fnv1a64(config_text));
    write_u64(out, config_text.size());
    out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
    write_u64(out, step);
    write_u64(out, adam.t);
    for (std::uint64_t w : stream.rng) write_u64(out, w);
    write_u64(out, stream.cursor);
    write_u64(out, stream.order.size());
    for (std::uint64_t w : stream.order) write_u64(out, w);

    write_u64(out, params.manifest.size() * 3);
    for (const auto& [name, var] : params.manifest) write_tensor(out, name, var->value);
    for (std::size_t i = 0; i < params.manifest.size(); ++i)
        write_tensor(out, "adam/m/" + params.manifest[i].first, adam.m[i]);
    for (std::size_t i = 0; i < params.manifest.size(); ++i)
        write_tensor(out, "adam/v/" + params.manifest[i].first, adam.v[i]);
    if (!out) throw DataError("write failure on checkpoint: " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "not a checkpoint file (bad magic): " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                              "checkpoint version " + std::to_string(version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
    }
    Checkpoint ckpt;
    const std::uint64_t digest = read_u64(in);
    const std::uint64_t cfg_len = read_u64(in);
    ckpt.config_text.resize(cfg_len);
    in.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    if (fnv1a64(ckpt.config_text) != digest) {
        throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                              "checkpoint config digest mismatch");
    }
    ckpt.step = read_u64(in);
    ckpt.adam_t = read_u64(in);
    for (auto& w : ckpt.stream.rng) w = read_u64(in);
    ckpt.stream.cursor = read_u64(in);
    const std::uint64_t order_len = read_u64(in);
    ckpt.stream.order.resize(order_len);
    for (auto& w : ckpt.stream.order) w = read_u64(in);

    const std::uint64_t n_tensors = read_u64(in);
    ckpt.tensors.reserve(n_tensors);
    for (std::uint64_t i = 0; i < n_tensors; ++i) ckpt.tensors.push_back(read_tensor(in));
    return ckpt;
}

void restore_parameters(ModelParameters& params, const Checkpoint& ckpt) {
    for (auto& [name, var] : params.manifest) {
        const Tensor* t = ckpt.find(name);
        if (t == nullptr) {
            throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                                  "checkpoint lacks tensor " + name);
        }
        if (!t->same_shape(var->value)) {
            throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                                  "checkpoint tensor " + name + " has shape " + t->shape_str() +
                                      ", expected " + var->value.shape_str());
        }
        var->value = *t;
        var->grad = Tensor();
    }
}

void restore_adam(AdamState& adam, const ModelParameters& params, const Checkpoint& ckpt) {
    adam.t = ckpt.adam_t;
    adam.m.clear();
    adam.v.clear();
    for (const auto& [name, var] : params.manifest) {
        const Tensor* m = ckpt.find("adam/m/" + name);
        const Tensor* v = ckpt.find("adam/v/" + name);
        if (m == nullptr || v == nullptr) {
            throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                                  "checkpoint lacks optimizer state for " + name);
        }
        adam.m.push_back(*m);
        adam.v.push_back(*v);
    }
}

}  // namespace maelm
