#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maelm/data.hpp"
#include "maelm/model.hpp"
#include "maelm/tensor.hpp"

namespace maelm {

// Smallest k whose top-k squared singular values capture at least `tau`
// of the total squared singular value mass.
int effective_rank(const Tensor& h, double tau);

// Same rule over precomputed squared singular values (descending).
int effective_rank_from_squares(const std::vector<double>& squares_desc, double tau);

// Rank-1 residual of a matrix: R = H - 1 h^T with h the column mean (the
// Frobenius minimizer), plus the induced-norm record of R.
struct ResidualDecomposition {
    Tensor residual;  // [n×d]
    Tensor center;    // h, [d]
    double l1 = 0.0;
    double linf = 0.0;
    double composite = 0.0;
};

ResidualDecomposition residual_decompose(const Tensor& h);

// Accumulates H^T H over pooled activation rows so layer-wise effective
// ranks can be measured without materializing a tokens×d matrix.
class GramPool {
  public:
    explicit GramPool(std::size_t dim);
    void add_rows(const Tensor& rows);
    int rank_tau(double tau) const;  // RankError if pooled tokens < dim
    std::size_t tokens() const { return tokens_; }
    std::size_t dim() const { return dim_; }

  private:
    std::size_t dim_;
    std::size_t tokens_ = 0;
    Tensor gram_;
};

struct RankReportRow {
    std::size_t layer;
    std::string config;
    double tau;
    int rank;
    std::size_t tokens;
};

struct RankReport {
    std::vector<RankReportRow> rows;
    void write_csv(const std::string& path) const;
};

// Encoder-only forward pass for analysis; dropout off, no decoder.
std::vector<Var> encoder_activations(const std::vector<int>& tokens, const MaskPlan& plan,
                                     const ModelParameters& params, const ModelConfig& config,
                                     EncoderInputs* inputs_out = nullptr);

// Per-layer effective ranks of pooled token representations for
// (i) the MLM model on masked inputs, (ii) the same inputs unmasked and
// (iii) the masked-autoencoder encoder, under one shared masking seed.
RankReport rank_gap_report(const ModelParameters& mlm_params, const ModelConfig& mlm_config,
                           const ModelParameters& mae_params, const ModelConfig& mae_config,
                           const std::vector<Batch>& batches, double tau, std::uint64_t mask_seed);

// Per-layer effective rank of the [MASK]-row representations of an MLM
// model, including the embedding layer, plus the rank of the position rows
// at the same masked positions.
RankReport lemma1_report(const ModelParameters& mlm_params, const ModelConfig& mlm_config,
                         const std::vector<Batch>& batches, double tau, std::uint64_t mask_seed);

inline constexpr double kMaskRate = 0.15;

}  // namespace maelm
