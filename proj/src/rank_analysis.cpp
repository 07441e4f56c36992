#include "maelm/rank_analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"
#include "maelm/svd.hpp"

namespace maelm {

int effective_rank_from_squares(const std::vector<double>& squares_desc, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("tau must lie in (0,1]");
    double total = 0.0;
    for (double s : squares_desc) total += s;
    if (total <= 0.0) throw RankError("effective rank of a zero matrix is undefined");
    double cum = 0.0;
    // The 1e-12 relative guard keeps exact-tie cases (equal singular values)
    // stable against last-bit rounding in the eigenvalue path.
    const double goal = tau * total - 1e-12 * total;
    for (std::size_t k = 0; k < squares_desc.size(); ++k) {
        cum += squares_desc[k];
        if (cum >= goal) return static_cast<int>(k + 1);
    }
    return static_cast<int>(squares_desc.size());
}

int effective_rank(const Tensor& h, double tau) {
    std::vector<double> sv = singular_values(h);
    std::vector<double> squares(sv.size());
    for (std::size_t i = 0; i < sv.size(); ++i) squares[i] = sv[i] * sv[i];
    return effective_rank_from_squares(squares, tau);
}

ResidualDecomposition residual_decompose(const Tensor& h) {
    if (h.ndim() != 2 || h.rows() < 1) {
        throw ContractError("residual_decompose: expected a nonempty 2-d tensor, got " +
                            h.shape_str());
    }
    const std::size_t n = h.rows(), d = h.cols();
    ResidualDecomposition out;
    out.center = Tensor({d});
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += h.at2(i, j);
        out.center(j) = s / static_cast<double>(n);
    }
    out.residual = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.residual.at2(i, j) = h.at2(i, j) - out.center(j);
    out.l1 = norm_l1(out.residual);
    out.linf = norm_linf(out.residual);
    out.composite = std::sqrt(out.l1 * out.linf);
    return out;
}

GramPool::GramPool(std::size_t dim) : dim_(dim), gram_({dim, dim}) {}

void GramPool::add_rows(const Tensor& rows) {
    if (rows.ndim() != 2 || rows.cols() != dim_) {
        throw DimensionError("GramPool: expected rows of width " + std::to_string(dim_) +
                             ", got " + rows.shape_str());
    }
    const std::size_t n = rows.rows();
    for (std::size_t t = 0; t < n; ++t) {
        const double* r = rows.raw() + t * dim_;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double ri = r[i];
            double* gi = gram_.raw() + i * dim_;
            for (std::size_t j = 0; j < dim_; ++j) gi[j] += ri * r[j];
        }
    }
    tokens_ += n;
}

int GramPool::rank_tau(double tau) const {
    if (tokens_ < dim_) {
        throw RankError("insufficient sample: " + std::to_string(tokens_) + " pooled tokens for " +
                        std::to_string(dim_) + " dimensions");
    }
    std::vector<double> eig = symmetric_eigenvalues(gram_);
    for (double& e : eig) e = std::max(0.0, e);  // squared singular values
    return effective_rank_from_squares(eig, tau);
}

void RankReport::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write rank report: " + path);
    out << "layer,config,tau,rank,tokens\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.tau);
        out << r.layer << "," << r.config << "," << buf << "," << r.rank << "," << r.tokens << "\n";
    }
}

std::vector<Var> encoder_activations(const std::vector<int>& tokens, const MaskPlan& plan,
                                     const ModelParameters& params, const ModelConfig& config,
                                     EncoderInputs* inputs_out) {
    EncoderInputs inputs = build_encoder_inputs(tokens, plan, params, config);
    const RelativePositionBias* bias = config.use_relative_bias ? &params.rel_bias : nullptr;
    auto acts = encoder_stack_forward(inputs.h0, params.encoder, inputs.positions, bias, {});
    if (inputs_out != nullptr) *inputs_out = std::move(inputs);
    return acts;
}

namespace {

MaskPlan empty_plan(std::size_t n) {
    MaskPlan plan;
    plan.seq_len = n;
    return plan;
}

std::uint64_t row_mask_seed(std::uint64_t base, std::size_t batch, std::size_t row) {
    return Rng::derive(base, (static_cast<std::uint64_t>(batch) << 24) ^ row);
}

}  // namespace

RankReport rank_gap_report(const ModelParameters& mlm_params, const ModelConfig& mlm_config,
                           const ModelParameters& mae_params, const ModelConfig& mae_config,
                           const std::vector<Batch>& batches, double tau,
                           std::uint64_t mask_seed) {
    const std::size_t layers = mlm_config.enc_layers;
    if (mae_config.enc_layers != layers || mae_config.dim != mlm_config.dim) {
        throw ContractError("rank gap report expects encoders of equal depth and width");
    }
    std::vector<GramPool> masked_pool(layers + 1, GramPool(mlm_config.dim));
    std::vector<GramPool> unmasked_pool(layers + 1, GramPool(mlm_config.dim));
    std::vector<GramPool> mae_pool(layers + 1, GramPool(mae_config.dim));

    ModelConfig mlm_view = mlm_config;  // encoder view of the MLM model with masks present
    mlm_view.mask_mode = MaskMode::Include;
    ModelConfig mae_view = mae_config;
    mae_view.mask_mode = MaskMode::Exclude;

    for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch& batch = batches[b];
        for (std::size_t r = 0; r < batch.rows; ++r) {
            std::vector<int> row = batch.row_vec(r);
            const std::uint64_t seed = row_mask_seed(mask_seed, b, r);
            MaskPlan masked = delta_split(uniform_mask(row, kMaskRate, seed), 0.0, seed + 1);

            auto acts_masked = encoder_activations(row, masked, mlm_params, mlm_view);
            for (std::size_t l = 0; l <= layers; ++l)
                masked_pool[l].add_rows(val(acts_masked[l]));

            auto acts_plain = encoder_activations(row, empty_plan(row.size()), mlm_params, mlm_view);
            for (std::size_t l = 0; l <= layers; ++l)
                unmasked_pool[l].add_rows(val(acts_plain[l]));

            auto acts_mae = encoder_activations(row, masked, mae_params, mae_view);
            for (std::size_t l = 0; l <= layers; ++l)
                mae_pool[l].add_rows(val(acts_mae[l]));
        }
    }

    RankReport report;
    for (std::size_t l = 0; l <= layers; ++l) {
        report.rows.push_back({l, "MLM w. [MASK]", tau, masked_pool[l].rank_tau(tau),
                               masked_pool[l].tokens()});
        report.rows.push_back({l, "MLM w/o. [MASK]", tau, unmasked_pool[l].rank_tau(tau),
                               unmasked_pool[l].tokens()});
        report.rows.push_back({l, "MAE-LM", tau, mae_pool[l].rank_tau(tau), mae_pool[l].tokens()});
    }
    return report;
}

RankReport lemma1_report(const ModelParameters& mlm_params, const ModelConfig& mlm_config,
                         const std::vector<Batch>& batches, double tau, std::uint64_t mask_seed) {
    const std::size_t layers = mlm_config.enc_layers;
    std::vector<GramPool> mask_rows_pool(layers + 1, GramPool(mlm_config.dim));
    GramPool position_pool(mlm_config.dim);

    ModelConfig view = mlm_config;
    view.mask_mode = MaskMode::Include;

    for (std::size_t b = 0; b < batches.size(); ++b) {
        const Batch& batch = batches[b];
        for (std::size_t r = 0; r < batch.rows; ++r) {
            std::vector<int> row = batch.row_vec(r);
            const std::uint64_t seed = row_mask_seed(mask_seed, b, r);
            MaskPlan masked = delta_split(uniform_mask(row, kMaskRate, seed), 0.0, seed + 1);

            EncoderInputs inputs;
            auto acts = encoder_activations(row, masked, mlm_params, view, &inputs);
            std::vector<std::size_t> mask_row_ids;
            for (std::size_t i = 0; i < inputs.row_is_mask.size(); ++i)
                if (inputs.row_is_mask[i]) mask_row_ids.push_back(i);
            if (mask_row_ids.empty()) continue;

            for (std::size_t l = 0; l <= layers; ++l) {
                const Tensor& h = val(acts[l]);
                Tensor rows({mask_row_ids.size(), mlm_config.dim});
                for (std::size_t k = 0; k < mask_row_ids.size(); ++k)
                    std::copy_n(h.raw() + mask_row_ids[k] * mlm_config.dim, mlm_config.dim,
                                rows.raw() + k * mlm_config.dim);
                mask_rows_pool[l].add_rows(rows);
            }

            const Tensor& pos_table = val(mlm_params.embed.positions);
            Tensor pos_rows({mask_row_ids.size(), mlm_config.dim});
            for (std::size_t k = 0; k < mask_row_ids.size(); ++k) {
                const std::size_t pos = inputs.positions[mask_row_ids[k]];
                std::copy_n(pos_table.raw() + pos * mlm_config.dim, mlm_config.dim,
                            pos_rows.raw() + k * mlm_config.dim);
            }
            position_pool.add_rows(pos_rows);
        }
    }

    RankReport report;
    for (std::size_t l = 0; l <= layers; ++l) {
        report.rows.push_back({l, "MLM [MASK] rows", tau, mask_rows_pool[l].rank_tau(tau),
                               mask_rows_pool[l].tokens()});
    }
    report.rows.push_back({0, "positions at M", tau, position_pool.rank_tau(tau),
                           position_pool.tokens()});
    return report;
}

}  // namespace maelm
