#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maelm/rank_analysis.hpp"
#include "maelm/tensor.hpp"

namespace maelm {

// A constructed single-head self-attention instance for the residual-bound
// verification: real-token representations H_R, a row-sum-1 mixing matrix U
// expressing the mask rows as combinations of real rows, and the head
// weights. H_M is always built as U·H_R.
struct TheoremInstance {
    Tensor h_r;  // [n×d]
    Tensor u;    // [m×n], U·1 = 1
    Tensor h_m;  // [m×d], must equal U·H_R
    Tensor wq, wk, wv, wo;  // [d×d] each

    Tensor wqk() const;  // W^Q W^K^T / sqrt(d)
    Tensor wvo() const;  // W^V W^O
    void validate() const;
};

// Seeded instance; when `auto_scale_regime` is set, the query weights are
// rescaled so the attention-logit spread stays inside the Taylor-step
// validity region.
TheoremInstance make_theorem_instance(std::uint64_t seed, std::size_t n, std::size_t m,
                                      std::size_t d, double weight_scale, double h_scale,
                                      bool auto_scale_regime = true);

// Every intermediate named by the residual-bound derivation.
struct TheoremTrace {
    Tensor s_rr;      // exp[H_R Wqk H_R^T]
    Tensor s_rm;      // exp[H_R Wqk H_M^T]
    Tensor z;         // row sums of [S_RR | S_RM], diagonal as a vector
    Tensor a_r;       // attention rows of the real tokens, [n×(n+m)]
    Tensor f;         // R Wqk R^T
    Tensor f_prime;   // R Wqk R^T U^T
    Tensor f_tilde;   // [F | F']
    Tensor g;         // h^T Wqk R^T
    Tensor g_prime;   // h^T Wqk R^T U^T
    Tensor c;         // R Wqk h + 1 (h^T Wqk h)
    Tensor d_spread;  // per-row max-min spread of F~
    Tensor r_mix;     // (exp g + exp g' U) / g+
    Tensor h_prime;   // constructed h': r^T R Wvo + h^T Wvo
    double epsilon = 0.0;
    double input_composite = 0.0;
    double output_composite = 0.0;
    double bound_rhs = 0.0;  // 4 eps ||R||^3
    double max_spread = 0.0;

    std::string to_json() const;
};

struct TheoremStepResult {
    TheoremTrace trace;
    bool in_regime = false;
    bool norm_bound_holds = false;
    bool sandwich_holds = false;
    bool holds = false;  // norm bound and sandwich together
    Tensor h_r_next;     // H'_R
    Tensor residual_next;  // R' = H'_R - 1 h'^T
};

// The epsilon constant: ||Wqk||_1 · ||Wvo||_{1,∞} · ||U||_∞ · (1 + ||U||_∞).
double compute_epsilon(const TheoremInstance& inst);

// Runs one self-attention layer over [H_R; H_M] and checks the single-step
// residual bound ||R'||_{1,∞} <= 4 eps ||R||_{1,∞}^3 together with the
// elementwise bound |R'_ij| <= [2 D 1 r^T |R Wvo|]_ij that the norm chain
// rests on. The regime flag reports whether every row spread of F~ stays
// within the exp(x) <= 1+2x validity region.
TheoremStepResult verify_theorem_step(const TheoremInstance& inst,
                                      const ResidualDecomposition& decomp);

struct TheoremDepthResult {
    bool bound_holds = false;
    bool strictly_decreasing = false;
    bool all_in_regime = false;
    bool all_steps_hold = false;
    double eps_bar = 0.0;
    std::vector<double> composite_norms;  // ||R^0|| .. ||R^L||
};

// Iterates verify_theorem_step through a chain of layers. The first layer's
// H_R comes from chain[0]; each later layer reuses the previous output H'_R
// with its own (U, weights), re-deriving H_M = U·H_R exactly, and the
// residual is taken against the constructed h' chain rather than
// re-minimizing.
TheoremDepthResult verify_theorem_depth(std::vector<TheoremInstance> chain);

// Seeded chain whose scales are chosen so that 4·eps_bar·||R^0||^2 equals
// `contraction_target` (< 1 forces strictly decreasing residual norms).
std::vector<TheoremInstance> make_theorem_chain(std::uint64_t seed, std::size_t layers,
                                                std::size_t n, std::size_t m, std::size_t d,
                                                double contraction_target = 0.25);

}  // namespace maelm
