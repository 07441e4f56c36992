#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "maelm/rng.hpp"
#include "maelm/tensor.hpp"

namespace maelm {

// Reverse-mode tape. A forward pass builds a DAG of Nodes; backward() walks
// it once in reverse topological order. Nodes only reference their parents,
// so dropping the root releases the whole graph while leaf parameters
// (held elsewhere) survive with their accumulated gradients.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation; empty means "no gradient yet"
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pushes this->grad into parents

    bool has_grad() const { return grad.size() > 0; }
    void accumulate(const Tensor& g);
};

using Var = std::shared_ptr<Node>;

// Leaves.
Var constant(Tensor v);
Var parameter(Tensor v);

inline const Tensor& val(const Var& v) { return v->value; }

// Graph operations. Gradients flow to every parent that requires them.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a · b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_row_broadcast(const Var& x, const Var& row);    // [n×d] + [d]
Var add_constant(const Var& x, const Tensor& c);        // graph + fixed tensor
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
Var gelu(const Var& x);
Var sum(const Var& x);  // scalar
Var gather_rows(const Var& table, const std::vector<int>& ids);
Var select_rows(const Var& x, const std::vector<std::size_t>& rows);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
// Bias lookup for one attention head: out[i][j] = table(buckets[i*m+j], head).
Var gather_bucket_bias(const Var& table, const std::vector<int>& buckets,
                       std::size_t n, std::size_t m, std::size_t head);
// Inverted dropout; draws one uniform per element from `rng`.
Var dropout(const Var& x, double rate, Rng& rng);
// Mean over `positions` of -log softmax(logits_i)[targets_i]; scalar output.
Var cross_entropy_masked(const Var& logits, const std::vector<int>& targets,
                         const std::vector<std::size_t>& positions);

// Reverse pass from a scalar root; `seed` is the root's incoming gradient.
// Gradients accumulate across calls until cleared, which is what batch
// accumulation over per-sequence graphs relies on.
void backward(const Var& root, double seed = 1.0);

}  // namespace maelm
