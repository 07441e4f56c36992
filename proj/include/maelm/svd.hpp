#pragma once

#include <vector>

#include "maelm/tensor.hpp"

namespace maelm {

// Singular values of m[r×c], sorted descending, length min(r, c).
// Computed as square roots of the eigenvalues of the smaller Gram matrix
// via cyclic Jacobi sweeps; singular vectors are never formed.
std::vector<double> singular_values(const Tensor& m);

// Eigenvalues of a symmetric matrix, descending. Exposed for reuse by the
// rank analysis, which accumulates Gram matrices incrementally.
std::vector<double> symmetric_eigenvalues(const Tensor& sym);

}  // namespace maelm
