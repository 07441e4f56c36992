#pragma once

// Test-only oracles, deliberately independent of the library's numeric
// paths: a classical (largest-off-diagonal-pivot) Jacobi eigensolver for
// Gram-matrix singular values, and central finite differences for
// gradients.

#include <functional>
#include <vector>

#include "maelm/autodiff.hpp"
#include "maelm/rng.hpp"
#include "maelm/tensor.hpp"

namespace oracle {

// Eigenvalues of a symmetric matrix (descending) via classical Jacobi with
// max-pivot selection.
std::vector<double> jacobi_eigenvalues(const std::vector<double>& sym, std::size_t n);

// Singular values of an r×c matrix through the Gram matrix eigenvalues.
std::vector<double> gram_singular_values(const maelm::Tensor& m);

// Brute-force effective rank over the Gram eigenvalues.
int effective_rank(const maelm::Tensor& m, double tau);

// Central finite-difference gradient of a scalar function of one leaf
// tensor, step 1e-5.
maelm::Tensor finite_difference(const std::function<double(const maelm::Tensor&)>& f,
                                const maelm::Tensor& at, double step = 1e-5);

// Largest relative error between an analytic gradient and the finite
// difference oracle, with |.| + 1e-8 in the denominator.
double gradient_max_rel_error(const maelm::Tensor& analytic, const maelm::Tensor& numeric);

maelm::Tensor random_tensor(maelm::Rng& rng, std::vector<std::size_t> shape, double scale = 1.0);

}  // namespace oracle
