#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace maelm {

// Dense row-major tensor of 64-bit reals. Everything downstream (layers,
// analysis, training) is built on this one carrier; no views, no strides.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);
    // 2-d convenience: rows given as nested initializer lists.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::initializer_list<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    std::span<const double> data() const { return values_; }
    std::span<double> data() { return values_; }
    const double* raw() const { return values_.data(); }
    double* raw() { return values_.data(); }

    double operator()(std::size_t i) const { return values_[i]; }
    double& operator()(std::size_t i) { return values_[i]; }
    double at2(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
    double& at2(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;
    static std::string shape_str(const std::vector<std::size_t>& shape);

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

// ---- shape helpers -------------------------------------------------------

// Throws DimensionError naming both shapes unless they match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// ---- pure numeric kernels ------------------------------------------------
// These are the value-level operations; the autodiff layer wraps them.

// Standard matrix product a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m×k] · b[n×k]^T, used where the transpose would otherwise be materialized.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a[k×m]^T · b[k×n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& m);

// Row-stable softmax: per-row max subtraction, each output row sums to 1.
Tensor softmax_rows(const Tensor& x);

// Normalizes the last axis to mean 0 / variance 1 (population variance,
// floored by eps), then applies gain and bias. Requires last axis >= 2.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Exact Gaussian-error-function GELU, x * Phi(x).
Tensor gelu(const Tensor& x);
double gelu_scalar(double x);

// Mean over i in `positions` of -log softmax(logits_i)[targets_i].
// `targets` holds one token id per entry of `positions`.
double cross_entropy_masked(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<std::size_t>& positions);

// ---- elementwise / reduction helpers --------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double frobenius_norm(const Tensor& m);
double max_abs(const Tensor& m);

// Induced matrix norms on 2-d tensors.
double norm_l1(const Tensor& m);    // max column absolute sum
double norm_linf(const Tensor& m);  // max row absolute sum
// Geometric mean of the two induced norms.
double norm_composite(const Tensor& m);

}  // namespace maelm
