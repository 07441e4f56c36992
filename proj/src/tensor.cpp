#include "maelm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maelm/errors.hpp"

namespace maelm {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    values_.assign(n, 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    if (n != values_.size()) {
        throw DimensionError("tensor value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), v);
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> vals;
    vals.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix initializer");
        vals.insert(vals.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(vals));
}

Tensor Tensor::row(std::initializer_list<double> values) {
    return Tensor({std::size_t(1), values.size()}, std::vector<double>(values));
}

bool Tensor::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
    }
}

static void require_2d(const Tensor& m, const char* op) {
    if (m.ndim() != 2) throw DimensionError(std::string(op) + ": expected 2-d tensor, got " + m.shape_str());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() +
                             " vs " + b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    const double* pa = a.raw();
    const double* pb = b.raw();
    double* pc = c.raw();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + a.shape_str() +
                             " vs " + b.shape_str() + "^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.raw() + i * k;
        double* crow = c.raw() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.raw() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = s;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: inner dimensions disagree, " + a.shape_str() +
                             "^T vs " + b.shape_str());
    }
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Tensor c({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a.raw() + p * m;
        const double* brow = b.raw() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c.raw() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& m) {
    require_2d(m, "transpose");
    Tensor t({m.cols(), m.rows()});
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t.at2(j, i) = m.at2(i, j);
    return t;
}

Tensor softmax_rows(const Tensor& x) {
    require_2d(x, "softmax_rows");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.raw() + i * n;
        double* oi = out.raw() + i * n;
        double mx = xi[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            oi[j] = std::exp(xi[j] - mx);
            z += oi[j];
        }
        for (std::size_t j = 0; j < n; ++j) oi[j] /= z;
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t d = x.shape().back();
    if (d < 2) throw DimensionError("layer_norm: degenerate last axis of size " + std::to_string(d));
    if (gain.size() != d || bias.size() != d) {
        throw DimensionError("layer_norm: affine parameter size mismatch, gain " + gain.shape_str() +
                             " bias " + bias.shape_str() + " vs last axis " + std::to_string(d));
    }
    Tensor out(x.shape());
    const std::size_t rows = x.size() / d;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = x.raw() + i * d;
        double* oi = out.raw() + i * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j)
            oi[j] = (xi[j] - mean) * inv * gain(j) + bias(j);
    }
    return out;
}

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = gelu_scalar(x(i));
    return out;
}

double cross_entropy_masked(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<std::size_t>& positions) {
    require_2d(logits, "cross_entropy_masked");
    if (positions.empty()) throw EmptyMaskError("cross_entropy_masked: empty masked-position set");
    if (targets.size() != positions.size()) {
        throw ContractError("cross_entropy_masked: " + std::to_string(targets.size()) +
                            " targets for " + std::to_string(positions.size()) + " positions");
    }
    const std::size_t n = logits.rows(), v = logits.cols();
    double total = 0.0;
    for (std::size_t t = 0; t < positions.size(); ++t) {
        const std::size_t i = positions[t];
        if (i >= n) throw ContractError("cross_entropy_masked: position " + std::to_string(i) +
                                        " outside " + std::to_string(n) + " rows");
        const double* row = logits.raw() + i * v;
        double mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        total += std::log(z) + mx - row[targets[t]];
    }
    return total / static_cast<double>(positions.size());
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) + b(i);
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) - b(i);
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) * b(i);
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) * s;
    return out;
}

double frobenius_norm(const Tensor& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m(i) * m(i);
    return std::sqrt(s);
}

double max_abs(const Tensor& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s = std::max(s, std::abs(m(i)));
    return s;
}

double norm_l1(const Tensor& m) {
    require_2d(m, "norm_l1");
    double best = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m.at2(i, j));
        best = std::max(best, s);
    }
    return best;
}

double norm_linf(const Tensor& m) {
    require_2d(m, "norm_linf");
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += std::abs(m.at2(i, j));
        best = std::max(best, s);
    }
    return best;
}

double norm_composite(const Tensor& m) { return std::sqrt(norm_l1(m) * norm_linf(m)); }

}  // namespace maelm
