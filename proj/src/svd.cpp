#include "maelm/svd.hpp"

#include <algorithm>
#include <cmath>

#include "maelm/errors.hpp"

namespace maelm {

// One cyclic Jacobi pass zeroes every off-diagonal pair (p, q) in turn;
// repeated sweeps drive the off-diagonal mass to zero quadratically.
std::vector<double> symmetric_eigenvalues(const Tensor& sym) {
    if (sym.ndim() != 2 || sym.rows() != sym.cols()) {
        throw DimensionError("symmetric_eigenvalues: expected square matrix, got " + sym.shape_str());
    }
    const std::size_t n = sym.rows();
    std::vector<double> a(sym.data().begin(), sym.data().end());
    auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(at(i, j)));
    const double tol = (scale > 0.0 ? scale : 1.0) * 1e-14;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(at(p, q)));
        if (off <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double app = at(p, p), aqq = at(q, q);
                at(p, p) = app - t * apq;
                at(q, q) = aqq + t * apq;
                at(p, q) = 0.0;
                at(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = at(r, p), arq = at(r, q);
                    at(r, p) = arp - s * (arq + tau * arp);
                    at(p, r) = at(r, p);
                    at(r, q) = arq + s * (arp - tau * arq);
                    at(q, r) = at(r, q);
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

std::vector<double> singular_values(const Tensor& m) {
    if (m.ndim() != 2) throw DimensionError("singular_values: expected 2-d tensor, got " + m.shape_str());
    const std::size_t r = m.rows(), c = m.cols();
    // Work with the smaller Gram matrix.
    Tensor gram = (c <= r) ? matmul_tn(m, m) : matmul_nt(m, m);
    std::vector<double> eig = symmetric_eigenvalues(gram);
    std::vector<double> sv(eig.size());
    for (std::size_t i = 0; i < eig.size(); ++i) sv[i] = std::sqrt(std::max(0.0, eig[i]));
    return sv;
}

}  // namespace maelm
