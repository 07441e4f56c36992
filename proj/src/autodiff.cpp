#include "maelm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "maelm/errors.hpp"

namespace maelm {

void Node::accumulate(const Tensor& g) {
    if (!has_grad()) {
        grad = g;
        return;
    }
    require_same_shape(grad, g, "gradient accumulate");
    for (std::size_t i = 0; i < grad.size(); ++i) grad(i) += g(i);
}

Var constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = false;
    return n;
}

Var parameter(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    return n;
}

static Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool need = false;
    for (const auto& p : parents) need = need || p->requires_grad;
    n->requires_grad = need;
    if (need) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

Var matmul(const Var& a, const Var& b) {
    Tensor out = matmul(a->value, b->value);
    Var pa = a, pb = b;
    return make_op(std::move(out), {a, b}, [pa, pb](Node& n) {
        if (pa->requires_grad) pa->accumulate(matmul_nt(n.grad, pb->value));
        if (pb->requires_grad) pb->accumulate(matmul_tn(pa->value, n.grad));
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    Tensor out = matmul_nt(a->value, b->value);
    Var pa = a, pb = b;
    return make_op(std::move(out), {a, b}, [pa, pb](Node& n) {
        if (pa->requires_grad) pa->accumulate(matmul(n.grad, pb->value));
        if (pb->requires_grad) pb->accumulate(matmul_tn(n.grad, pa->value));
    });
}

Var add(const Var& a, const Var& b) {
    Tensor out = add(a->value, b->value);
    Var pa = a, pb = b;
    return make_op(std::move(out), {a, b}, [pa, pb](Node& n) {
        if (pa->requires_grad) pa->accumulate(n.grad);
        if (pb->requires_grad) pb->accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    Tensor out = sub(a->value, b->value);
    Var pa = a, pb = b;
    return make_op(std::move(out), {a, b}, [pa, pb](Node& n) {
        if (pa->requires_grad) pa->accumulate(n.grad);
        if (pb->requires_grad) pb->accumulate(scale(n.grad, -1.0));
    });
}

Var mul(const Var& a, const Var& b) {
    Tensor out = mul(a->value, b->value);
    Var pa = a, pb = b;
    return make_op(std::move(out), {a, b}, [pa, pb](Node& n) {
        if (pa->requires_grad) pa->accumulate(mul(n.grad, pb->value));
        if (pb->requires_grad) pb->accumulate(mul(n.grad, pa->value));
    });
}

Var scale(const Var& a, double s) {
    Tensor out = scale(a->value, s);
    Var pa = a;
    return make_op(std::move(out), {a}, [pa, s](Node& n) {
        if (pa->requires_grad) pa->accumulate(scale(n.grad, s));
    });
}

Var add_row_broadcast(const Var& x, const Var& row) {
    const Tensor& xv = x->value;
    const Tensor& rv = row->value;
    const std::size_t d = xv.shape().back();
    if (rv.size() != d) {
        throw DimensionError("add_row_broadcast: row " + rv.shape_str() + " vs last axis " +
                             std::to_string(d));
    }
    Tensor out(xv.shape());
    const std::size_t rows = xv.size() / d;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i * d + j) = xv(i * d + j) + rv(j);
    Var px = x, pr = row;
    return make_op(std::move(out), {x, row}, [px, pr, rows, d](Node& n) {
        if (px->requires_grad) px->accumulate(n.grad);
        if (pr->requires_grad) {
            Tensor g(pr->value.shape());
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < d; ++j) g(j) += n.grad(i * d + j);
            pr->accumulate(g);
        }
    });
}

Var add_constant(const Var& x, const Tensor& c) {
    Tensor out = add(x->value, c);
    Var px = x;
    return make_op(std::move(out), {x}, [px](Node& n) {
        if (px->requires_grad) px->accumulate(n.grad);
    });
}

Var softmax_rows(const Var& x) {
    Tensor out = softmax_rows(x->value);
    Var px = x;
    return make_op(std::move(out), {x}, [px](Node& n) {
        if (!px->requires_grad) return;
        const Tensor& y = n.value;
        const std::size_t m = y.rows(), k = y.cols();
        Tensor g({m, k});
        for (std::size_t i = 0; i < m; ++i) {
            const double* yi = y.raw() + i * k;
            const double* di = n.grad.raw() + i * k;
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += di[j] * yi[j];
            double* gi = g.raw() + i * k;
            for (std::size_t j = 0; j < k; ++j) gi[j] = yi[j] * (di[j] - dot);
        }
        px->accumulate(g);
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    Tensor out = layer_norm(x->value, gain->value, bias->value, eps);
    Var px = x, pg = gain, pb = bias;
    const std::size_t d = x->value.shape().back();
    const std::size_t rows = x->value.size() / d;
    // Normalized activations are recomputed in the backward pass from the input.
    return make_op(std::move(out), {x, gain, bias}, [px, pg, pb, d, rows, eps](Node& n) {
        const Tensor& xv = px->value;
        Tensor gx(xv.shape());
        Tensor gg(pg->value.shape());
        Tensor gb(pb->value.shape());
        for (std::size_t i = 0; i < rows; ++i) {
            const double* xi = xv.raw() + i * d;
            const double* di = n.grad.raw() + i * d;
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
            // dxhat = dy * gain; dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat ⊙ xhat))
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double xh = (xi[j] - mean) * inv;
                const double dxh = di[j] * pg->value(j);
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xh;
                gg(j) += di[j] * xh;
                gb(j) += di[j];
            }
            mean_dxh /= static_cast<double>(d);
            mean_dxh_xh /= static_cast<double>(d);
            double* gxi = gx.raw() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double xh = (xi[j] - mean) * inv;
                const double dxh = di[j] * pg->value(j);
                gxi[j] = inv * (dxh - mean_dxh - xh * mean_dxh_xh);
            }
        }
        if (px->requires_grad) px->accumulate(gx);
        if (pg->requires_grad) pg->accumulate(gg);
        if (pb->requires_grad) pb->accumulate(gb);
    });
}

Var gelu(const Var& x) {
    Tensor out = gelu(x->value);
    Var px = x;
    return make_op(std::move(out), {x}, [px](Node& n) {
        if (!px->requires_grad) return;
        const Tensor& xv = px->value;
        Tensor g(xv.shape());
        constexpr double inv_sqrt2 = 0.7071067811865476;
        constexpr double inv_sqrt2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double v = xv(i);
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            g(i) = n.grad(i) * (cdf + v * pdf);
        }
        px->accumulate(g);
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x->value.size(); ++i) s += x->value(i);
    Var px = x;
    return make_op(Tensor({1}, {s}), {x}, [px](Node& n) {
        if (!px->requires_grad) return;
        px->accumulate(Tensor::full(px->value.shape(), n.grad(0)));
    });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    const Tensor& tv = table->value;
    const std::size_t d = tv.cols();
    Tensor out({ids.size(), d});
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const std::size_t r = static_cast<std::size_t>(ids[t]);
        if (r >= tv.rows()) {
            throw ContractError("gather_rows: id " + std::to_string(ids[t]) + " outside table of " +
                                std::to_string(tv.rows()) + " rows");
        }
        std::copy_n(tv.raw() + r * d, d, out.raw() + t * d);
    }
    Var pt = table;
    return make_op(std::move(out), {table}, [pt, ids, d](Node& n) {
        if (!pt->requires_grad) return;
        Tensor g(pt->value.shape());
        for (std::size_t t = 0; t < ids.size(); ++t) {
            double* row = g.raw() + static_cast<std::size_t>(ids[t]) * d;
            const double* src = n.grad.raw() + t * d;
            for (std::size_t j = 0; j < d; ++j) row[j] += src[j];
        }
        pt->accumulate(g);
    });
}

Var select_rows(const Var& x, const std::vector<std::size_t>& rows) {
    const Tensor& xv = x->value;
    const std::size_t d = xv.cols();
    Tensor out({rows.size(), d});
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t] >= xv.rows()) {
            throw ContractError("select_rows: row " + std::to_string(rows[t]) + " outside " +
                                std::to_string(xv.rows()));
        }
        std::copy_n(xv.raw() + rows[t] * d, d, out.raw() + t * d);
    }
    Var px = x;
    return make_op(std::move(out), {x}, [px, rows, d](Node& n) {
        if (!px->requires_grad) return;
        Tensor g(px->value.shape());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            double* dst = g.raw() + rows[t] * d;
            const double* src = n.grad.raw() + t * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        px->accumulate(g);
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t n = parts[0]->value.rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != n) {
            throw DimensionError("concat_cols: row count mismatch " + p->value.shape_str());
        }
        total += p->value.cols();
    }
    Tensor out({n, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t c = p->value.cols();
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(p->value.raw() + i * c, c, out.raw() + i * total + off);
        off += c;
    }
    std::vector<Var> ps = parts;
    return make_op(std::move(out), parts, [ps, n, total](Node& nd) {
        std::size_t off = 0;
        for (const auto& p : ps) {
            const std::size_t c = p->value.cols();
            if (p->requires_grad) {
                Tensor g({n, c});
                for (std::size_t i = 0; i < n; ++i)
                    std::copy_n(nd.grad.raw() + i * total + off, c, g.raw() + i * c);
                p->accumulate(g);
            }
            off += c;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t c = parts[0]->value.cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != c) {
            throw DimensionError("concat_rows: column count mismatch " + p->value.shape_str());
        }
        total += p->value.rows();
    }
    Tensor out({total, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy_n(p->value.raw(), p->value.size(), out.raw() + off * c);
        off += p->value.rows();
    }
    std::vector<Var> ps = parts;
    return make_op(std::move(out), parts, [ps, c](Node& nd) {
        std::size_t off = 0;
        for (const auto& p : ps) {
            const std::size_t r = p->value.rows();
            if (p->requires_grad) {
                Tensor g({r, c});
                std::copy_n(nd.grad.raw() + off * c, r * c, g.raw());
                p->accumulate(g);
            }
            off += r;
        }
    });
}

Var gather_bucket_bias(const Var& table, const std::vector<int>& buckets,
                       std::size_t n, std::size_t m, std::size_t head) {
    if (buckets.size() != n * m) throw ContractError("gather_bucket_bias: bucket index count mismatch");
    const Tensor& tv = table->value;
    const std::size_t heads = tv.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < n * m; ++i)
        out(i) = tv(static_cast<std::size_t>(buckets[i]) * heads + head);
    Var pt = table;
    return make_op(std::move(out), {table}, [pt, buckets, heads, head](Node& nd) {
        if (!pt->requires_grad) return;
        Tensor g(pt->value.shape());
        for (std::size_t i = 0; i < buckets.size(); ++i)
            g(static_cast<std::size_t>(buckets[i]) * heads + head) += nd.grad(i);
        pt->accumulate(g);
    });
}

Var dropout(const Var& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ContractError("dropout: rate must be below 1");
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask(x->value.shape());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask(i) = (rng.next_double() >= rate) ? keep_scale : 0.0;
    Tensor out = mul(x->value, mask);
    Var px = x;
    return make_op(std::move(out), {x}, [px, mask](Node& n) {
        if (px->requires_grad) px->accumulate(mul(n.grad, mask));
    });
}

Var cross_entropy_masked(const Var& logits, const std::vector<int>& targets,
                         const std::vector<std::size_t>& positions) {
    double loss = cross_entropy_masked(logits->value, targets, positions);
    Var pl = logits;
    return make_op(Tensor({1}, {loss}), {logits}, [pl, targets, positions](Node& n) {
        if (!pl->requires_grad) return;
        const Tensor& lv = pl->value;
        const std::size_t v = lv.cols();
        const double w = n.grad(0) / static_cast<double>(positions.size());
        Tensor g(lv.shape());
        for (std::size_t t = 0; t < positions.size(); ++t) {
            const std::size_t i = positions[t];
            const double* row = lv.raw() + i * v;
            double mx = row[0];
            for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
            double z = 0.0;
            for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
            double* gi = g.raw() + i * v;
            for (std::size_t j = 0; j < v; ++j) gi[j] += w * (std::exp(row[j] - mx) / z);
            gi[targets[t]] -= w;
        }
        pl->accumulate(g);
    });
}

void backward(const Var& root, double seed) {
    if (!root) throw ContractError("backward: null root");
    if (root->value.size() != 1) {
        throw ContractError("backward: root must be scalar, got shape " + root->value.shape_str());
    }
    if (!root->requires_grad) return;  // nothing reachable requires gradients

    // Depth-first post-order over the requires-grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->accumulate(Tensor({1}, {seed}));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backprop && node->has_grad()) node->backprop(*node);
    }
}

}  // namespace maelm
