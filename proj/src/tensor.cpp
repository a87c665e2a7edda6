#include "nob/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "nob/errors.hpp"

namespace nob::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap as_mat(const Node& n) { return CMap(n.val.data(), n.shape[0], n.shape[1]); }
CMap grad_mat(const Node& n) { return CMap(n.grad.data(), n.shape[0], n.shape[1]); }
MMap as_grad(Node& n) {
    n.ensure_grad();
    return MMap(n.grad.data(), n.shape[0], n.shape[1]);
}

// Accumulating in value order makes the sum invariant to any permutation of
// the addends, which is what the symmetry guarantees of the pooling and
// attention paths rely on.
double ordered_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

void require_2d(const Value& v, const char* who) {
    if (v->shape.size() != 2) throw ShapeError(std::string(who) + ": expected 2-d tensor, got " + shape_str(v->shape));
}

void require_same_shape(const Value& a, const Value& b, const char* who) {
    if (a->shape != b->shape)
        throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
}

Value make(Shape shape, std::vector<double> vals, std::vector<Value> parents,
           std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val = std::move(vals);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

// Accumulate g into parent's grad buffer if it participates in autodiff.
void acc(const Value& p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    p->grad_seen = true;
}

}  // namespace

std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Act act_from_string(const std::string& tag) {
    if (tag == "relu") return Act::Relu;
    if (tag == "gelu") return Act::Gelu;
    if (tag == "tanh") return Act::Tanh;
    if (tag == "sin") return Act::Sin;
    if (tag == "sigmoid") return Act::Sigmoid;
    if (tag == "identity") return Act::Identity;
    throw ConfigError("unknown activation tag: " + tag);
}

std::string act_to_string(Act a) {
    switch (a) {
        case Act::Relu: return "relu";
        case Act::Gelu: return "gelu";
        case Act::Tanh: return "tanh";
        case Act::Sin: return "sin";
        case Act::Sigmoid: return "sigmoid";
        case Act::Identity: return "identity";
    }
    return "?";
}

Value constant(Shape shape, std::vector<double> vals) {
    if (numel(shape) != static_cast<std::int64_t>(vals.size()))
        throw ShapeError("constant: " + shape_str(shape) + " does not match " + std::to_string(vals.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val = std::move(vals);
    return n;
}

Value scalar(double v) { return constant({1}, {v}); }

Value zeros(Shape shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val.assign(static_cast<std::size_t>(numel(shape)), 0.0);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return n;
}

Value leaf(Shape shape, std::vector<double> vals) {
    auto n = constant(std::move(shape), std::move(vals));
    n->requires_grad = true;
    return n;
}

Value add(const Value& a, const Value& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a->val.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->val[i] + b->val[i];
    return make(a->shape, std::move(v), {a, b}, [](Node& n) {
        acc(n.parents[0], n.grad);
        acc(n.parents[1], n.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a->val.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->val[i] - b->val[i];
    return make(a->shape, std::move(v), {a, b}, [](Node& n) {
        acc(n.parents[0], n.grad);
        if (n.parents[1]->requires_grad) {
            auto& p = n.parents[1];
            p->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] -= n.grad[i];
            p->grad_seen = true;
        }
    });
}

Value mul(const Value& a, const Value& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a->val.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->val[i] * b->val[i];
    return make(a->shape, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i] * b->val[i];
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) b->grad[i] += n.grad[i] * a->val[i];
            b->grad_seen = true;
        }
    });
}

Value scale(const Value& a, double c) {
    std::vector<double> v(a->val.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->val[i] * c;
    return make(a->shape, std::move(v), {a}, [c](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i] * c;
        a->grad_seen = true;
    });
}

namespace {
double act_fwd(double x, Act a) {
    switch (a) {
        case Act::Relu: return x > 0.0 ? x : 0.0;
        case Act::Gelu: return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
        case Act::Tanh: return std::tanh(x);
        case Act::Sin: return std::sin(x);
        case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Act::Identity: return x;
    }
    return x;
}
double act_bwd(double x, double y, Act a) {
    switch (a) {
        case Act::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Act::Gelu:
            return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
                   x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        case Act::Tanh: return 1.0 - y * y;
        case Act::Sin: return std::cos(x);
        case Act::Sigmoid: return y * (1.0 - y);
        case Act::Identity: return 1.0;
    }
    return 1.0;
}
}  // namespace

Value activation(const Value& a, Act act) {
    if (act == Act::Identity) return a;
    std::vector<double> v(a->val.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = act_fwd(a->val[i], act);
    return make(a->shape, std::move(v), {a}, [act](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            a->grad[i] += n.grad[i] * act_bwd(a->val[i], n.val[i], act);
        a->grad_seen = true;
    });
}

Value add_rowvec(const Value& x, const Value& b) {
    require_2d(x, "add_rowvec");
    if (b->shape.size() != 2 || b->shape[0] != 1 || b->shape[1] != x->shape[1])
        throw ShapeError("add_rowvec: bias " + shape_str(b->shape) + " does not broadcast over " + shape_str(x->shape));
    const int rows = x->shape[0], cols = x->shape[1];
    std::vector<double> v(x->val.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) v[r * cols + c] = x->val[r * cols + c] + b->val[c];
    return make(x->shape, std::move(v), {x, b}, [rows, cols](Node& n) {
        acc(n.parents[0], n.grad);
        const auto& b = n.parents[1];
        if (!b->requires_grad) return;
        b->ensure_grad();
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) b->grad[c] += n.grad[r * cols + c];
        b->grad_seen = true;
    });
}

Value scale_rows(const Value& x, const Value& s) {
    require_2d(x, "scale_rows");
    if (s->shape.size() != 2 || s->shape[0] != x->shape[0] || s->shape[1] != 1)
        throw ShapeError("scale_rows: scale " + shape_str(s->shape) + " does not match rows of " + shape_str(x->shape));
    const int rows = x->shape[0], cols = x->shape[1];
    std::vector<double> v(x->val.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) v[r * cols + c] = x->val[r * cols + c] * s->val[r];
    return make(x->shape, std::move(v), {x, s}, [rows, cols](Node& n) {
        const auto& x = n.parents[0];
        const auto& s = n.parents[1];
        if (x->requires_grad) {
            x->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) x->grad[r * cols + c] += n.grad[r * cols + c] * s->val[r];
            x->grad_seen = true;
        }
        if (s->requires_grad) {
            s->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int c = 0; c < cols; ++c) acc += n.grad[r * cols + c] * x->val[r * cols + c];
                s->grad[r] += acc;
            }
            s->grad_seen = true;
        }
    });
}

Value div_rows(const Value& x, const Value& s) {
    require_2d(x, "div_rows");
    if (s->shape.size() != 2 || s->shape[0] != x->shape[0] || s->shape[1] != 1)
        throw ShapeError("div_rows: denominator " + shape_str(s->shape) + " does not match rows of " + shape_str(x->shape));
    const int rows = x->shape[0], cols = x->shape[1];
    std::vector<double> v(x->val.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) v[r * cols + c] = x->val[r * cols + c] / s->val[r];
    return make(x->shape, std::move(v), {x, s}, [rows, cols](Node& n) {
        const auto& x = n.parents[0];
        const auto& s = n.parents[1];
        if (x->requires_grad) {
            x->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) x->grad[r * cols + c] += n.grad[r * cols + c] / s->val[r];
            x->grad_seen = true;
        }
        if (s->requires_grad) {
            s->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int c = 0; c < cols; ++c) acc += n.grad[r * cols + c] * n.val[r * cols + c];
                s->grad[r] -= acc / s->val[r];
            }
            s->grad_seen = true;
        }
    });
}

Value matmul(const Value& a, const Value& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a->shape[1] != b->shape[0])
        throw ShapeError("matmul: inner dims differ, " + shape_str(a->shape) + " x " + shape_str(b->shape));
    const int n = a->shape[0], m = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(n) * m);
    // row-at-a-time keeps each output row bitwise independent of row order,
    // which the permutation-symmetry guarantees rely on (blocked GEMM is not)
    MMap out(v.data(), n, m);
    for (int r = 0; r < n; ++r) out.row(r).noalias() = as_mat(*a).row(r) * as_mat(*b);
    return make({n, m}, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            as_grad(*a).noalias() += grad_mat(n) * as_mat(*b).transpose();
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            as_grad(*b).noalias() += as_mat(*a).transpose() * grad_mat(n);
            b->grad_seen = true;
        }
    });
}

Value matmul_nt(const Value& a, const Value& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    if (a->shape[1] != b->shape[1])
        throw ShapeError("matmul_nt: inner dims differ, " + shape_str(a->shape) + " x " + shape_str(b->shape) + "^T");
    const int n = a->shape[0], m = b->shape[0];
    std::vector<double> v(static_cast<std::size_t>(n) * m);
    // per-row products for the same reason as matmul
    MMap out(v.data(), n, m);
    for (int r = 0; r < n; ++r) out.row(r).noalias() = as_mat(*a).row(r) * as_mat(*b).transpose();
    return make({n, m}, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            as_grad(*a).noalias() += grad_mat(n) * as_mat(*b);
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            as_grad(*b).noalias() += grad_mat(n).transpose() * as_mat(*a);
            b->grad_seen = true;
        }
    });
}

Value matmul_stable(const Value& a, const Value& b) {
    require_2d(a, "matmul_stable");
    require_2d(b, "matmul_stable");
    if (a->shape[1] != b->shape[0])
        throw ShapeError("matmul_stable: inner dims differ, " + shape_str(a->shape) + " x " + shape_str(b->shape));
    const int n = a->shape[0], k = a->shape[1], m = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(n) * m);
    std::vector<double> terms(static_cast<std::size_t>(k));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) {
            for (int i = 0; i < k; ++i)
                terms[static_cast<std::size_t>(i)] = a->val[static_cast<std::size_t>(r) * k + i] *
                                                     b->val[static_cast<std::size_t>(i) * m + c];
            v[static_cast<std::size_t>(r) * m + c] = ordered_sum(terms);
        }
    return make({n, m}, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            as_grad(*a).noalias() += grad_mat(n) * as_mat(*b).transpose();
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            as_grad(*b).noalias() += as_mat(*a).transpose() * grad_mat(n);
            b->grad_seen = true;
        }
    });
}

Value matmul_tn(const Value& a, const Value& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    if (a->shape[0] != b->shape[0])
        throw ShapeError("matmul_tn: outer dims differ, " + shape_str(a->shape) + "^T x " + shape_str(b->shape));
    const int k = a->shape[1], m = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(k) * m);
    MMap(v.data(), k, m).noalias() = as_mat(*a).transpose() * as_mat(*b);
    return make({k, m}, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            as_grad(*a).noalias() += as_mat(*b) * grad_mat(n).transpose();
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            as_grad(*b).noalias() += as_mat(*a) * grad_mat(n);
            b->grad_seen = true;
        }
    });
}

Value matmul_tn_stable(const Value& a, const Value& b) {
    require_2d(a, "matmul_tn_stable");
    require_2d(b, "matmul_tn_stable");
    if (a->shape[0] != b->shape[0])
        throw ShapeError("matmul_tn_stable: outer dims differ, " + shape_str(a->shape) + "^T x " + shape_str(b->shape));
    const int n = a->shape[0], k = a->shape[1], m = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(k) * m);
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < m; ++c) {
            for (int i = 0; i < n; ++i)
                terms[static_cast<std::size_t>(i)] = a->val[static_cast<std::size_t>(i) * k + r] *
                                                     b->val[static_cast<std::size_t>(i) * m + c];
            v[static_cast<std::size_t>(r) * m + c] = ordered_sum(terms);
        }
    return make({k, m}, std::move(v), {a, b}, [](Node& n) {
        const auto& a = n.parents[0];
        const auto& b = n.parents[1];
        if (a->requires_grad) {
            as_grad(*a).noalias() += as_mat(*b) * grad_mat(n).transpose();
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            as_grad(*b).noalias() += as_mat(*a) * grad_mat(n);
            b->grad_seen = true;
        }
    });
}

Value transpose2d(const Value& a) {
    require_2d(a, "transpose2d");
    const int n = a->shape[0], m = a->shape[1];
    std::vector<double> v(a->val.size());
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) v[c * n + r] = a->val[r * m + c];
    return make({m, n}, std::move(v), {a}, [n, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) a->grad[r * m + c] += nd.grad[c * n + r];
        a->grad_seen = true;
    });
}

Value reshape(const Value& a, Shape shape) {
    if (numel(shape) != a->size())
        throw ShapeError("reshape: " + shape_str(a->shape) + " -> " + shape_str(shape) + " changes element count");
    return make(std::move(shape), a->val, {a}, [](Node& n) { acc(n.parents[0], n.grad); });
}

Value concat_cols(const Value& a, const Value& b) {
    require_2d(a, "concat_cols");
    require_2d(b, "concat_cols");
    if (a->shape[0] != b->shape[0])
        throw ShapeError("concat_cols: row counts differ, " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const int n = a->shape[0], ma = a->shape[1], mb = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(n) * (ma + mb));
    for (int r = 0; r < n; ++r) {
        std::copy_n(&a->val[static_cast<std::size_t>(r) * ma], ma, &v[static_cast<std::size_t>(r) * (ma + mb)]);
        std::copy_n(&b->val[static_cast<std::size_t>(r) * mb], mb, &v[static_cast<std::size_t>(r) * (ma + mb) + ma]);
    }
    return make({n, ma + mb}, std::move(v), {a, b}, [n, ma, mb](Node& nd) {
        const auto& a = nd.parents[0];
        const auto& b = nd.parents[1];
        if (a->requires_grad) {
            a->ensure_grad();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < ma; ++c) a->grad[r * ma + c] += nd.grad[r * (ma + mb) + c];
            a->grad_seen = true;
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < mb; ++c) b->grad[r * mb + c] += nd.grad[r * (ma + mb) + ma + c];
            b->grad_seen = true;
        }
    });
}

Value slice_rows(const Value& a, int r0, int r1) {
    require_2d(a, "slice_rows");
    if (r0 < 0 || r1 > a->shape[0] || r0 >= r1)
        throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") out of " + shape_str(a->shape));
    const int m = a->shape[1];
    std::vector<double> v(a->val.begin() + static_cast<std::size_t>(r0) * m,
                          a->val.begin() + static_cast<std::size_t>(r1) * m);
    return make({r1 - r0, m}, std::move(v), {a}, [r0, m](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) a->grad[static_cast<std::size_t>(r0) * m + i] += n.grad[i];
        a->grad_seen = true;
    });
}

Value gather_rows(const Value& a, std::vector<int> idx) {
    require_2d(a, "gather_rows");
    const int m = a->shape[1];
    for (int i : idx)
        if (i < 0 || i >= a->shape[0]) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " + shape_str(a->shape));
    std::vector<double> v(idx.size() * static_cast<std::size_t>(m));
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(&a->val[static_cast<std::size_t>(idx[r]) * m], m, &v[r * m]);
    auto shared_idx = std::make_shared<std::vector<int>>(std::move(idx));
    return make({static_cast<int>(shared_idx->size()), m}, std::move(v), {a}, [shared_idx, m](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t r = 0; r < shared_idx->size(); ++r)
            for (int c = 0; c < m; ++c) a->grad[static_cast<std::size_t>((*shared_idx)[r]) * m + c] += n.grad[r * m + c];
        a->grad_seen = true;
    });
}

Value scatter_add_rows(const Value& a, std::vector<int> dst, int n_rows) {
    require_2d(a, "scatter_add_rows");
    if (static_cast<int>(dst.size()) != a->shape[0])
        throw ShapeError("scatter_add_rows: " + std::to_string(dst.size()) + " destinations for " + shape_str(a->shape));
    const int m = a->shape[1];
    for (int i : dst)
        if (i < 0 || i >= n_rows) throw ShapeError("scatter_add_rows: destination " + std::to_string(i) + " out of range");
    std::vector<double> v(static_cast<std::size_t>(n_rows) * m, 0.0);
    std::vector<std::vector<double>> bucket(static_cast<std::size_t>(n_rows));
    for (int c = 0; c < m; ++c) {
        for (auto& b : bucket) b.clear();
        for (std::size_t r = 0; r < dst.size(); ++r)
            bucket[static_cast<std::size_t>(dst[r])].push_back(a->val[r * m + c]);
        for (int i = 0; i < n_rows; ++i)
            if (!bucket[static_cast<std::size_t>(i)].empty())
                v[static_cast<std::size_t>(i) * m + c] = ordered_sum(bucket[static_cast<std::size_t>(i)]);
    }
    auto shared_dst = std::make_shared<std::vector<int>>(std::move(dst));
    return make({n_rows, m}, std::move(v), {a}, [shared_dst, m](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t r = 0; r < shared_dst->size(); ++r)
            for (int c = 0; c < m; ++c) a->grad[r * m + c] += n.grad[static_cast<std::size_t>((*shared_dst)[r]) * m + c];
        a->grad_seen = true;
    });
}

Value repeat_row(const Value& a, int n) {
    require_2d(a, "repeat_row");
    if (a->shape[0] != 1) throw ShapeError("repeat_row: expected [1,m], got " + shape_str(a->shape));
    const int m = a->shape[1];
    std::vector<double> v(static_cast<std::size_t>(n) * m);
    for (int r = 0; r < n; ++r) std::copy_n(a->val.data(), m, &v[static_cast<std::size_t>(r) * m]);
    return make({n, m}, std::move(v), {a}, [n, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) a->grad[c] += nd.grad[r * m + c];
        a->grad_seen = true;
    });
}

Value sparse_apply(const Value& x, std::shared_ptr<const SparseMap> map) {
    require_2d(x, "sparse_apply");
    if (x->shape[0] != map->in_rows)
        throw ShapeError("sparse_apply: map expects " + std::to_string(map->in_rows) + " rows, got " + shape_str(x->shape));
    const int m = x->shape[1];
    std::vector<double> v(static_cast<std::size_t>(map->out_rows) * m, 0.0);
    for (std::size_t e = 0; e < map->w.size(); ++e) {
        const double w = map->w[e];
        const double* src = &x->val[static_cast<std::size_t>(map->in_idx[e]) * m];
        double* dst = &v[static_cast<std::size_t>(map->out_idx[e]) * m];
        for (int c = 0; c < m; ++c) dst[c] += w * src[c];
    }
    return make({map->out_rows, m}, std::move(v), {x}, [map, m](Node& n) {
        const auto& x = n.parents[0];
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t e = 0; e < map->w.size(); ++e) {
            const double w = map->w[e];
            const double* src = &n.grad[static_cast<std::size_t>(map->out_idx[e]) * m];
            double* dst = &x->grad[static_cast<std::size_t>(map->in_idx[e]) * m];
            for (int c = 0; c < m; ++c) dst[c] += w * src[c];
        }
        x->grad_seen = true;
    });
}

Value sum_all(const Value& a) {
    double s = 0.0;
    for (double v : a->val) s += v;
    return make({1}, {s}, {a}, [](Node& n) {
        const auto& a = n.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (double& g : a->grad) g += n.grad[0];
        a->grad_seen = true;
    });
}

Value mean_all(const Value& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a->size())); }

Value sum_rows(const Value& a) {
    require_2d(a, "sum_rows");
    const int n = a->shape[0], m = a->shape[1];
    std::vector<double> v(m, 0.0);
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (int c = 0; c < m; ++c) {
        for (int r = 0; r < n; ++r) terms[static_cast<std::size_t>(r)] = a->val[static_cast<std::size_t>(r) * m + c];
        v[static_cast<std::size_t>(c)] = ordered_sum(terms);
    }
    return make({1, m}, std::move(v), {a}, [n, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) a->grad[r * m + c] += nd.grad[c];
        a->grad_seen = true;
    });
}

Value sum_cols(const Value& a) {
    require_2d(a, "sum_cols");
    const int n = a->shape[0], m = a->shape[1];
    std::vector<double> v(n, 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) v[r] += a->val[r * m + c];
    return make({n, 1}, std::move(v), {a}, [n, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) a->grad[r * m + c] += nd.grad[r];
        a->grad_seen = true;
    });
}

Value mean_rows(const Value& a) { return scale(sum_rows(a), 1.0 / static_cast<double>(a->shape[0])); }

Value max_rows(const Value& a) {
    require_2d(a, "max_rows");
    const int n = a->shape[0], m = a->shape[1];
    std::vector<double> v(m);
    auto arg = std::make_shared<std::vector<int>>(m, 0);
    for (int c = 0; c < m; ++c) {
        double best = a->val[c];
        int bi = 0;
        for (int r = 1; r < n; ++r) {
            if (a->val[r * m + c] > best) {
                best = a->val[r * m + c];
                bi = r;
            }
        }
        v[c] = best;
        (*arg)[c] = bi;
    }
    return make({1, m}, std::move(v), {a}, [arg, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int c = 0; c < m; ++c) a->grad[(*arg)[c] * m + c] += nd.grad[c];
        a->grad_seen = true;
    });
}

Value softmax(const Value& a, int axis) {
    require_2d(a, "softmax");
    if (axis == 0) return transpose2d(softmax(transpose2d(a), 1));
    if (axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    const int n = a->shape[0], m = a->shape[1];
    std::vector<double> v(a->val.size());
    std::vector<double> terms(static_cast<std::size_t>(m));
    for (int r = 0; r < n; ++r) {
        const double* x = &a->val[static_cast<std::size_t>(r) * m];
        double* y = &v[static_cast<std::size_t>(r) * m];
        double mx = x[0];
        for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
        for (int c = 0; c < m; ++c) {
            y[c] = std::exp(x[c] - mx);
            terms[static_cast<std::size_t>(c)] = y[c];
        }
        const double s = ordered_sum(terms);
        for (int c = 0; c < m; ++c) y[c] /= s;
    }
    return make(a->shape, std::move(v), {a}, [n, m](Node& nd) {
        const auto& a = nd.parents[0];
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int r = 0; r < n; ++r) {
            const double* y = &nd.val[static_cast<std::size_t>(r) * m];
            const double* g = &nd.grad[static_cast<std::size_t>(r) * m];
            double dot = 0.0;
            for (int c = 0; c < m; ++c) dot += y[c] * g[c];
            for (int c = 0; c < m; ++c) a->grad[static_cast<std::size_t>(r) * m + c] += y[c] * (g[c] - dot);
        }
        a->grad_seen = true;
    });
}

void backward(const Value& loss) {
    if (loss->size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss->shape));
    // topological order via iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    loss->grad_seen = true;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_seen) n->backprop(*n);
    }
}

}  // namespace nob::ad
