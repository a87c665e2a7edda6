#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace nob::ad {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

enum class Act { Relu, Gelu, Tanh, Sin, Sigmoid, Identity };

Act act_from_string(const std::string& tag);
std::string act_to_string(Act a);

// One node of the dynamically built computation graph. Values are dense
// row-major f64. Gradients are allocated lazily on first accumulation.
struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;
    bool requires_grad = false;
    bool grad_seen = false;  // set once backward (or a test) populated grad
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    std::int64_t size() const { return static_cast<std::int64_t>(val.size()); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
    int rows() const { return shape.size() == 2 ? shape[0] : 0; }
    int cols() const { return shape.size() == 2 ? shape[1] : 0; }
};

using Value = std::shared_ptr<Node>;

Value constant(Shape shape, std::vector<double> vals);
Value scalar(double v);
Value zeros(Shape shape, bool requires_grad = false);
// A leaf parameter node: gradients accumulate across backward calls.
Value leaf(Shape shape, std::vector<double> vals);

// ---- elementwise / broadcast ----
Value add(const Value& a, const Value& b);          // same shape
Value sub(const Value& a, const Value& b);          // same shape
Value mul(const Value& a, const Value& b);          // same shape, elementwise
Value scale(const Value& a, double c);
Value activation(const Value& a, Act act);
Value add_rowvec(const Value& x, const Value& b);   // x [n,m] + b [1,m] broadcast over rows
Value scale_rows(const Value& x, const Value& s);   // row i of x [n,m] times s [n,1]
Value div_rows(const Value& x, const Value& s);     // row i of x [n,m] divided by s [n,1]

// ---- linear algebra ----
Value matmul(const Value& a, const Value& b);       // [n,k] x [k,m]
Value matmul_nt(const Value& a, const Value& b);    // [n,k] x [m,k]^T -> [n,m]
Value matmul_tn(const Value& a, const Value& b);    // [k,n]^T ... a [n,k], b [n,m] -> a^T b [k,m]
// Same products, but inner sums accumulate in value order so the result is
// invariant to permutations of the contracted axis (attention and pooling).
Value matmul_stable(const Value& a, const Value& b);
Value matmul_tn_stable(const Value& a, const Value& b);
Value transpose2d(const Value& a);

// ---- structure ----
Value reshape(const Value& a, Shape shape);
Value concat_cols(const Value& a, const Value& b);
Value slice_rows(const Value& a, int r0, int r1);
Value gather_rows(const Value& a, std::vector<int> idx);
Value scatter_add_rows(const Value& a, std::vector<int> dst, int n_rows);
Value repeat_row(const Value& a, int n);            // a [1,m] -> [n,m]

// Sparse linear map over feature rows: out[r] += w * in[c] for each entry.
struct SparseMap {
    int in_rows = 0;
    int out_rows = 0;
    std::vector<int> out_idx;
    std::vector<int> in_idx;
    std::vector<double> w;
};
Value sparse_apply(const Value& x, std::shared_ptr<const SparseMap> map);

// ---- reductions ----
Value sum_all(const Value& a);                      // -> [1]
Value mean_all(const Value& a);                     // -> [1]
Value sum_rows(const Value& a);                     // [n,m] -> [1,m], sum over rows
Value sum_cols(const Value& a);                     // [n,m] -> [n,1], sum over columns
Value mean_rows(const Value& a);                    // [n,m] -> [1,m]
Value max_rows(const Value& a);                     // [n,m] -> [1,m], max over rows

// ---- softmax ----
// axis = 1: softmax along each row (last axis); axis = 0: along each column.
Value softmax(const Value& a, int axis);

// ---- 3D convolution ----
enum class Padding { Same, Valid };
// x [Ci,X,Y,Z], w [Co,Ci,kx,ky,kz], b [Co]; cross-correlation semantics.
Value conv3(const Value& x, const Value& w, const Value& b, int stride, Padding pad);

// ---- spectral channel mixing (Fourier layer core) ----
// x is [N,C] with N = nx*ny*nz row-major nodes. r_re/r_im are [K*C*C] leaves
// holding per-retained-mode complex mixing matrices. Retained modes are the
// low-frequency set: an axis index k is kept when k < m or n-k < m.
struct ModeSet {
    std::array<int, 3> extents;
    std::array<int, 3> modes;
    std::vector<std::array<int, 3>> kept;  // flattened retained (kx,ky,kz)
};
ModeSet make_mode_set(std::array<int, 3> extents, std::array<int, 3> modes);
Value spectral_mix(const Value& x, const Value& r_re, const Value& r_im,
                   std::shared_ptr<const ModeSet> modes);

// ---- autodiff driver ----
// Seeds d(loss)/d(loss) = 1 and runs reverse sweep; loss must be a scalar.
void backward(const Value& loss);

}  // namespace nob::ad
