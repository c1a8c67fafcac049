#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctxnav/errors.hpp"

namespace ctxnav {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff core.
//
// Tensors are shared handles to a node in a dynamically built computation
// graph.  Every op records its parents plus a backward closure; backward()
// runs the closures in reverse topological order and harvests the gradients
// of parameter leaves (identified by their slot id) into a GradSink.
//
// Storage is always double, row-major, contiguous.  A thread-local precision
// mode can round every op result through binary32, which emulates a 32-bit
// pipeline while keeping one code path; gradient checking is only meaningful
// in the default 64-bit mode.
// ---------------------------------------------------------------------------

enum class Precision { f64, f32 };

Precision get_precision();
void set_precision(Precision p);

bool grad_enabled();

// RAII guard that disables graph construction on this thread (cheap forward
// passes for evaluation / finite differences).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();

  private:
    bool prev_;
};

// Per-parameter gradient accumulation buffers, keyed by parameter slot.
// Using one sink per worker and reducing them in a fixed order keeps training
// bitwise deterministic regardless of how work is scheduled.
struct GradSink {
    std::vector<std::vector<double>> slots;

    void ensure(int slot, size_t n) {
        if (slot >= static_cast<int>(slots.size())) slots.resize(slot + 1);
        if (slots[slot].size() != n) slots[slot].assign(n, 0.0);
    }
    std::vector<double>& buf(int slot) { return slots[slot]; }
    void reset() {
        for (auto& s : slots) std::fill(s.begin(), s.end(), 0.0);
    }
    void scale(double k) {
        for (auto& s : slots)
            for (double& x : s) x *= k;
    }
    // a += b, slot-wise.
    void add_from(const GradSink& other);
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> v;  // values
    std::vector<double> g;  // gradient, sized lazily during backward()
    bool requires_grad = false;
    int param_slot = -1;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        return n;
    }
    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), 0.0);
    }
};

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[i]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    size_t numel() const { return impl_->numel(); }

    std::span<double> data() { return {impl_->v.data(), impl_->v.size()}; }
    std::span<const double> data() const { return {impl_->v.data(), impl_->v.size()}; }
    std::span<const double> grad() const { return {impl_->g.data(), impl_->g.size()}; }

    double item() const;  // NotScalarError unless numel() == 1

    // Rank-2 element access (row, col).
    double& at(int r, int c) { return impl_->v[static_cast<size_t>(r) * impl_->shape[1] + c]; }
    double at(int r, int c) const { return impl_->v[static_cast<size_t>(r) * impl_->shape[1] + c]; }

    Tensor& set_requires_grad(bool b) {
        impl_->requires_grad = b;
        return *this;
    }
    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_param_slot(int slot) {
        impl_->param_slot = slot;
        impl_->requires_grad = true;
        return *this;
    }
    int param_slot() const { return impl_ ? impl_->param_slot : -1; }

    // Copy of the values with no graph history.
    Tensor detach() const;

    std::shared_ptr<TensorImpl>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

    static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
        Tensor t;
        t.impl_ = std::move(impl);
        return t;
    }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

// Runs reverse-mode accumulation from a scalar loss.  Gradients of every
// reachable leaf with a parameter slot are added into `sink`; all transient
// grad buffers (including the leaves') are cleared before returning.
void backward(const Tensor& loss, GradSink& sink);

// --- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);          // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                        // [m,n] -> [n,m]
Tensor add(const Tensor& a, const Tensor& b);             // same shape
Tensor sub(const Tensor& a, const Tensor& b);             // same shape
Tensor mul(const Tensor& a, const Tensor& b);             // elementwise, same shape
Tensor add_rowvec(const Tensor& m, const Tensor& v);      // [r,c] + [1,c]
Tensor mul_rowvec(const Tensor& m, const Tensor& v);      // [r,c] * [1,c]
Tensor scale(const Tensor& a, double k);
Tensor concat(std::span<const Tensor> parts, int axis);   // rank-2, axis 0 or 1
inline Tensor concat(std::initializer_list<Tensor> parts, int axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}
Tensor narrow(const Tensor& a, int axis, int start, int len);  // rank-2 slice (copy)
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);                // rank-2, rows/cols sum to 1
Tensor embedding(const Tensor& table, std::span<const int> ids);  // [V,E] -> [n,E]

// 2-D convolution over a [H,W,Cin] map with kernel [Cout,kh,kw,Cin], zero
// padding `pad` on all sides, stride 1 -> [H+2p-kh+1, W+2p-kw+1, Cout].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);

// Places row i of `vals` ([n,C]) at flat cell cells[i] of a d x d map
// -> [d,d,C].  Rows that share a cell are summed.
Tensor scatter_rows(const Tensor& vals, std::span<const int> cells, int d);

Tensor sum_all(const Tensor& a);                          // -> [1]
Tensor mean_rows(const Tensor& a);                        // [r,c] -> [1,c]

// Sum over rows of -log softmax(logits)[target].  `targets` has one class id
// per row of `logits`.
Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets);

// Extension point for fused ops defined outside this translation unit: wraps
// precomputed forward values in a graph node.  The backward closure is kept
// only while grad mode is on and some parent requires grad; it must guard on
// each parent's requires_grad and call ensure_grad before accumulating, like
// the built-in ops do.  Values pass through the active precision mode.
Tensor make_op_node(std::vector<int> shape, std::vector<double> values,
                    std::vector<std::shared_ptr<TensorImpl>> parents,
                    std::function<void(TensorImpl&)> backward_fn);

}  // namespace ctxnav
