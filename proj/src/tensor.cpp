#include "ctxnav/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ctxnav {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

namespace {

thread_local Precision g_precision = Precision::f64;
thread_local bool g_grad_enabled = true;

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->v.assign(impl->numel(), 0.0);
    return impl;
}

// Rounds every value through binary32 when the 32-bit mode is active, so the
// whole pipeline behaves like a float32 implementation while storage stays
// uniform.
void finalize(TensorImpl& impl) {
    if (g_precision == Precision::f32)
        for (double& x : impl.v) x = static_cast<double>(static_cast<float>(x));
}

void attach(const std::shared_ptr<TensorImpl>& out,
            std::vector<std::shared_ptr<TensorImpl>> parents,
            std::function<void(TensorImpl&)> fn) {
    bool any = false;
    if (g_grad_enabled)
        for (const auto& p : parents)
            if (p->requires_grad) { any = true; break; }
    if (!any) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + " expects rank 2, got " +
                                        shape_str(t.shape()));
}

}  // namespace

Precision get_precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }
bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void GradSink::add_from(const GradSink& other) {
    if (slots.size() < other.slots.size()) slots.resize(other.slots.size());
    for (size_t i = 0; i < other.slots.size(); ++i) {
        const auto& src = other.slots[i];
        if (src.empty()) continue;
        auto& dst = slots[i];
        if (dst.size() != src.size()) dst.assign(src.size(), 0.0);
        for (size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
}

// --- Tensor basics ---

Tensor Tensor::zeros(std::vector<int> shape) { return wrap(make_impl(std::move(shape))); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    auto impl = make_impl(std::move(shape));
    std::fill(impl->v.begin(), impl->v.end(), value);
    return wrap(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    auto impl = make_impl(std::move(shape));
    if (values.size() != impl->v.size())
        throw ShapeError("from: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(impl->shape));
    impl->v = std::move(values);
    return wrap(std::move(impl));
}

double Tensor::item() const {
    if (!impl_ || impl_->numel() != 1)
        throw NotScalarError(impl_ ? shape_str(impl_->shape) : "<empty>");
    return impl_->v[0];
}

Tensor Tensor::detach() const {
    auto impl = make_impl(impl_->shape);
    impl->v = impl_->v;
    return wrap(std::move(impl));
}

// --- backward ---

void backward(const Tensor& loss, GradSink& sink) {
    if (loss.numel() != 1) throw NotScalarError("backward needs a scalar loss, got " +
                                                shape_str(loss.shape()));
    TensorImpl* root = loss.impl().get();

    // Post-order DFS for a topological ordering.
    std::vector<TensorImpl*> topo;
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorImpl* p = node->parents[idx++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->g[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backward_fn && !node->g.empty()) node->backward_fn(*node);
    }
    for (TensorImpl* node : topo) {
        if (node->param_slot >= 0 && !node->g.empty()) {
            sink.ensure(node->param_slot, node->v.size());
            auto& dst = sink.buf(node->param_slot);
            for (size_t i = 0; i < dst.size(); ++i) dst[i] += node->g[i];
        }
        node->g.clear();
        node->g.shrink_to_fit();
    }
}

// --- ops ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    auto out = make_impl({m, n});
    MapConst A(a.data().data(), m, k), B(b.data().data(), k, n);
    MapMat(out->v.data(), m, n).noalias() = A * B;
    finalize(*out);
    auto pa = a.impl(), pb = b.impl();
    attach(out, {pa, pb}, [pa, pb, m, k, n](TensorImpl& self) {
        MapConst G(self.g.data(), m, n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            MapConst B(pb->v.data(), k, n);
            MapMat(pa->g.data(), m, k).noalias() += G * B.transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            MapConst A(pa->v.data(), m, k);
            MapMat(pb->g.data(), k, n).noalias() += A.transpose() * G;
        }
    });
    return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    int m = a.dim(0), n = a.dim(1);
    auto out = make_impl({n, m});
    MapConst A(a.data().data(), m, n);
    MapMat(out->v.data(), n, m) = A.transpose();
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, m, n](TensorImpl& self) {
        pa->ensure_grad();
        MapConst G(self.g.data(), n, m);
        MapMat(pa->g.data(), m, n) += G.transpose();
    });
    return Tensor::wrap(out);
}

namespace {

enum class EwKind { add, sub, mul };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(name) + ": " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    auto out = make_impl(a.shape());
    size_t n = out->v.size();
    const double* av = a.data().data();
    const double* bv = b.data().data();
    double* ov = out->v.data();
    switch (kind) {
        case EwKind::add: for (size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i]; break;
        case EwKind::sub: for (size_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i]; break;
        case EwKind::mul: for (size_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i]; break;
    }
    finalize(*out);
    auto pa = a.impl(), pb = b.impl();
    attach(out, {pa, pb}, [pa, pb, kind](TensorImpl& self) {
        size_t n = self.g.size();
        const double* g = self.g.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            double* ga = pa->g.data();
            if (kind == EwKind::mul) {
                const double* bv = pb->v.data();
                for (size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
            } else {
                for (size_t i = 0; i < n; ++i) ga[i] += g[i];
            }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            double* gb = pb->g.data();
            switch (kind) {
                case EwKind::add: for (size_t i = 0; i < n; ++i) gb[i] += g[i]; break;
                case EwKind::sub: for (size_t i = 0; i < n; ++i) gb[i] -= g[i]; break;
                case EwKind::mul: {
                    const double* av = pa->v.data();
                    for (size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
                    break;
                }
            }
        }
    });
    return Tensor::wrap(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::mul, "mul"); }

namespace {

Tensor rowvec_op(const Tensor& m, const Tensor& v, bool is_mul, const char* name) {
    check_rank2(m, name);
    check_rank2(v, name);
    if (v.dim(0) != 1 || v.dim(1) != m.dim(1))
        throw ShapeError(std::string(name) + ": " + shape_str(m.shape()) + " with row vector " +
                         shape_str(v.shape()));
    int r = m.dim(0), c = m.dim(1);
    auto out = make_impl({r, c});
    const double* mv = m.data().data();
    const double* vv = v.data().data();
    double* ov = out->v.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            ov[i * c + j] = is_mul ? mv[i * c + j] * vv[j] : mv[i * c + j] + vv[j];
    finalize(*out);
    auto pm = m.impl(), pv = v.impl();
    attach(out, {pm, pv}, [pm, pv, r, c, is_mul](TensorImpl& self) {
        const double* g = self.g.data();
        if (pm->requires_grad) {
            pm->ensure_grad();
            double* gm = pm->g.data();
            if (is_mul) {
                const double* vv = pv->v.data();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gm[i * c + j] += g[i * c + j] * vv[j];
            } else {
                for (int i = 0; i < r * c; ++i) gm[i] += g[i];
            }
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            double* gv = pv->g.data();
            if (is_mul) {
                const double* mv = pm->v.data();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[j] += g[i * c + j] * mv[i * c + j];
            } else {
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[j] += g[i * c + j];
            }
        }
    });
    return Tensor::wrap(out);
}

}  // namespace

Tensor add_rowvec(const Tensor& m, const Tensor& v) { return rowvec_op(m, v, false, "add_rowvec"); }
Tensor mul_rowvec(const Tensor& m, const Tensor& v) { return rowvec_op(m, v, true, "mul_rowvec"); }

Tensor scale(const Tensor& a, double k) {
    auto out = make_impl(a.shape());
    const double* av = a.data().data();
    for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = av[i] * k;
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, k](TensorImpl& self) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pa->g[i] += self.g[i] * k;
    });
    return Tensor::wrap(out);
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
    for (const Tensor& p : parts) check_rank2(p, "concat");
    int fixed = parts[0].dim(1 - axis);
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.dim(1 - axis) != fixed)
            throw ShapeError("concat: mismatched shape " + shape_str(p.shape()));
        total += p.dim(axis);
    }
    int rows = axis == 0 ? total : fixed;
    int cols = axis == 0 ? fixed : total;
    auto out = make_impl({rows, cols});
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::vector<int> offsets;
    int off = 0;
    for (const Tensor& p : parts) {
        int pr = p.dim(0), pc = p.dim(1);
        const double* pv = p.data().data();
        if (axis == 0) {
            std::copy(pv, pv + static_cast<size_t>(pr) * pc,
                      out->v.data() + static_cast<size_t>(off) * cols);
        } else {
            for (int i = 0; i < pr; ++i)
                std::copy(pv + static_cast<size_t>(i) * pc, pv + static_cast<size_t>(i + 1) * pc,
                          out->v.data() + static_cast<size_t>(i) * cols + off);
        }
        parents.push_back(p.impl());
        offsets.push_back(off);
        off += p.dim(axis);
    }
    finalize(*out);
    auto parents_copy = parents;
    attach(out, std::move(parents),
           [parents = std::move(parents_copy), offsets, axis, cols](TensorImpl& self) {
               const double* g = self.g.data();
               for (size_t pi = 0; pi < parents.size(); ++pi) {
                   auto& p = parents[pi];
                   if (!p->requires_grad) continue;
                   p->ensure_grad();
                   int pr = p->shape[0], pc = p->shape[1];
                   int off = offsets[pi];
                   if (axis == 0) {
                       for (int i = 0; i < pr * pc; ++i)
                           p->g[i] += g[static_cast<size_t>(off) * cols + i];
                   } else {
                       for (int i = 0; i < pr; ++i)
                           for (int j = 0; j < pc; ++j)
                               p->g[static_cast<size_t>(i) * pc + j] +=
                                   g[static_cast<size_t>(i) * cols + off + j];
                   }
               }
           });
    return Tensor::wrap(out);
}

Tensor narrow(const Tensor& a, int axis, int start, int len) {
    check_rank2(a, "narrow");
    if (axis != 0 && axis != 1) throw ShapeError("narrow: axis must be 0 or 1");
    if (start < 0 || len <= 0 || start + len > a.dim(axis))
        throw ShapeError("narrow: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " + shape_str(a.shape()));
    int r = a.dim(0), c = a.dim(1);
    int orr = axis == 0 ? len : r;
    int oc = axis == 0 ? c : len;
    auto out = make_impl({orr, oc});
    const double* av = a.data().data();
    for (int i = 0; i < orr; ++i)
        for (int j = 0; j < oc; ++j) {
            int si = axis == 0 ? i + start : i;
            int sj = axis == 1 ? j + start : j;
            out->v[static_cast<size_t>(i) * oc + j] = av[static_cast<size_t>(si) * c + sj];
        }
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, axis, start, orr, oc, c](TensorImpl& self) {
        pa->ensure_grad();
        for (int i = 0; i < orr; ++i)
            for (int j = 0; j < oc; ++j) {
                int si = axis == 0 ? i + start : i;
                int sj = axis == 1 ? j + start : j;
                pa->g[static_cast<size_t>(si) * c + sj] += self.g[static_cast<size_t>(i) * oc + j];
            }
    });
    return Tensor::wrap(out);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    auto out = make_impl(std::move(shape));
    if (out->numel() != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(out->shape));
    out->v = std::vector<double>(a.data().begin(), a.data().end());
    auto pa = a.impl();
    attach(out, {pa}, [pa](TensorImpl& self) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.g.size(); ++i) pa->g[i] += self.g[i];
    });
    return Tensor::wrap(out);
}

namespace {

enum class ActKind { relu, tanh_k, sigmoid };

Tensor activation(const Tensor& a, ActKind kind) {
    auto out = make_impl(a.shape());
    const double* av = a.data().data();
    for (size_t i = 0; i < out->v.size(); ++i) {
        double x = av[i];
        switch (kind) {
            case ActKind::relu: out->v[i] = x > 0.0 ? x : 0.0; break;
            case ActKind::tanh_k: out->v[i] = std::tanh(x); break;
            case ActKind::sigmoid: out->v[i] = 1.0 / (1.0 + std::exp(-x)); break;
        }
    }
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, kind](TensorImpl& self) {
        pa->ensure_grad();
        const double* g = self.g.data();
        const double* y = self.v.data();
        const double* x = pa->v.data();
        double* ga = pa->g.data();
        for (size_t i = 0; i < self.g.size(); ++i) {
            switch (kind) {
                case ActKind::relu: ga[i] += x[i] > 0.0 ? g[i] : 0.0; break;
                case ActKind::tanh_k: ga[i] += g[i] * (1.0 - y[i] * y[i]); break;
                case ActKind::sigmoid: ga[i] += g[i] * y[i] * (1.0 - y[i]); break;
            }
        }
    });
    return Tensor::wrap(out);
}

}  // namespace

Tensor relu(const Tensor& a) { return activation(a, ActKind::relu); }
Tensor tanh_op(const Tensor& a) { return activation(a, ActKind::tanh_k); }
Tensor sigmoid(const Tensor& a) { return activation(a, ActKind::sigmoid); }

Tensor softmax(const Tensor& a, int axis) {
    check_rank2(a, "softmax");
    if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    int r = a.dim(0), c = a.dim(1);
    auto out = make_impl({r, c});
    const double* av = a.data().data();
    double* ov = out->v.data();
    int outer = axis == 1 ? r : c;
    int inner = axis == 1 ? c : r;
    auto idx = [&](int o, int i) {
        return axis == 1 ? static_cast<size_t>(o) * c + i : static_cast<size_t>(i) * c + o;
    };
    for (int o = 0; o < outer; ++o) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < inner; ++i) mx = std::max(mx, av[idx(o, i)]);
        double sum = 0.0;
        for (int i = 0; i < inner; ++i) {
            double e = std::exp(av[idx(o, i)] - mx);
            ov[idx(o, i)] = e;
            sum += e;
        }
        for (int i = 0; i < inner; ++i) ov[idx(o, i)] /= sum;
    }
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, axis, r, c](TensorImpl& self) {
        pa->ensure_grad();
        const double* g = self.g.data();
        const double* y = self.v.data();
        double* ga = pa->g.data();
        int outer = axis == 1 ? r : c;
        int inner = axis == 1 ? c : r;
        auto idx = [&](int o, int i) {
            return axis == 1 ? static_cast<size_t>(o) * c + i : static_cast<size_t>(i) * c + o;
        };
        for (int o = 0; o < outer; ++o) {
            double dot = 0.0;
            for (int i = 0; i < inner; ++i) dot += g[idx(o, i)] * y[idx(o, i)];
            for (int i = 0; i < inner; ++i)
                ga[idx(o, i)] += y[idx(o, i)] * (g[idx(o, i)] - dot);
        }
    });
    return Tensor::wrap(out);
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    check_rank2(table, "embedding");
    int V = table.dim(0), E = table.dim(1);
    int n = static_cast<int>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= V)
            throw ShapeError("embedding: id " + std::to_string(id) + " outside table of " +
                             std::to_string(V) + " rows");
    auto out = make_impl({n, E});
    const double* tv = table.data().data();
    for (int i = 0; i < n; ++i)
        std::copy(tv + static_cast<size_t>(ids[i]) * E, tv + static_cast<size_t>(ids[i] + 1) * E,
                  out->v.data() + static_cast<size_t>(i) * E);
    finalize(*out);
    auto pt = table.impl();
    std::vector<int> ids_copy(ids.begin(), ids.end());
    attach(out, {pt}, [pt, ids = std::move(ids_copy), E](TensorImpl& self) {
        pt->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            const double* g = self.g.data() + i * E;
            double* gt = pt->g.data() + static_cast<size_t>(ids[i]) * E;
            for (int j = 0; j < E; ++j) gt[j] += g[j];
        }
    });
    return Tensor::wrap(out);
}

namespace {

// Gathers conv patches: cols[(oy*OW+ox), ((ky*kw+kx)*Ci+ci)].
std::vector<double> im2col(const double* x, int H, int W, int Ci, int kh, int kw, int pad,
                           int OH, int OW) {
    std::vector<double> cols(static_cast<size_t>(OH) * OW * kh * kw * Ci, 0.0);
    const int K = kh * kw * Ci;
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
            double* dst = cols.data() + (static_cast<size_t>(oy) * OW + ox) * K;
            for (int ky = 0; ky < kh; ++ky) {
                int iy = oy - pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    int ix = ox - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    const double* src = x + (static_cast<size_t>(iy) * W + ix) * Ci;
                    std::copy(src, src + Ci, dst + (static_cast<size_t>(ky) * kw + kx) * Ci);
                }
            }
        }
    return cols;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
    if (x.rank() != 3) throw ShapeError("conv2d: input must be [H,W,Cin], got " +
                                        shape_str(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d: kernel must be [Cout,kh,kw,Cin], got " +
                                        shape_str(w.shape()));
    int H = x.dim(0), W = x.dim(1), Ci = x.dim(2);
    int Co = w.dim(0), kh = w.dim(1), kw = w.dim(2);
    if (w.dim(3) != Ci)
        throw ShapeError("conv2d: kernel channels " + shape_str(w.shape()) + " vs input " +
                         shape_str(x.shape()));
    if (b.numel() != static_cast<size_t>(Co))
        throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " for " + std::to_string(Co) +
                         " output channels");
    int OH = H + 2 * pad - kh + 1;
    int OW = W + 2 * pad - kw + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: empty output for padding " +
                                             std::to_string(pad));
    const int K = kh * kw * Ci;
    const int cells = OH * OW;
    std::vector<double> cols = im2col(x.data().data(), H, W, Ci, kh, kw, pad, OH, OW);
    auto out = make_impl({OH, OW, Co});
    {
        MapConst C(cols.data(), cells, K), Wm(w.data().data(), Co, K);
        MapMat O(out->v.data(), cells, Co);
        O.noalias() = C * Wm.transpose();
        const double* bv = b.data().data();
        for (int r = 0; r < cells; ++r)
            for (int c = 0; c < Co; ++c) out->v[static_cast<size_t>(r) * Co + c] += bv[c];
    }
    finalize(*out);
    auto px = x.impl(), pw = w.impl(), pb = b.impl();
    attach(out, {px, pw, pb},
           [px, pw, pb, cols = std::move(cols), H, W, Ci, Co, kh, kw, pad, OH, OW,
            K, cells](TensorImpl& self) {
               MapConst G(self.g.data(), cells, Co);
               if (pb->requires_grad) {
                   pb->ensure_grad();
                   for (int r = 0; r < cells; ++r)
                       for (int c = 0; c < Co; ++c) pb->g[c] += G(r, c);
               }
               if (pw->requires_grad) {
                   pw->ensure_grad();
                   MapConst C(cols.data(), cells, K);
                   MapMat(pw->g.data(), Co, K).noalias() += G.transpose() * C;
               }
               if (px->requires_grad) {
                   px->ensure_grad();
                   MapConst Wm(pw->v.data(), Co, K);
                   RowMat gcols = G * Wm;  // [cells, K]
                   for (int oy = 0; oy < OH; ++oy)
                       for (int ox = 0; ox < OW; ++ox) {
                           const double* src = gcols.data() + (static_cast<size_t>(oy) * OW + ox) * K;
                           for (int ky = 0; ky < kh; ++ky) {
                               int iy = oy - pad + ky;
                               if (iy < 0 || iy >= H) continue;
                               for (int kx = 0; kx < kw; ++kx) {
                                   int ix = ox - pad + kx;
                                   if (ix < 0 || ix >= W) continue;
                                   double* dst = px->g.data() + (static_cast<size_t>(iy) * W + ix) * Ci;
                                   const double* s = src + (static_cast<size_t>(ky) * kw + kx) * Ci;
                                   for (int ci = 0; ci < Ci; ++ci) dst[ci] += s[ci];
                               }
                           }
                       }
               }
           });
    return Tensor::wrap(out);
}

Tensor scatter_rows(const Tensor& vals, std::span<const int> cells, int d) {
    check_rank2(vals, "scatter_rows");
    int n = vals.dim(0), C = vals.dim(1);
    if (static_cast<int>(cells.size()) != n)
        throw ShapeError("scatter_rows: " + std::to_string(cells.size()) + " cells for " +
                         std::to_string(n) + " rows");
    for (int c : cells)
        if (c < 0 || c >= d * d)
            throw ShapeError("scatter_rows: cell " + std::to_string(c) + " outside " +
                             std::to_string(d) + "x" + std::to_string(d) + " grid");
    auto out = make_impl({d, d, C});
    const double* vv = vals.data().data();
    for (int i = 0; i < n; ++i) {
        double* dst = out->v.data() + static_cast<size_t>(cells[i]) * C;
        const double* src = vv + static_cast<size_t>(i) * C;
        for (int j = 0; j < C; ++j) dst[j] += src[j];
    }
    finalize(*out);
    auto pv = vals.impl();
    std::vector<int> cells_copy(cells.begin(), cells.end());
    attach(out, {pv}, [pv, cells = std::move(cells_copy), C](TensorImpl& self) {
        pv->ensure_grad();
        for (size_t i = 0; i < cells.size(); ++i) {
            const double* g = self.g.data() + static_cast<size_t>(cells[i]) * C;
            double* dst = pv->g.data() + i * C;
            for (int j = 0; j < C; ++j) dst[j] += g[j];
        }
    });
    return Tensor::wrap(out);
}

Tensor sum_all(const Tensor& a) {
    auto out = make_impl({1});
    double s = 0.0;
    for (double x : a.data()) s += x;
    out->v[0] = s;
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa](TensorImpl& self) {
        pa->ensure_grad();
        for (double& g : pa->g) g += self.g[0];
    });
    return Tensor::wrap(out);
}

Tensor mean_rows(const Tensor& a) {
    check_rank2(a, "mean_rows");
    int r = a.dim(0), c = a.dim(1);
    auto out = make_impl({1, c});
    const double* av = a.data().data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->v[j] += av[static_cast<size_t>(i) * c + j];
    for (int j = 0; j < c; ++j) out->v[j] /= r;
    finalize(*out);
    auto pa = a.impl();
    attach(out, {pa}, [pa, r, c](TensorImpl& self) {
        pa->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                pa->g[static_cast<size_t>(i) * c + j] += self.g[j] / r;
    });
    return Tensor::wrap(out);
}

Tensor make_op_node(std::vector<int> shape, std::vector<double> values,
                    std::vector<std::shared_ptr<TensorImpl>> parents,
                    std::function<void(TensorImpl&)> backward_fn) {
    auto out = make_impl(std::move(shape));
    if (values.size() != out->v.size())
        throw ShapeError("make_op_node: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(out->shape));
    out->v = std::move(values);
    finalize(*out);
    attach(out, std::move(parents), std::move(backward_fn));
    return Tensor::wrap(out);
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets) {
    check_rank2(logits, "cross_entropy_sum");
    int n = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(targets.size()) != n)
        throw ShapeError("cross_entropy_sum: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
    for (int t : targets)
        if (t < 0 || t >= C)
            throw ShapeError("cross_entropy_sum: target " + std::to_string(t) + " outside " +
                             std::to_string(C) + " classes");
    auto out = make_impl({1});
    const double* lv = logits.data().data();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = lv + static_cast<size_t>(i) * C;
        double mx = row[0];
        for (int j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < C; ++j) sum += std::exp(row[j] - mx);
        total += mx + std::log(sum) - row[targets[i]];
    }
    out->v[0] = total;
    finalize(*out);
    auto pl = logits.impl();
    std::vector<int> tgt(targets.begin(), targets.end());
    attach(out, {pl}, [pl, tgt = std::move(tgt), n, C](TensorImpl& self) {
        pl->ensure_grad();
        double g0 = self.g[0];
        const double* lv = pl->v.data();
        double* gl = pl->g.data();
        for (int i = 0; i < n; ++i) {
            const double* row = lv + static_cast<size_t>(i) * C;
            double mx = row[0];
            for (int j = 1; j < C; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int j = 0; j < C; ++j) sum += std::exp(row[j] - mx);
            for (int j = 0; j < C; ++j) {
                double p = std::exp(row[j] - mx) / sum;
                gl[static_cast<size_t>(i) * C + j] += g0 * (p - (j == tgt[i] ? 1.0 : 0.0));
            }
        }
    });
    return Tensor::wrap(out);
}

}  // namespace ctxnav
