#include "ctxnav/world_encoder.hpp"

#include <Eigen/Dense>

#include "ctxnav/model.hpp"

namespace ctxnav {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;
using StridedMapMut = Eigen::Map<RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;

struct Branch {
    const Tensor* w;
    const Tensor* b;
    int pad;
    int k;
    int col_offset;
};
}  // namespace

Tensor scatter_nodes(const Tensor& node_vecs, std::span<const int> cells, int d) {
    return scatter_rows(node_vecs, cells, d);
}

Tensor encode_grid(const ModelParams& p, const Tensor& grid) {
    if (grid.rank() != 3 || grid.dim(2) != p.cfg.dim)
        throw ShapeError("encode_grid expects [d,d," + std::to_string(p.cfg.dim) + "] input");
    int cells = grid.dim(0) * grid.dim(1);
    int C = p.cfg.dim;
    Tensor y1 = conv2d(grid, p.conv1_w, p.conv1_b, 0);
    Tensor y5 = conv2d(grid, p.conv5_w, p.conv5_b, 2);
    Tensor y7 = conv2d(grid, p.conv7_w, p.conv7_b, 3);
    return concat({reshape(y1, {cells, C}), reshape(y5, {cells, C}), reshape(y7, {cells, C})}, 1);
}

// Same map as scatter_nodes + encode_grid, but computed from the node list
// directly: with at most a handful of occupied cells the three convolutions
// reduce to a few dozen 64x64 products instead of dense patch-gather matmuls.
Tensor encode_grid_fused(const ModelParams& p, const Tensor& node_vecs,
                         std::span<const int> cells, int d) {
    const int C = p.cfg.dim;
    if (node_vecs.rank() != 2 || node_vecs.dim(1) != C)
        throw ShapeError("encode_grid_fused expects [n," + std::to_string(C) + "] node vectors");
    int n = node_vecs.dim(0);
    if (static_cast<int>(cells.size()) != n)
        throw ShapeError("encode_grid_fused: " + std::to_string(cells.size()) + " cells for " +
                         std::to_string(n) + " nodes");
    const int G = d * d;
    const int out_cols = 3 * C;
    const Branch branches[3] = {{&p.conv1_w, &p.conv1_b, 0, 1, 0},
                                {&p.conv5_w, &p.conv5_b, 2, 5, C},
                                {&p.conv7_w, &p.conv7_b, 3, 7, 2 * C}};

    std::vector<double> values(static_cast<size_t>(G) * out_cols, 0.0);
    const double* xv = node_vecs.data().data();
    for (const Branch& br : branches) {
        const double* bv = br.b->data().data();
        for (int cell = 0; cell < G; ++cell) {
            double* dst = values.data() + static_cast<size_t>(cell) * out_cols + br.col_offset;
            for (int oc = 0; oc < C; ++oc) dst[oc] += bv[oc];
        }
        const double* wv = br.w->data().data();
        const int k = br.k;
        const Eigen::Index kk_stride = static_cast<Eigen::Index>(k) * k * C;
        for (int i = 0; i < n; ++i) {
            int qr = cells[i] / d, qc = cells[i] % d;
            Eigen::Map<const Eigen::VectorXd> x(xv + static_cast<size_t>(i) * C, C);
            for (int ky = 0; ky < k; ++ky) {
                int r = qr - ky + br.pad;
                if (r < 0 || r >= d) continue;
                for (int kx = 0; kx < k; ++kx) {
                    int c = qc - kx + br.pad;
                    if (c < 0 || c >= d) continue;
                    StridedMap W(wv + static_cast<size_t>(ky * k + kx) * C, C, C,
                                 Eigen::OuterStride<>(kk_stride));
                    double* dst = values.data() +
                                  (static_cast<size_t>(r) * d + c) * out_cols + br.col_offset;
                    Eigen::Map<Eigen::VectorXd>(dst, C).noalias() += W * x;
                }
            }
        }
    }

    auto px = node_vecs.impl();
    std::vector<std::shared_ptr<TensorImpl>> parents{
        px,           p.conv1_w.impl(), p.conv1_b.impl(), p.conv5_w.impl(),
        p.conv5_b.impl(), p.conv7_w.impl(), p.conv7_b.impl()};
    std::vector<int> cell_copy(cells.begin(), cells.end());
    auto backward = [px, pw1 = p.conv1_w.impl(), pb1 = p.conv1_b.impl(),
                     pw5 = p.conv5_w.impl(), pb5 = p.conv5_b.impl(), pw7 = p.conv7_w.impl(),
                     pb7 = p.conv7_b.impl(), cells = std::move(cell_copy), d, C, G, out_cols,
                     n](TensorImpl& self) {
        struct BranchB {
            TensorImpl* w;
            TensorImpl* b;
            int pad;
            int k;
            int col_offset;
        };
        const BranchB branches[3] = {{pw1.get(), pb1.get(), 0, 1, 0},
                                     {pw5.get(), pb5.get(), 2, 5, C},
                                     {pw7.get(), pb7.get(), 3, 7, 2 * C}};
        const double* g = self.g.data();
        bool xgrad = px->requires_grad;
        if (xgrad) px->ensure_grad();
        for (const BranchB& br : branches) {
            if (br.b->requires_grad) {
                br.b->ensure_grad();
                for (int cell = 0; cell < G; ++cell) {
                    const double* src = g + static_cast<size_t>(cell) * out_cols + br.col_offset;
                    for (int oc = 0; oc < C; ++oc) br.b->g[static_cast<size_t>(oc)] += src[oc];
                }
            }
            bool wgrad = br.w->requires_grad;
            if (wgrad) br.w->ensure_grad();
            if (!wgrad && !xgrad) continue;
            const int k = br.k;
            const Eigen::Index kk_stride = static_cast<Eigen::Index>(k) * k * C;
            for (int i = 0; i < n; ++i) {
                int qr = cells[static_cast<size_t>(i)] / d, qc = cells[static_cast<size_t>(i)] % d;
                Eigen::Map<const Eigen::VectorXd> x(px->v.data() + static_cast<size_t>(i) * C, C);
                for (int ky = 0; ky < k; ++ky) {
                    int r = qr - ky + br.pad;
                    if (r < 0 || r >= d) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        int c = qc - kx + br.pad;
                        if (c < 0 || c >= d) continue;
                        Eigen::Map<const Eigen::VectorXd> grow(
                            g + (static_cast<size_t>(r) * d + c) * out_cols + br.col_offset, C);
                        if (xgrad) {
                            StridedMap W(br.w->v.data() + static_cast<size_t>(ky * k + kx) * C, C,
                                         C, Eigen::OuterStride<>(kk_stride));
                            Eigen::Map<Eigen::VectorXd>(
                                px->g.data() + static_cast<size_t>(i) * C, C)
                                .noalias() += W.transpose() * grow;
                        }
                        if (wgrad) {
                            StridedMapMut GW(br.w->g.data() + static_cast<size_t>(ky * k + kx) * C,
                                             C, C, Eigen::OuterStride<>(kk_stride));
                            GW.noalias() += grow * x.transpose();
                        }
                    }
                }
            }
        }
    };
    return make_op_node({G, out_cols}, std::move(values), std::move(parents), std::move(backward));
}

}  // namespace ctxnav
