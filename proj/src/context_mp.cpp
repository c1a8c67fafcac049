#include "ctxnav/context_mp.hpp"

#include "ctxnav/model.hpp"

namespace ctxnav {

NodeInputs NodeInputs::from_world(const WorldState& w) {
    NodeInputs in;
    in.d = w.d;
    // Property index 0 means "not applicable"; real values start at 1.
    for (const auto& o : w.objects) {
        in.color_ids.push_back(1 + static_cast<int>(o.color));
        in.shape_ids.push_back(1 + static_cast<int>(o.shape));
        in.size_ids.push_back(o.size);  // sizes 1..4 already offset past the null row
        in.orient_ids.push_back(0);
        in.cells.push_back(flat_cell(o.pos.row, o.pos.col, w.d));
    }
    in.color_ids.push_back(0);
    in.shape_ids.push_back(0);
    in.size_ids.push_back(0);
    in.orient_ids.push_back(1 + static_cast<int>(w.agent.orientation));
    in.cells.push_back(flat_cell(w.agent.pos.row, w.agent.pos.col, w.d));
    in.n = static_cast<int>(in.cells.size());
    return in;
}

Tensor local_embed(const ModelParams& p, const NodeInputs& nodes) {
    Tensor c = embedding(p.prop_color, nodes.color_ids);
    Tensor s = embedding(p.prop_shape, nodes.shape_ids);
    Tensor z = embedding(p.prop_size, nodes.size_ids);
    Tensor o = embedding(p.prop_orient, nodes.orient_ids);
    return concat({c, s, z, o}, 1);  // [n, 64]
}

Tensor fuse_nodes(const ModelParams& p, const Tensor& loc, const Tensor& ctx) {
    Tensor gate = mul(matmul(loc, p.w4), matmul(ctx, p.w5));
    return concat({loc, ctx, gate}, 1);  // [n, 192]
}

Tensor mp_round(const ModelParams& p, const Tensor& loc, const Tensor& ctx, const Tensor& c_t,
                Tensor* weights_out) {
    int n = ctx.dim(0);
    Tensor fused = fuse_nodes(p, loc, ctx);
    Tensor aggregate;
    if (n == 1) {
        aggregate = Tensor::zeros({1, p.cfg.dim});
        if (weights_out) *weights_out = Tensor::zeros({1, 1});
    } else {
        Tensor recv = matmul(fused, p.w6);                                  // [n,64]
        Tensor send = mul_rowvec(matmul(fused, p.w7), matmul(c_t, p.w8));   // [n,64]
        Tensor logits = matmul(recv, transpose(send));  // [n,n], row j = receiver
        // Self-edges excluded via a large negative constant on the diagonal.
        Tensor mask = Tensor::zeros({n, n});
        for (int i = 0; i < n; ++i) mask.at(i, i) = -1e9;
        Tensor weights = softmax(add(logits, mask), 1);                     // senders per receiver
        if (weights_out) *weights_out = weights;
        Tensor messages = mul_rowvec(matmul(fused, p.w9), matmul(c_t, p.w10));  // [n,64]
        aggregate = matmul(weights, messages);                              // [n,64]
    }
    return matmul(concat({ctx, aggregate}, 1), p.w11);  // [n,64]
}

Tensor contextualize(const ModelParams& p, const NodeInputs& nodes,
                     std::span<const Tensor> round_contexts) {
    if (static_cast<int>(round_contexts.size()) != p.cfg.rounds)
        throw RoundMismatchError(std::to_string(round_contexts.size()) + " contexts for " +
                                 std::to_string(p.cfg.rounds) + " rounds");
    Tensor loc = local_embed(p, nodes);
    Tensor ctx = loc;
    for (const Tensor& c_t : round_contexts) ctx = mp_round(p, loc, ctx, c_t);
    return matmul(concat({loc, ctx}, 1), p.w12);  // [n,64]
}

}  // namespace ctxnav
