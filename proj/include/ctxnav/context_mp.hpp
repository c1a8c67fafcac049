#pragma once

#include <span>
#include <vector>

#include "ctxnav/tensor.hpp"
#include "ctxnav/world.hpp"

namespace ctxnav {

struct ModelParams;

// Node-level view of a world: every object plus the agent (last index), each
// with property-embedding indices (0 = "not applicable") and its flat grid
// cell.  Objects carry color/shape/size and a null orientation; the agent
// carries its orientation and null color/shape/size.
struct NodeInputs {
    std::vector<int> color_ids;
    std::vector<int> shape_ids;
    std::vector<int> size_ids;
    std::vector<int> orient_ids;
    std::vector<int> cells;  // row * d + col
    int n = 0;
    int d = 6;

    static NodeInputs from_world(const WorldState& w);
};

// [n, 64] local embeddings: per node the concatenation of four 16-dim
// property embeddings (color | shape | size | orientation).
Tensor local_embed(const ModelParams& p, const NodeInputs& nodes);

// [n, 192] fused vectors [loc ; ctx ; (W4 loc) * (W5 ctx)].
Tensor fuse_nodes(const ModelParams& p, const Tensor& loc, const Tensor& ctx);

// One round of language-conditioned message passing: pairwise logits from
// fused vectors gated by the round's textual context, softmax over senders
// per receiver (self-edges masked), convex message aggregation, then a linear
// context update.  Single-node graphs use a zero aggregate.  Returns the new
// [n, 64] context matrix; `weights_out`, when given, receives the [n, n]
// sender distribution per receiver row.
Tensor mp_round(const ModelParams& p, const Tensor& loc, const Tensor& ctx, const Tensor& c_t,
                Tensor* weights_out = nullptr);

// Runs `rounds` mp_round steps (one textual context per round; ctx starts at
// loc) and projects [loc ; ctx_T] to the final [n, 64] node outputs.
// Throws RoundMismatch unless exactly `rounds` contexts are supplied.
Tensor contextualize(const ModelParams& p, const NodeInputs& nodes,
                     std::span<const Tensor> round_contexts);

}  // namespace ctxnav
