#pragma once

#include <span>

#include "ctxnav/tensor.hpp"

namespace ctxnav {

struct ModelParams;

// Flat cell index convention shared with the visualizer and the decoder's
// spatial attention: cell = row * d + col.
inline int flat_cell(int row, int col, int d) { return row * d + col; }

// Places per-node [n,64] vectors at their grid cells ([d,d,64]); empty cells
// stay zero and co-located nodes (agent standing on an object) are summed.
Tensor scatter_nodes(const Tensor& node_vecs, std::span<const int> cells, int d);

// Three parallel convolutions (kernels 1/5/7, paddings 0/2/3, 64 -> 64
// channels each, no nonlinearity) over a [d,d,64] map; outputs are
// channel-concatenated and spatially flattened to [d*d, 192].  Row r*d+c is
// cell (r,c); columns 0-63 are the kernel-1 branch, 64-127 kernel-5,
// 128-191 kernel-7.
Tensor encode_grid(const ModelParams& p, const Tensor& grid);

// Fused scatter + encode_grid that exploits the sparse occupancy of the grid
// (at most one node per non-empty cell).  Bit-for-bit the same interface and
// tested to match the reference composition numerically; used on the hot
// training path.
Tensor encode_grid_fused(const ModelParams& p, const Tensor& node_vecs,
                         std::span<const int> cells, int d);

}  // namespace ctxnav
