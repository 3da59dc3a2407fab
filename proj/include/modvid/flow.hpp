// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

#include "modvid/clip.hpp"

namespace modvid {

/// Per-block integer displacement. A block displaced by (dx, dy) means
/// cur[y, x] ~ prev[y - dy, x - dx]; dx runs along columns, dy along rows.
struct FlowField {
    Index block = 8;
    int radius = 7;
    Index grid_rows = 0;
    Index grid_cols = 0;
    Eigen::ArrayXi dx;  // raster order over the block grid
    Eigen::ArrayXi dy;

    int dx_at(Index by, Index bx) const { return dx[by * grid_cols + bx]; }
    int dy_at(Index by, Index bx) const { return dy[by * grid_cols + bx]; }

    /// Zero flow on the grid covering a height x width frame.
    static FlowField zero(Index height, Index width, Index block, int radius);

    bool operator==(const FlowField& o) const;
};

struct FlowOptions {
    Index block = 8;
    int radius = 7;
};

/// Exhaustive block matching minimising the sum of absolute differences over
/// all channels. Ties go to the smallest |dx|+|dy|, then to raster order of
/// the candidate (dy outer, dx inner). Out-of-frame samples are edge-clamped.
FlowField estimate_flow(const SampleClip& prev, const SampleClip& cur, const FlowOptions& opts = {});

/// Nearest-neighbour pullback of a single-frame mask: out[y,x] = prev[y-dy, x-dx],
/// coordinates clamped to the frame.
MaskClip warp_mask(const MaskClip& prev, const FlowField& flow);

FlowField negate(const FlowField& flow);

/// Text dump: "modvid-flow 1", "block B", "radius R", "grid ROWS COLS",
/// then one "dx dy" line per block in raster order.
void write_flow(std::ostream& os, const FlowField& flow);
FlowField read_flow(std::istream& is);

} // namespace modvid
