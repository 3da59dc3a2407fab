// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/flow.hpp"

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "modvid/parallel.hpp"

namespace modvid {

namespace {

void require_single_frame(Index frames, const char* what) {
    if (frames != 1)
        throw InvalidArgument(std::string(what) + ": expected a single frame, got " +
                              std::to_string(frames));
}

} // namespace

FlowField FlowField::zero(Index height, Index width, Index block, int radius) {
    FlowField f;
    f.block = block;
    f.radius = radius;
    f.grid_rows = (height + block - 1) / block;
    f.grid_cols = (width + block - 1) / block;
    f.dx = Eigen::ArrayXi::Zero(f.grid_rows * f.grid_cols);
    f.dy = Eigen::ArrayXi::Zero(f.grid_rows * f.grid_cols);
    return f;
}

bool FlowField::operator==(const FlowField& o) const {
    return block == o.block && radius == o.radius && grid_rows == o.grid_rows &&
           grid_cols == o.grid_cols && (dx == o.dx).all() && (dy == o.dy).all();
}

FlowField estimate_flow(const SampleClip& prev, const SampleClip& cur, const FlowOptions& opts) {
    require_single_frame(prev.frames(), "estimate_flow");
    if (!prev.same_shape(cur)) throw InvalidArgument("estimate_flow: frames differ in shape");
    const Index h = cur.height(), w = cur.width(), ch = cur.channels();
    if (opts.block < 1 || opts.block > h || opts.block > w)
        throw InvalidArgument("estimate_flow: block " + std::to_string(opts.block) +
                              " does not fit a " + std::to_string(h) + "x" + std::to_string(w) +
                              " frame");
    if (opts.radius < 0) throw InvalidArgument("estimate_flow: negative search radius");

    FlowField f = FlowField::zero(h, w, opts.block, opts.radius);
    const int r = opts.radius;
    parallel_for(static_cast<std::size_t>(f.grid_rows * f.grid_cols), [&](std::size_t idx) {
        const Index by = static_cast<Index>(idx) / f.grid_cols;
        const Index bx = static_cast<Index>(idx) % f.grid_cols;
        const Index y0 = by * opts.block, y1 = std::min(h, y0 + opts.block);
        const Index x0 = bx * opts.block, x1 = std::min(w, x0 + opts.block);
        Sample best_sad = std::numeric_limits<Sample>::max();
        int best_manhattan = std::numeric_limits<int>::max();
        int best_dx = 0, best_dy = 0;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                Sample sad = 0;
                for (Index y = y0; y < y1 && sad <= best_sad; ++y) {
                    const Index py = std::clamp<Index>(y - dy, 0, h - 1);
                    for (Index x = x0; x < x1; ++x) {
                        const Index px = std::clamp<Index>(x - dx, 0, w - 1);
                        for (Index c = 0; c < ch; ++c)
                            sad += std::abs(cur(0, y, x, c) - prev(0, py, px, c));
                    }
                }
                const int manhattan = std::abs(dx) + std::abs(dy);
                if (sad < best_sad || (sad == best_sad && manhattan < best_manhattan)) {
                    best_sad = sad;
                    best_manhattan = manhattan;
                    best_dx = dx;
                    best_dy = dy;
                }
            }
        }
        f.dx[static_cast<Index>(idx)] = best_dx;
        f.dy[static_cast<Index>(idx)] = best_dy;
    });
    return f;
}

MaskClip warp_mask(const MaskClip& prev, const FlowField& flow) {
    require_single_frame(prev.frames(), "warp_mask");
    const Index h = prev.height(), w = prev.width();
    if (flow.grid_rows != (h + flow.block - 1) / flow.block ||
        flow.grid_cols != (w + flow.block - 1) / flow.block)
        throw InvalidArgument("warp_mask: flow grid does not cover the mask");
    MaskClip out(1, h, w, prev.channels());
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            const Index by = y / flow.block, bx = x / flow.block;
            const Index sy = std::clamp<Index>(y - flow.dy_at(by, bx), 0, h - 1);
            const Index sx = std::clamp<Index>(x - flow.dx_at(by, bx), 0, w - 1);
            for (Index c = 0; c < prev.channels(); ++c) out(0, y, x, c) = prev(0, sy, sx, c);
        }
    }
    return out;
}

FlowField negate(const FlowField& flow) {
    FlowField f = flow;
    f.dx = -flow.dx;
    f.dy = -flow.dy;
    return f;
}

void write_flow(std::ostream& os, const FlowField& flow) {
    os << "modvid-flow 1\n"
       << "block " << flow.block << "\n"
       << "radius " << flow.radius << "\n"
       << "grid " << flow.grid_rows << " " << flow.grid_cols << "\n";
    for (Index i = 0; i < flow.dx.size(); ++i) os << flow.dx[i] << " " << flow.dy[i] << "\n";
}

FlowField read_flow(std::istream& is) {
    std::string magic, key;
    int version = 0;
    FlowField f;
    if (!(is >> magic >> version) || magic != "modvid-flow" || version != 1)
        throw InvalidData("read_flow: bad header");
    if (!(is >> key >> f.block) || key != "block" || !(is >> key >> f.radius) || key != "radius" ||
        !(is >> key >> f.grid_rows >> f.grid_cols) || key != "grid")
        throw InvalidData("read_flow: malformed header fields");
    if (f.block < 1 || f.radius < 0 || f.grid_rows < 0 || f.grid_cols < 0)
        throw InvalidData("read_flow: invalid header values");
    const Index n = f.grid_rows * f.grid_cols;
    f.dx.resize(n);
    f.dy.resize(n);
    for (Index i = 0; i < n; ++i) {
        if (!(is >> f.dx[i] >> f.dy[i])) throw InvalidData("read_flow: truncated displacement rows");
        if (std::abs(f.dx[i]) > f.radius || std::abs(f.dy[i]) > f.radius)
            throw InvalidData("read_flow: displacement exceeds search radius");
    }
    return f;
}

} // namespace modvid
