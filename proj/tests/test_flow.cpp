// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "modvid/flow.hpp"
#include "modvid/parallel.hpp"

using namespace modvid;
using modvid::testing::naive_warp;
using modvid::testing::random_mask;
using modvid::testing::random_samples;

namespace {

// cur[y, x] = prev[y - dy, x - dx]; uncovered pixels get fresh noise.
SampleClip shifted(Rng& rng, const SampleClip& prev, int dx, int dy) {
    SampleClip cur = random_samples(rng, 1, prev.height(), prev.width(), prev.channels(), 0, 255);
    for (Index y = 0; y < prev.height(); ++y)
        for (Index x = 0; x < prev.width(); ++x) {
            const Index sy = y - dy, sx = x - dx;
            if (sy < 0 || sx < 0 || sy >= prev.height() || sx >= prev.width()) continue;
            for (Index c = 0; c < prev.channels(); ++c) cur(0, y, x, c) = prev(0, sy, sx, c);
        }
    return cur;
}

bool interior_block(Index b, Index block, int radius, Index extent) {
    return b * block - radius >= 0 && (b + 1) * block - 1 + radius <= extent - 1;
}

FlowField uniform_flow(Index h, Index w, Index block, int dx, int dy) {
    FlowField f = FlowField::zero(h, w, block, 7);
    f.dx.setConstant(dx);
    f.dy.setConstant(dy);
    return f;
}

} // namespace

TEST_CASE("identical and constant frames give zero flow") {
    Rng rng(1);
    const SampleClip a = random_samples(rng, 1, 24, 32, 1, 0, 255);
    const FlowField f = estimate_flow(a, a);
    CHECK(f.grid_rows == 3);
    CHECK(f.grid_cols == 4);
    CHECK((f.dx == 0).all());
    CHECK((f.dy == 0).all());

    const SampleClip flat(1, 16, 16, 1, 9);
    const FlowField g = estimate_flow(flat, flat);
    CHECK((g.dx == 0).all());
    CHECK((g.dy == 0).all());
}

TEST_CASE("a (2, 3) translation is recovered on interior blocks") {
    Rng rng(2);
    const SampleClip prev = random_samples(rng, 1, 48, 48, 1, 0, 255);
    const SampleClip cur = shifted(rng, prev, 2, 3);
    const FlowField f = estimate_flow(prev, cur, {8, 3});
    Index interior = 0;
    for (Index by = 0; by < f.grid_rows; ++by)
        for (Index bx = 0; bx < f.grid_cols; ++bx) {
            if (!interior_block(by, 8, 3, 48) || !interior_block(bx, 8, 3, 48)) continue;
            ++interior;
            CHECK(f.dx_at(by, bx) == 2);
            CHECK(f.dy_at(by, bx) == 3);
        }
    CHECK(interior == 16);
    CHECK((f.dx.abs() <= 3).all());
    CHECK((f.dy.abs() <= 3).all());
}

TEST_CASE("multi-channel frames and partial blocks") {
    Rng rng(3);
    const SampleClip prev = random_samples(rng, 1, 30, 37, 3, 0, 4095);
    const SampleClip cur = shifted(rng, prev, -4, 1);
    const FlowField f = estimate_flow(prev, cur, {8, 5});
    CHECK(f.grid_rows == 4);
    CHECK(f.grid_cols == 5);
    CHECK(f.dx_at(1, 1) == -4);
    CHECK(f.dy_at(1, 1) == 1);
}

TEST_CASE("estimate_flow input errors") {
    const SampleClip a(1, 6, 6, 1), b(1, 6, 7, 1);
    CHECK_THROWS_AS(estimate_flow(a, a, {8, 2}), InvalidArgument);
    CHECK_THROWS_AS(estimate_flow(a, b, {4, 2}), InvalidArgument);
    CHECK_THROWS_AS(estimate_flow(SampleClip(2, 8, 8, 1), SampleClip(2, 8, 8, 1), {4, 2}),
                    InvalidArgument);
}

TEST_CASE("warp worked values") {
    Rng rng(4);
    const MaskClip m = random_mask(rng, 1, 16, 16, 1);
    CHECK(warp_mask(m, FlowField::zero(16, 16, 8, 7)) == m);

    MaskClip hot(1, 16, 16, 1);
    hot(0, 5, 6, 0) = 1;
    const MaskClip moved = warp_mask(hot, uniform_flow(16, 16, 8, 2, 3));
    CHECK(moved(0, 8, 8, 0) == 1);
    CHECK(moved.array().cast<int>().sum() == 1);
}

TEST_CASE("warp matches the per-pixel oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const Index h = rng.integer(5, 30), w = rng.integer(5, 30), c = rng.integer(1, 3);
        const Index block = rng.integer(2, 8);
        const MaskClip m = random_mask(rng, 1, h, w, c);
        FlowField f = FlowField::zero(h, w, block, 7);
        for (Index i = 0; i < f.dx.size(); ++i) {
            f.dx[i] = static_cast<int>(rng.integer(-7, 7));
            f.dy[i] = static_cast<int>(rng.integer(-7, 7));
        }
        const MaskClip out = warp_mask(m, f);
        CHECK(out == naive_warp(m, f));
        CHECK((out.array() <= 1).all());
    }
}

TEST_CASE("warping by f then -f restores the interior") {
    Rng rng(6);
    const MaskClip m = random_mask(rng, 1, 32, 32, 1);
    const FlowField f = uniform_flow(32, 32, 8, 3, -2);
    const MaskClip back = warp_mask(warp_mask(m, f), negate(f));
    for (Index y = 3; y < 29; ++y)
        for (Index x = 3; x < 29; ++x) CHECK(back(0, y, x, 0) == m(0, y, x, 0));
}

TEST_CASE("flow text round trip") {
    Rng rng(7);
    const SampleClip a = random_samples(rng, 1, 24, 24, 1, 0, 255);
    const FlowField f = estimate_flow(a, shifted(rng, a, 1, -1), {8, 2});
    std::stringstream ss;
    write_flow(ss, f);
    CHECK(ss.str().rfind("modvid-flow 1\nblock 8\nradius 2\ngrid 3 3\n", 0) == 0);
    CHECK(read_flow(ss) == f);

    std::stringstream bad("modvid-flow 1\nblock 8\nradius 2\ngrid 2 2\n0 0\n");
    CHECK_THROWS(read_flow(bad));
}

TEST_CASE("flow does not depend on the thread count") {
    Rng rng(8);
    const SampleClip a = random_samples(rng, 1, 40, 40, 1, 0, 255);
    const SampleClip b = shifted(rng, a, 5, -6);
    set_thread_count(1);
    const FlowField f1 = estimate_flow(a, b);
    set_thread_count(4);
    const FlowField f4 = estimate_flow(a, b);
    set_thread_count(1);
    CHECK(f1 == f4);
}
