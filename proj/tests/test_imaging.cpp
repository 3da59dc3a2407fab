// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "modvid/imaging.hpp"

using namespace modvid;
using modvid::testing::ld_global_ssim;
using modvid::testing::ld_psnr;
using modvid::testing::random_real;

namespace {

double stddev(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

TEST_CASE("psnr sentinel and a worked value") {
    Rng rng(1);
    const RealClip a = random_real(rng, 1, 8, 8, 1, 0, 255);
    const Psnr same = psnr(a, a, 0);
    CHECK(same.infinite);

    // peak 255, MSE 1 over the interior
    RealClip gt(1, 4, 4, 1, 100.0);
    gt(0, 0, 0, 0) = 255.0;
    RealClip est = gt;
    for (Index i = 0; i < est.size(); ++i) est.array()[i] += (i % 2 == 0) ? 1.0 : -1.0;
    const Psnr p = psnr(gt, est, 0);
    CHECK_FALSE(p.infinite);
    CHECK(std::abs(p.db - 48.130803608679102) <= 1e-12);
}

TEST_CASE("psnr uses only the interior") {
    Rng rng(2);
    RealClip gt = random_real(rng, 1, 8, 8, 1, 10, 200);
    RealClip est = gt;
    // Damage only the two-pixel border.
    for (Index y = 0; y < 8; ++y)
        for (Index x = 0; x < 8; ++x)
            if (y < 2 || y >= 6 || x < 2 || x >= 6) est(0, y, x, 0) += 50.0;
    CHECK(psnr(gt, est, 2).infinite);
    CHECK_FALSE(psnr(gt, est, 1).infinite);
    est(0, 3, 4, 0) += 1.0;
    const Psnr p = psnr(gt, est, 2);
    CHECK(std::abs(p.db - static_cast<double>(ld_psnr(gt, est, 2))) <= 1e-9);
}

TEST_CASE("psnr errors") {
    CHECK_THROWS_AS(psnr(RealClip(1, 8, 8, 1), RealClip(1, 8, 7, 1), 0), InvalidArgument);
    CHECK_THROWS_AS(psnr(RealClip(1, 8, 8, 1, 1.0), RealClip(1, 8, 8, 1), 4), InvalidArgument);
    CHECK_THROWS_AS(psnr(RealClip(1, 8, 8, 1), RealClip(1, 8, 8, 1, 1.0), 0), DegenerateInput);
}

TEST_CASE("psnr decreases as the error grows") {
    Rng rng(3);
    const RealClip gt = random_real(rng, 1, 8, 8, 1, 0, 255);
    double last = std::numeric_limits<double>::infinity();
    for (double e = 0.5; e < 40; e *= 1.7) {
        RealClip est = gt;
        est.array() += e;
        const double db = psnr(gt, est, 0).db;
        CHECK(db < last);
        last = db;
    }
}

TEST_CASE("metrics match long double evaluation on seeded pairs") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const RealClip gt = random_real(rng, 1, 8, 8, 1, 0, 1023);
        RealClip est = gt;
        for (Index i = 0; i < est.size(); ++i) est.array()[i] += 20.0 * rng.normal();
        for (Index ex = 0; ex <= 2; ++ex) {
            CHECK(std::abs(psnr(gt, est, ex).db - static_cast<double>(ld_psnr(gt, est, ex))) <= 1e-9);
            long double range = 0;
            for (Index y = ex; y < 8 - ex; ++y)
                for (Index x = ex; x < 8 - ex; ++x) range = std::max<long double>(range, gt(0, y, x, 0));
            CHECK(std::abs(ssim(gt, est, ex) - static_cast<double>(ld_global_ssim(gt, est, ex, range))) <=
                  1e-9);
        }
    }
}

TEST_CASE("ssim properties") {
    Rng rng(5);
    const RealClip a = random_real(rng, 1, 16, 16, 1, 0, 255);
    CHECK(ssim(a, a, 0) == 1.0);
    CHECK(ssim(a, a, 2, {true, std::nullopt}) == 1.0);

    const double mean = a.array().mean();
    RealClip flipped = a;
    flipped.array() = -(a.array() - mean) + mean;
    CHECK(ssim(a, flipped, 0) < 0.0);

    const RealClip b = random_real(rng, 1, 16, 16, 1, 0, 255);
    SsimOptions fixed;
    fixed.dynamic_range = 255.0;
    CHECK(std::abs(ssim(a, b, 1, fixed) - ssim(b, a, 1, fixed)) <= 1e-12);
    fixed.windowed = true;
    CHECK(std::abs(ssim(a, b, 1, fixed) - ssim(b, a, 1, fixed)) <= 1e-12);
    const double s = ssim(a, b, 0);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);

    CHECK_THROWS_AS(ssim(a, RealClip(1, 16, 15, 1), 0), InvalidArgument);
    CHECK_THROWS_AS(ssim(RealClip(1, 10, 10, 1), RealClip(1, 10, 10, 1), 0, {true, 1.0}),
                    InvalidArgument);
}

TEST_CASE("evaluate_video aggregates") {
    Rng rng(6);
    RealClip gt = random_real(rng, 3, 8, 8, 1, 1, 255);
    RealClip est = gt;
    est(1, 4, 4, 0) += 3.0;
    const QualityReport q = evaluate_video(gt, est, 1);
    REQUIRE(q.psnr.size() == 3);
    CHECK(q.psnr[0].infinite);
    CHECK_FALSE(q.psnr[1].infinite);
    CHECK(q.identical_frames == 2);
    CHECK_FALSE(q.all_identical);
    CHECK(q.mean_psnr_db == doctest::Approx((2 * kPsnrCapDb + q.psnr[1].db) / 3.0));
    CHECK(evaluate_video(gt, gt, 1).all_identical);
}

TEST_CASE("tonemap constant video and range") {
    const RealClip flat(5, 6, 6, 1, 3.25);
    const IntClip out = tonemap_video(flat);
    CHECK(out.bit_depth == 8);
    for (Index t = 1; t < 5; ++t) CHECK(out.samples.frame(t).array().isApprox(out.samples.frame(0).array()));
    CHECK((out.samples.array() == out.samples.array()[0]).all());

    Rng rng(7);
    const RealClip wild = random_real(rng, 4, 8, 8, 3, 0, 1e6);
    const IntClip w = tonemap_video(wild);
    CHECK((w.samples.array() >= 0).all());
    CHECK((w.samples.array() <= 255).all());

    const IntClip zero = tonemap_video(RealClip(3, 4, 4, 1));
    CHECK((zero.samples.array() == 0).all());
    CHECK_THROWS_AS(tonemap_video(RealClip(1, 2, 2, 1, -1.0)), InvalidArgument);
}

TEST_CASE("tonemap preserves pixel order within a frame") {
    Rng rng(8);
    const RealClip v = random_real(rng, 3, 8, 8, 1, 0, 500);
    const IntClip out = tonemap_video(v);
    for (Index t = 0; t < 3; ++t)
        for (Index i = 0; i < 64; ++i)
            for (Index j = 0; j < 64; ++j)
                if (v.frame_array(t)[i] < v.frame_array(t)[j])
                    CHECK(out.samples.frame_array(t)[i] <= out.samples.frame_array(t)[j]);
}

TEST_CASE("temporal smoothing reduces flicker") {
    Rng rng(9);
    RealClip v(12, 8, 8, 1);
    for (Index t = 0; t < 12; ++t) {
        const double gain = t % 2 == 0 ? 1.0 : 3.0;
        for (Index i = 0; i < 64; ++i) v.frame_array(t)[i] = gain * rng.uniform(50, 150);
    }
    const auto smooth = frame_means(tonemap_video(v).samples.cast<double>());
    const auto plain = frame_means(tonemap_unsmoothed(v).samples.cast<double>());
    CHECK(stddev(smooth) < stddev(plain));
}
