// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "modvid/clip.hpp"

namespace modvid {

/// PSNR in dB. Identical inputs give `infinite` instead of a float infinity.
struct Psnr {
    double db = 0.0;
    bool infinite = false;

    static Psnr identical() { return {0.0, true}; }
};

/// Aggregates treat identical frames as this many dB.
inline constexpr double kPsnrCapDb = 100.0;

/// 20 log10(max(gt) / sqrt(MSE)) over the frame interior, `exclude` pixels
/// trimmed from every border. Inputs are single frames (any channel count).
Psnr psnr(const RealClip& gt, const RealClip& est, Index exclude);

struct SsimOptions {
    bool windowed = false;  // 11x11 Gaussian (sigma 1.5) windows, averaged
    std::optional<double> dynamic_range;  // defaults to max(gt) over the interior
};

/// SSIM with c1 = (0.01 D)^2, c2 = (0.03 D)^2. The default evaluates the
/// single-window formula with global interior statistics.
double ssim(const RealClip& gt, const RealClip& est, Index exclude, const SsimOptions& opts = {});

struct QualityReport {
    Index exclude = 0;
    std::vector<Psnr> psnr;
    std::vector<double> ssim;
    double mean_psnr_db = 0.0;  // identical frames counted as kPsnrCapDb
    bool all_identical = false;
    double mean_ssim = 0.0;
    Index identical_frames = 0;
};

QualityReport evaluate_video(const RealClip& gt, const RealClip& est, Index exclude,
                             const SsimOptions& opts = {});
QualityReport evaluate_video(const IntClip& gt, const IntClip& est, Index exclude,
                             const SsimOptions& opts = {});

struct TonemapOptions {
    double alpha = 0.9;  // weight of the previous frame's displayed mean
};

/// Temporally smoothed global Reinhard: frame means are blended with the
/// previous displayed mean, then v / (v + Lbar) with Lbar the video mean
/// luminance (channel mean). Output is an 8-bit clip.
IntClip tonemap_video(const RealClip& hdr, const TonemapOptions& opts = {});

/// The same global Reinhard curve applied to each frame with no temporal
/// adjustment. Reference pipeline for flicker comparisons.
IntClip tonemap_unsmoothed(const RealClip& hdr);

/// Mean luminance of every frame.
std::vector<double> frame_means(const RealClip& clip);

} // namespace modvid
