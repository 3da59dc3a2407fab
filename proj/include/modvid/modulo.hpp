// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "modvid/clip.hpp"

namespace modvid {

struct FoldResult {
    IntClip modulo;
    FoldCountMap counts;
};

/// Wraps every sample to its low `target_bits` bits and returns the fold counts.
FoldResult fold_clip(const IntClip& clip, int target_bits);

/// Mask of samples with count >= order.
BinaryFoldMask mask_of_order(const FoldCountMap& counts, int order);

/// Factorises fold counts into nested binary masks of orders 1..max(L).
/// Empty when no sample is folded.
std::vector<BinaryFoldMask> masks_from_counts(const FoldCountMap& counts);

/// out = in + 2^bits_a * mask. The result keeps full integer width; its
/// bit depth grows to hold the largest value.
IntClip apply_mask_update(const IntClip& clip, const BinaryFoldMask& mask, int bits_a);

/// Per-step folding-mask predictor. `predict` receives the running clip
/// F_m^(k) and returns the mask of order k+1 with the same shape.
class MaskPredictor {
public:
    virtual ~MaskPredictor() = default;

    /// Called before the iterations on a window whose first frame has index
    /// `first_frame` in the source video.
    virtual void begin_window(const IntClip& modulo_window, Index first_frame) {
        (void)modulo_window;
        (void)first_frame;
    }

    virtual BinaryFoldMask predict(const IntClip& current, int order) = 0;

    virtual void end_window() {}
};

/// Replays the exact masks of a known ground-truth video.
class OraclePredictor : public MaskPredictor {
public:
    OraclePredictor(const IntClip& truth, int bits_a);

    void begin_window(const IntClip& modulo_window, Index first_frame) override;
    BinaryFoldMask predict(const IntClip& current, int order) override;

private:
    FoldCountMap counts_;
    Index first_ = 0;
};

/// Always predicts the zero mask, i.e. returns the modulo input unchanged.
class IdentityPredictor : public MaskPredictor {
public:
    BinaryFoldMask predict(const IntClip& current, int order) override;
};

struct InferenceResult {
    IntClip reconstruction;
    std::vector<BinaryFoldMask> masks;  // applied (non-zero) masks, orders 1..n
    int predictor_calls = 0;
};

/// Iterative unfolding: while k < 2^(B-A), predict M^(k) and update the clip;
/// stops early on the first all-zero mask.
InferenceResult run_inference(const IntClip& modulo, MaskPredictor& predictor, int bits_b);

struct SlidingResult {
    IntClip video;
    Index windows = 0;
    std::vector<int> iterations;  // applied masks per window
};

/// Step-1 sliding window: every window {T-n_c..T} is unfolded and frame T is
/// taken from it. Frames 0..n_c-1 come from the first window.
SlidingResult sliding_window_reconstruct(const IntClip& video, MaskPredictor& predictor,
                                         int clip_len, int bits_b);

} // namespace modvid
