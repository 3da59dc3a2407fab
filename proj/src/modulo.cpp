// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/modulo.hpp"

#include <string>

namespace modvid {

FoldResult fold_clip(const IntClip& clip, int target_bits) {
    if (target_bits <= 0 || target_bits >= clip.bit_depth)
        throw InvalidArgument("fold_clip: target bits " + std::to_string(target_bits) +
                              " must be in [1, " + std::to_string(clip.bit_depth) + ")");
    const auto& in = clip.samples.array();
    if (in.size() > 0 && in.minCoeff() < 0) throw InvalidData("fold_clip: negative sample");
    clip.validate();

    const Sample mask = (Sample{1} << target_bits) - 1;
    FoldResult r;
    r.modulo = IntClip(clip.samples, target_bits);
    r.counts.counts = clip.samples;
    auto& out = r.modulo.samples.array();
    auto& counts = r.counts.counts.array();
    for (Index i = 0; i < in.size(); ++i) {
        out[i] = in[i] & mask;
        counts[i] = in[i] >> target_bits;
    }
    return r;
}

BinaryFoldMask mask_of_order(const FoldCountMap& counts, int order) {
    const auto& c = counts.counts;
    BinaryFoldMask m{MaskClip(c.frames(), c.height(), c.width(), c.channels()), order};
    m.bits.array() = (c.array() >= order).template cast<std::uint8_t>();
    return m;
}

std::vector<BinaryFoldMask> masks_from_counts(const FoldCountMap& counts) {
    if (!counts.counts.empty() && counts.counts.array().minCoeff() < 0)
        throw InvalidData("masks_from_counts: negative fold count");
    std::vector<BinaryFoldMask> masks;
    const Sample top = counts.max_count();
    masks.reserve(static_cast<std::size_t>(top));
    for (Sample k = 1; k <= top; ++k) masks.push_back(mask_of_order(counts, static_cast<int>(k)));
    return masks;
}

IntClip apply_mask_update(const IntClip& clip, const BinaryFoldMask& mask, int bits_a) {
    if (!clip.samples.same_shape(mask.bits))
        throw InvalidArgument("apply_mask_update: clip " + shape_string(clip.samples) +
                              " vs mask " + shape_string(mask.bits));
    if (!mask.is_binary()) throw InvalidArgument("apply_mask_update: mask is not binary");
    IntClip out = clip;
    out.samples.array() += mask.bits.array().template cast<Sample>() * (Sample{1} << bits_a);
    if (!out.samples.empty()) {
        const Sample top = out.samples.array().maxCoeff();
        while (out.bit_depth < 62 && (Sample{1} << out.bit_depth) <= top) ++out.bit_depth;
    }
    return out;
}

OraclePredictor::OraclePredictor(const IntClip& truth, int bits_a)
    : counts_(fold_clip(truth, bits_a).counts) {}

void OraclePredictor::begin_window(const IntClip& modulo_window, Index first_frame) {
    if (first_frame < 0 || first_frame + modulo_window.frames() > counts_.counts.frames())
        throw InvalidArgument("OraclePredictor: window outside the reference video");
    first_ = first_frame;
}

BinaryFoldMask OraclePredictor::predict(const IntClip& current, int order) {
    FoldCountMap window{counts_.counts.frame_range(first_, current.frames())};
    if (!window.counts.same_shape(current.samples))
        throw ContractViolation("OraclePredictor: reference shape differs from input");
    return mask_of_order(window, order);
}

BinaryFoldMask IdentityPredictor::predict(const IntClip& current, int order) {
    const auto& s = current.samples;
    return {MaskClip(s.frames(), s.height(), s.width(), s.channels()), order};
}

InferenceResult run_inference(const IntClip& modulo, MaskPredictor& predictor, int bits_b) {
    const int bits_a = modulo.bit_depth;
    if (bits_a >= bits_b)
        throw InvalidArgument("run_inference: modulo depth " + std::to_string(bits_a) +
                              " must be below target depth " + std::to_string(bits_b));
    if (bits_b - bits_a > 30) throw InvalidArgument("run_inference: depth gap too large");

    InferenceResult r;
    r.reconstruction = modulo;
    const Sample bound = Sample{1} << (bits_b - bits_a);
    for (Sample order = 1; order < bound; ++order) {
        BinaryFoldMask mask = predictor.predict(r.reconstruction, static_cast<int>(order));
        ++r.predictor_calls;
        if (!mask.bits.same_shape(r.reconstruction.samples))
            throw ContractViolation("predictor returned mask " + shape_string(mask.bits) +
                                    " for clip " + shape_string(r.reconstruction.samples));
        if (!mask.is_binary()) throw ContractViolation("predictor returned a non-binary mask");
        if (mask.is_zero()) break;
        mask.order = static_cast<int>(order);
        r.reconstruction = apply_mask_update(r.reconstruction, mask, bits_a);
        r.masks.push_back(std::move(mask));
    }
    r.reconstruction.bit_depth = bits_b;
    return r;
}

SlidingResult sliding_window_reconstruct(const IntClip& video, MaskPredictor& predictor,
                                         int clip_len, int bits_b) {
    if (clip_len < 0) throw InvalidArgument("sliding_window_reconstruct: negative clip length");
    const Index window = clip_len + 1;
    if (video.frames() < window)
        throw InvalidArgument("sliding_window_reconstruct: video has " +
                              std::to_string(video.frames()) + " frames, window needs " +
                              std::to_string(window));
    SlidingResult r;
    const auto& s = video.samples;
    r.video = IntClip(SampleClip(s.frames(), s.height(), s.width(), s.channels()), bits_b);
    for (Index last = clip_len; last < video.frames(); ++last) {
        const Index first = last - clip_len;
        IntClip clip = video.frame_range(first, window);
        predictor.begin_window(clip, first);
        InferenceResult inf = run_inference(clip, predictor, bits_b);
        predictor.end_window();
        const auto& rec = inf.reconstruction.samples;
        if (first == 0) {
            r.video.samples.set_frames(0, rec);
        } else {
            r.video.samples.set_frames(last, rec.frame(window - 1));
        }
        r.iterations.push_back(static_cast<int>(inf.masks.size()));
        ++r.windows;
    }
    return r;
}

} // namespace modvid
