// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "modvid/errors.hpp"

namespace modvid {

using Index = Eigen::Index;

/// Dense video block laid out as frames x height x width x channels,
/// channel fastest. Used for integer samples, masks and real radiance alike.
template <typename Scalar>
class Clip {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Clip() = default;

    Clip(Index frames, Index height, Index width, Index channels, Scalar fill = Scalar(0))
        : frames_(frames), height_(height), width_(width), channels_(channels) {
        if (frames < 0 || height < 0 || width < 0 || channels < 0)
            throw InvalidArgument("Clip: negative dimension");
        data_ = Storage::Constant(frames * height * width * channels, fill);
    }

    Index frames() const { return frames_; }
    Index height() const { return height_; }
    Index width() const { return width_; }
    Index channels() const { return channels_; }
    Index size() const { return data_.size(); }
    Index frame_size() const { return height_ * width_ * channels_; }
    bool empty() const { return data_.size() == 0; }

    Index offset(Index t, Index y, Index x, Index c) const {
        return ((t * height_ + y) * width_ + x) * channels_ + c;
    }

    Scalar& operator()(Index t, Index y, Index x, Index c) { return data_[offset(t, y, x, c)]; }
    Scalar operator()(Index t, Index y, Index x, Index c) const { return data_[offset(t, y, x, c)]; }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }

    auto frame_array(Index t) { return data_.segment(t * frame_size(), frame_size()); }
    auto frame_array(Index t) const { return data_.segment(t * frame_size(), frame_size()); }

    bool same_shape(const Clip& o) const {
        return frames_ == o.frames_ && height_ == o.height_ && width_ == o.width_ &&
               channels_ == o.channels_;
    }

    template <typename Other>
    bool same_shape(const Clip<Other>& o) const {
        return frames_ == o.frames() && height_ == o.height() && width_ == o.width() &&
               channels_ == o.channels();
    }

    Clip frame_range(Index first, Index count) const {
        if (first < 0 || count < 0 || first + count > frames_)
            throw InvalidArgument("Clip::frame_range: range out of bounds");
        Clip out(count, height_, width_, channels_);
        out.data_ = data_.segment(first * frame_size(), count * frame_size());
        return out;
    }

    Clip frame(Index t) const { return frame_range(t, 1); }

    /// Copies all frames of `src` into this clip starting at frame `first`.
    void set_frames(Index first, const Clip& src) {
        if (src.height_ != height_ || src.width_ != width_ || src.channels_ != channels_ ||
            first < 0 || first + src.frames_ > frames_)
            throw InvalidArgument("Clip::set_frames: shape mismatch");
        data_.segment(first * frame_size(), src.size()) = src.data_;
    }

    template <typename Other>
    Clip<Other> cast() const {
        Clip<Other> out(frames_, height_, width_, channels_);
        out.array() = data_.template cast<Other>();
        return out;
    }

    bool operator==(const Clip& o) const {
        return same_shape(o) && (data_ == o.data_).all();
    }
    bool operator!=(const Clip& o) const { return !(*this == o); }

private:
    Index frames_ = 0;
    Index height_ = 0;
    Index width_ = 0;
    Index channels_ = 0;
    Storage data_;
};

using Sample = std::int64_t;
using SampleClip = Clip<Sample>;
using MaskClip = Clip<std::uint8_t>;
using RealClip = Clip<double>;

inline std::string shape_string(Index f, Index h, Index w, Index c) {
    return std::to_string(f) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
           std::to_string(c);
}

template <typename Scalar>
std::string shape_string(const Clip<Scalar>& c) {
    return shape_string(c.frames(), c.height(), c.width(), c.channels());
}

/// Integer video at a declared bit depth (ground truth, modulo samples, or a
/// partially unfolded intermediate).
struct IntClip {
    SampleClip samples;
    int bit_depth = 0;

    IntClip() = default;
    IntClip(SampleClip s, int bits) : samples(std::move(s)), bit_depth(bits) {}

    Index frames() const { return samples.frames(); }

    /// True when every sample lies in [0, 2^bit_depth).
    bool valid() const;
    /// Throws InvalidData naming the first out-of-range sample.
    void validate() const;

    IntClip frame_range(Index first, Index count) const {
        return {samples.frame_range(first, count), bit_depth};
    }

    bool operator==(const IntClip& o) const {
        return bit_depth == o.bit_depth && samples == o.samples;
    }
};

/// Per-sample fold counts L with F = F_m + 2^A * L.
struct FoldCountMap {
    SampleClip counts;

    Sample max_count() const { return counts.empty() ? 0 : counts.array().maxCoeff(); }
};

/// Indicator of samples whose fold count is at least `order`.
struct BinaryFoldMask {
    MaskClip bits;
    int order = 1;

    bool is_zero() const { return bits.empty() || (bits.array() == 0).all(); }
    bool is_binary() const { return (bits.array() <= 1).all(); }
    Index count() const { return bits.array().template cast<Index>().sum(); }
};

} // namespace modvid
