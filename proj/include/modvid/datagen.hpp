// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modvid/clip.hpp"

namespace modvid {

/// Gaussian radiance blob moving linearly: centre (x0 + vx t, y0 + vy t).
struct Blob {
    double x0 = 0, y0 = 0;
    double vx = 0, vy = 0;
    double sigma = 4;
    double amplitude = 1;
};

struct SceneSpec {
    Index width = 32;
    Index height = 32;
    Index frames = 12;
    Index channels = 1;
    std::vector<Blob> blobs;
    double base = 0.0;        // constant radiance floor
    double ramp_angle = 0.0;  // radians; direction of increasing radiance
    double ramp_slope = 0.0;  // radiance per pixel along the ramp direction
    double ramp_speed = 0.0;  // pixels per frame the ramp drifts
    double peak_radiance = 0.0;  // > 0 rescales so the clip maximum equals it
    std::uint64_t seed = 0;
};

/// Ranges for randomly drawn scenes.
struct SceneRandomization {
    Index width = 32;
    Index height = 32;
    Index frames = 12;
    Index channels = 1;
    int min_blobs = 2;
    int max_blobs = 4;
    double sigma_min = 3.0;
    double sigma_max = 8.0;
    double speed_max = 1.0;
    double ramp_slope_max = 0.03;
    double base_max = 0.05;
};

SceneSpec random_scene(const SceneRandomization& r, std::uint64_t seed);

/// Renders blobs + ramp radiance; deterministic in the spec.
RealClip render_scene(const SceneSpec& spec);

struct Exposure {
    RealClip clip;
    double scale = 1.0;
};

/// Scales the whole video by one factor so the fraction of samples >= 2^A
/// matches `target_over_rate` to within one sample.
Exposure re_expose(const RealClip& hdr, double target_over_rate, int bits_a);

/// floor(v) clamped to [0, 2^B - 1].
IntClip quantize(const RealClip& hdr, int bits_b);

struct DatasetTuple {
    IntClip modulo;
    IntClip ground_truth;
    FoldCountMap counts;
    std::vector<BinaryFoldMask> masks;
    IntClip ldr;
};

DatasetTuple make_tuple(const IntClip& ground_truth, int bits_a);

/// Re-folds the ground truth and checks every derived field.
bool tuple_consistent(const DatasetTuple& t, int bits_a);

struct SynthConfig {
    int videos = 72;
    SceneRandomization scene;
    int bits_a = 8;
    int bits_b = 10;
    double over_rate = 0.5;
    std::uint64_t seed = 1;
};

struct SynthVideo {
    RealClip hdr;  // re-exposed radiance
    DatasetTuple tuple;
    std::uint64_t seed = 0;
};

/// render -> re_expose -> quantize -> make_tuple for every video. Video i
/// uses seed `cfg.seed * 1000003 + i`.
std::vector<SynthVideo> synthesize(const SynthConfig& cfg);

/// Dataset directory: `dataset.manifest` lists tuple sub-directories, each
/// holding hdr/gt/modulo/counts/ldr/mask_kN clip manifests.
void write_dataset(const std::filesystem::path& dir, const SynthConfig& cfg,
                   const std::vector<SynthVideo>& videos);

struct LoadedTuple {
    std::string name;
    DatasetTuple tuple;
};

std::vector<LoadedTuple> read_dataset(const std::filesystem::path& dir);

} // namespace modvid
