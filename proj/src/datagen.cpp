// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "modvid/clip_io.hpp"
#include "modvid/modulo.hpp"
#include "modvid/parallel.hpp"
#include "modvid/rng.hpp"

namespace modvid {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string tuple_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "video_%03zu", i);
    return buf;
}

} // namespace

SceneSpec random_scene(const SceneRandomization& r, std::uint64_t seed) {
    Rng rng(seed);
    SceneSpec s;
    s.width = r.width;
    s.height = r.height;
    s.frames = r.frames;
    s.channels = r.channels;
    s.seed = seed;
    const auto n = rng.integer(r.min_blobs, r.max_blobs);
    for (std::int64_t i = 0; i < n; ++i) {
        Blob b;
        b.x0 = rng.uniform(0.0, static_cast<double>(r.width));
        b.y0 = rng.uniform(0.0, static_cast<double>(r.height));
        b.vx = rng.uniform(-r.speed_max, r.speed_max);
        b.vy = rng.uniform(-r.speed_max, r.speed_max);
        b.sigma = rng.uniform(r.sigma_min, r.sigma_max);
        b.amplitude = rng.uniform(0.3, 1.0);
        s.blobs.push_back(b);
    }
    s.base = rng.uniform(0.0, r.base_max);
    s.ramp_angle = rng.uniform(0.0, 6.283185307179586);
    s.ramp_slope = rng.uniform(0.0, r.ramp_slope_max);
    s.ramp_speed = rng.uniform(-r.speed_max, r.speed_max);
    return s;
}

RealClip render_scene(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0 || spec.frames <= 0 || spec.channels <= 0)
        throw InvalidArgument("render_scene: non-positive extent");
    RealClip out(spec.frames, spec.height, spec.width, spec.channels);

    // Per-channel tint; channel 0 is the reference.
    Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<double> tint(static_cast<std::size_t>(spec.channels), 1.0);
    for (std::size_t c = 1; c < tint.size(); ++c) tint[c] = rng.uniform(0.7, 1.0);

    const double cx = std::cos(spec.ramp_angle), sy = std::sin(spec.ramp_angle);
    const double half = 0.5 * static_cast<double>(spec.width + spec.height);
    for (Index t = 0; t < spec.frames; ++t) {
        const double td = static_cast<double>(t);
        for (Index y = 0; y < spec.height; ++y) {
            for (Index x = 0; x < spec.width; ++x) {
                const double xd = static_cast<double>(x), yd = static_cast<double>(y);
                double v = spec.base;
                for (const Blob& b : spec.blobs) {
                    const double dx = xd - (b.x0 + b.vx * td);
                    const double dy = yd - (b.y0 + b.vy * td);
                    v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
                }
                const double along = cx * (xd - 0.5 * static_cast<double>(spec.width)) +
                                     sy * (yd - 0.5 * static_cast<double>(spec.height)) +
                                     spec.ramp_speed * td + half;
                v += spec.ramp_slope * std::max(0.0, along);
                for (Index c = 0; c < spec.channels; ++c)
                    out(t, y, x, c) = v * tint[static_cast<std::size_t>(c)];
            }
        }
    }
    if (spec.peak_radiance > 0.0) {
        const double top = out.array().maxCoeff();
        if (top > 0.0) out.array() *= spec.peak_radiance / top;
    }
    return out;
}

Exposure re_expose(const RealClip& hdr, double target_over_rate, int bits_a) {
    if (!(target_over_rate >= 0.0) || target_over_rate >= 1.0)
        throw InvalidArgument("re_expose: target over-exposure rate must be in [0, 1)");
    if (!hdr.empty() && hdr.array().minCoeff() < 0.0)
        throw InvalidArgument("re_expose: negative radiance");
    const double limit = std::ldexp(1.0, bits_a);
    const Index n = hdr.size();
    const auto n_over = static_cast<Index>(std::llround(target_over_rate * static_cast<double>(n)));

    double s = 1.0;
    if (n_over == 0) {
        const double top = n > 0 ? hdr.array().maxCoeff() : 0.0;
        if (top >= limit) {
            s = std::nextafter(limit / top, 0.0);
            while (top * s >= limit) s = std::nextafter(s, 0.0);
        }
    } else {
        std::vector<double> sorted(hdr.array().data(), hdr.array().data() + n);
        std::sort(sorted.begin(), sorted.end());
        const double q = sorted[static_cast<std::size_t>(n - n_over)];
        if (!(q > 0.0))
            throw DegenerateInput("re_expose: cannot reach over-exposure rate " +
                                  fmt_double(target_over_rate) + " on a clip whose quantile is 0");
        s = limit / q;
        while (q * s < limit) s = std::nextafter(s, std::numeric_limits<double>::infinity());
    }
    Exposure e{hdr, s};
    e.clip.array() *= s;
    return e;
}

IntClip quantize(const RealClip& hdr, int bits_b) {
    if (bits_b <= 0 || bits_b > 62) throw InvalidArgument("quantize: unsupported bit depth");
    const double top = std::ldexp(1.0, bits_b) - 1.0;
    SampleClip s(hdr.frames(), hdr.height(), hdr.width(), hdr.channels());
    for (Index i = 0; i < hdr.size(); ++i) {
        const double v = hdr.array()[i];
        if (v < 0.0) throw InvalidArgument("quantize: negative radiance");
        s.array()[i] = static_cast<Sample>(std::min(std::floor(v), top));
    }
    return {std::move(s), bits_b};
}

DatasetTuple make_tuple(const IntClip& ground_truth, int bits_a) {
    FoldResult f = fold_clip(ground_truth, bits_a);
    DatasetTuple t;
    t.masks = masks_from_counts(f.counts);
    t.modulo = std::move(f.modulo);
    t.counts = std::move(f.counts);
    t.ground_truth = ground_truth;
    t.ldr = IntClip(ground_truth.samples, bits_a);
    t.ldr.samples.array() = t.ldr.samples.array().min((Sample{1} << bits_a) - 1);
    return t;
}

bool tuple_consistent(const DatasetTuple& t, int bits_a) {
    const FoldResult f = fold_clip(t.ground_truth, bits_a);
    if (!(f.modulo == t.modulo) || f.counts.counts != t.counts.counts) return false;
    SampleClip total(t.counts.counts.frames(), t.counts.counts.height(), t.counts.counts.width(),
                     t.counts.counts.channels());
    for (const auto& m : t.masks) {
        if (!m.bits.same_shape(total)) return false;
        total.array() += m.bits.array().template cast<Sample>();
    }
    if (total != t.counts.counts) return false;
    const Sample top = (Sample{1} << bits_a) - 1;
    return t.ldr.samples.same_shape(t.ground_truth.samples) &&
           (t.ldr.samples.array() == t.ground_truth.samples.array().min(top)).all();
}

std::vector<SynthVideo> synthesize(const SynthConfig& cfg) {
    if (cfg.videos <= 0) throw InvalidArgument("synthesize: need at least one video");
    if (cfg.bits_a <= 0 || cfg.bits_a >= cfg.bits_b)
        throw InvalidArgument("synthesize: bits_a must be below bits_b");
    std::vector<SynthVideo> out(static_cast<std::size_t>(cfg.videos));
    parallel_for(out.size(), [&](std::size_t i) {
        const std::uint64_t seed = cfg.seed * 1000003ULL + i;
        const SceneSpec spec = random_scene(cfg.scene, seed);
        Exposure e = re_expose(render_scene(spec), cfg.over_rate, cfg.bits_a);
        out[i].seed = seed;
        out[i].tuple = make_tuple(quantize(e.clip, cfg.bits_b), cfg.bits_a);
        out[i].hdr = std::move(e.clip);
    });
    return out;
}

void write_dataset(const fs::path& dir, const SynthConfig& cfg, const std::vector<SynthVideo>& videos) {
    fs::create_directories(dir);
    ClipManifest top;
    top.kind = "dataset";
    top.width = cfg.scene.width;
    top.height = cfg.scene.height;
    top.channels = cfg.scene.channels;
    top.bits_a = cfg.bits_a;
    top.bits_b = cfg.bits_b;
    top.seed = cfg.seed;
    top.set_extra("frames_per_video", std::to_string(cfg.scene.frames));
    top.set_extra("over_rate", fmt_double(cfg.over_rate));

    for (std::size_t i = 0; i < videos.size(); ++i) {
        const std::string name = tuple_name(i);
        const fs::path sub = dir / name;
        const DatasetTuple& t = videos[i].tuple;
        ClipMeta meta{"", cfg.bits_a, cfg.bits_b, videos[i].seed, {}};
        if (videos[i].hdr.channels() == 1 || videos[i].hdr.channels() == 3) {
            meta.kind = "hdr";
            save_clip(sub, "hdr", videos[i].hdr, meta);
        }
        meta.kind = "ground_truth";
        save_clip(sub, "gt", t.ground_truth, meta);
        meta.kind = "modulo";
        save_clip(sub, "modulo", t.modulo, meta);
        meta.kind = "counts";
        save_clip(sub, "counts", IntClip(t.counts.counts, std::max(1, cfg.bits_b - cfg.bits_a)), meta);
        meta.kind = "ldr";
        save_clip(sub, "ldr", t.ldr, meta);
        meta.kind = "mask";
        for (const auto& m : t.masks) {
            meta.extra = {{"order", std::to_string(m.order)}};
            save_clip(sub, "mask_k" + std::to_string(m.order),
                      IntClip(m.bits.cast<Sample>(), 1), meta);
        }
        top.frames.push_back(name);
    }
    top.frame_count = static_cast<Index>(top.frames.size());
    write_file(dir / "dataset.manifest", write_manifest(top));
}

std::vector<LoadedTuple> read_dataset(const fs::path& dir) {
    const ClipManifest top = read_manifest(read_file(dir / "dataset.manifest"));
    if (top.kind != "dataset")
        throw ValidationError("dataset.manifest: kind is '" + top.kind + "', expected 'dataset'");
    std::vector<LoadedTuple> out;
    for (const auto& name : top.frames) {
        const fs::path sub = dir / name;
        if (!fs::is_directory(sub))
            throw ValidationError("dataset references missing tuple directory '" + name + "'");
        LoadedTuple lt;
        lt.name = name;
        DatasetTuple& t = lt.tuple;
        t.ground_truth = load_int_clip(sub / "gt.manifest");
        t.modulo = load_int_clip(sub / "modulo.manifest");
        t.counts.counts = load_int_clip(sub / "counts.manifest").samples;
        t.ldr = load_int_clip(sub / "ldr.manifest");
        for (int k = 1; fs::exists(sub / ("mask_k" + std::to_string(k) + ".manifest")); ++k) {
            const IntClip m = load_int_clip(sub / ("mask_k" + std::to_string(k) + ".manifest"));
            t.masks.push_back({m.samples.cast<std::uint8_t>(), k});
        }
        if (!tuple_consistent(t, top.bits_a))
            throw ValidationError("tuple '" + name + "' is not self-consistent");
        out.push_back(std::move(lt));
    }
    return out;
}

} // namespace modvid
