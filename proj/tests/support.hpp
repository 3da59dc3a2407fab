// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-rolled generators and independent reference implementations used by
// the unit and acceptance tests. Nothing here calls into the code under test
// except for plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "modvid/clip.hpp"
#include "modvid/flow.hpp"
#include "modvid/rng.hpp"
#include "modvid/tensor.hpp"
#include "modvid/token_select.hpp"

namespace modvid::testing {

inline SampleClip random_samples(Rng& rng, Index f, Index h, Index w, Index c, Sample lo,
                                 Sample hi) {
    SampleClip s(f, h, w, c);
    for (Index i = 0; i < s.size(); ++i) s.array()[i] = rng.integer(lo, hi);
    return s;
}

inline IntClip random_clip(Rng& rng, Index f, Index h, Index w, Index c, int bits) {
    return {random_samples(rng, f, h, w, c, 0, (Sample{1} << bits) - 1), bits};
}

inline MaskClip random_mask(Rng& rng, Index f, Index h, Index w, Index c, double p = 0.5) {
    MaskClip m(f, h, w, c);
    for (Index i = 0; i < m.size(); ++i) m.array()[i] = rng.uniform() < p ? 1 : 0;
    return m;
}

inline RealClip random_real(Rng& rng, Index f, Index h, Index w, Index c, double lo, double hi) {
    RealClip r(f, h, w, c);
    for (Index i = 0; i < r.size(); ++i) r.array()[i] = rng.uniform(lo, hi);
    return r;
}

inline EmbeddingVolume random_volume(Rng& rng, Index l, Index h, Index w, Index d) {
    EmbeddingVolume v(l, h, w, d);
    for (Index i = 0; i < v.features().size(); ++i) v.features().data()[i] = rng.normal();
    return v;
}

/// A scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("modvid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

// --- Finite differences

struct GradCheck {
    double max_rel = 0.0;
    double max_abs = 0.0;
    Index checked = 0;
};

/// Central differences (step h) of a scalar function of the given leaves
/// against the reverse-mode gradient. Relative error is |a - n| / max(|a|, |n|),
/// with components whose magnitude is below `floor` compared absolutely
/// against `floor * rel_tol`-scale noise instead.
inline GradCheck check_gradients(const std::function<nd::Tensor()>& loss_fn,
                                 std::vector<nd::Tensor> leaves, double h = 1e-5,
                                 double floor = 1e-4) {
    for (auto& t : leaves) t.zero_grad();
    const nd::Tensor loss = loss_fn();
    nd::backward(loss);
    std::vector<nd::Vector> analytic;
    for (auto& t : leaves) analytic.push_back(t.grad());

    GradCheck out;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        nd::Vector& v = leaves[li].mutable_values();
        for (Index i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            double plus, minus;
            {
                nd::NoGradGuard g;
                v[i] = keep + h;
                plus = loss_fn().item();
                v[i] = keep - h;
                minus = loss_fn().item();
            }
            v[i] = keep;
            const double numeric = (plus - minus) / (2.0 * h);
            const double a = analytic[li][i];
            const double diff = std::abs(a - numeric);
            const double scale = std::max({std::abs(a), std::abs(numeric), floor});
            out.max_rel = std::max(out.max_rel, diff / scale);
            out.max_abs = std::max(out.max_abs, diff);
            ++out.checked;
        }
    }
    return out;
}

inline nd::Tensor random_tensor(Rng& rng, nd::Shape shape, bool requires_grad = true,
                                double scale = 1.0) {
    nd::Vector v(nd::numel(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
    return nd::Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

/// sum(w .* y) with fixed random weights, so every output element matters.
inline nd::Tensor weighted_sum(const nd::Tensor& y, const nd::Vector& w) {
    return nd::sum(nd::mul(y, nd::Tensor::from_values(y.shape(), w)));
}

// --- Reference NSM: literal triple loop with clamped indices

struct NaiveNsm {
    double kl = 0, cos = 0, total = 0;
    bool degenerate = false;
};

inline NaiveNsm naive_nsm(const EmbeddingVolume& vol, Index s, Index u, Index v, int r,
                          bool as_printed = false) {
    auto clampi = [](Index x, Index n) { return std::min(std::max(x, Index{0}), n - 1); };
    const Index d = vol.dim();
    std::vector<double> centre(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) centre[j] = vol.features()(vol.token_index({s, u, v}), j);
    std::vector<std::vector<double>> nb;
    for (int ds = -r; ds <= r; ++ds)
        for (int du = -r; du <= r; ++du)
            for (int dv = -r; dv <= r; ++dv) {
                const TokenCoord c{clampi(s + ds, vol.length()), clampi(u + du, vol.height()),
                                   clampi(v + dv, vol.width())};
                std::vector<double> f(static_cast<std::size_t>(d));
                for (Index j = 0; j < d; ++j) f[j] = vol.features()(vol.token_index(c), j);
                nb.push_back(f);
            }
    const double n = static_cast<double>(nb.size());
    std::vector<double> dots;
    for (const auto& f : nb) {
        double acc = 0;
        for (Index j = 0; j < d; ++j) acc += centre[j] * f[j];
        dots.push_back(acc);
    }
    const double mx = *std::max_element(dots.begin(), dots.end());
    double z = 0;
    for (double x : dots) z += std::exp(x - mx);
    NaiveNsm out;
    double kl = 0;
    for (double x : dots) {
        const double p = std::exp(x - mx) / z;
        const double pu = 1.0 / n;
        kl += pu * std::log(pu / std::max(p, 1e-12));
    }
    out.kl = as_printed ? -kl : kl;
    double cn = 0;
    for (double x : centre) cn += x * x;
    cn = std::sqrt(cn);
    if (cn == 0.0) {
        out.degenerate = true;
        return out;
    }
    double cs = 0;
    for (const auto& f : nb) {
        double fn = 0, dot = 0;
        for (Index j = 0; j < d; ++j) {
            fn += f[j] * f[j];
            dot += f[j] * centre[j];
        }
        fn = std::sqrt(fn);
        const double cosv = fn == 0.0 ? 0.0 : dot / (cn * fn);
        cs += 1.0 - cosv;
    }
    out.cos = cs / n;
    out.total = out.kl + out.cos;
    return out;
}

// --- Reference warp: per-pixel loop straight from the definition

inline MaskClip naive_warp(const MaskClip& prev, const FlowField& f) {
    MaskClip out(1, prev.height(), prev.width(), prev.channels());
    for (Index y = 0; y < prev.height(); ++y)
        for (Index x = 0; x < prev.width(); ++x) {
            const Index by = std::min(y / f.block, f.grid_rows - 1);
            const Index bx = std::min(x / f.block, f.grid_cols - 1);
            const int dx = f.dx[by * f.grid_cols + bx], dy = f.dy[by * f.grid_cols + bx];
            const Index sy = std::clamp<Index>(y - dy, 0, prev.height() - 1);
            const Index sx = std::clamp<Index>(x - dx, 0, prev.width() - 1);
            for (Index c = 0; c < prev.channels(); ++c) out(0, y, x, c) = prev(0, sy, sx, c);
        }
    return out;
}

// --- Reference metrics in long double

inline long double ld_psnr(const RealClip& gt, const RealClip& est, Index ex) {
    long double peak = 0, se = 0, n = 0;
    for (Index y = ex; y < gt.height() - ex; ++y)
        for (Index x = ex; x < gt.width() - ex; ++x)
            for (Index c = 0; c < gt.channels(); ++c) {
                const long double a = gt(0, y, x, c), b = est(0, y, x, c);
                peak = std::max(peak, a);
                se += (a - b) * (a - b);
                n += 1;
            }
    return 10.0L * std::log10(peak * peak / (se / n));
}

inline long double ld_global_ssim(const RealClip& gt, const RealClip& est, Index ex,
                                  long double range) {
    std::vector<long double> a, b;
    for (Index y = ex; y < gt.height() - ex; ++y)
        for (Index x = ex; x < gt.width() - ex; ++x)
            for (Index c = 0; c < gt.channels(); ++c) {
                a.push_back(gt(0, y, x, c));
                b.push_back(est(0, y, x, c));
            }
    const long double n = static_cast<long double>(a.size());
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double va = 0, vb = 0, cab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cab += (a[i] - ma) * (b[i] - mb);
    }
    va /= n;
    vb /= n;
    cab /= n;
    const long double c1 = (0.01L * range) * (0.01L * range), c2 = (0.03L * range) * (0.03L * range);
    return ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

} // namespace modvid::testing
