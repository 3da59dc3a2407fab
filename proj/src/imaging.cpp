// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/imaging.hpp"

#include <cmath>
#include <string>

#include "modvid/parallel.hpp"

namespace modvid {

namespace {

void check_pair(const RealClip& gt, const RealClip& est, Index exclude, const char* what) {
    if (!gt.same_shape(est))
        throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(gt) + " vs " +
                              shape_string(est));
    if (gt.frames() != 1)
        throw InvalidArgument(std::string(what) + ": expected single frames");
    if (exclude < 0 || 2 * exclude >= std::min(gt.height(), gt.width()))
        throw InvalidArgument(std::string(what) + ": exclusion width " + std::to_string(exclude) +
                              " leaves no interior");
}

// Interior samples, row-major with channels fastest.
Eigen::ArrayXd interior(const RealClip& f, Index exclude) {
    const Index h = f.height() - 2 * exclude, w = f.width() - 2 * exclude, c = f.channels();
    Eigen::ArrayXd out(h * w * c);
    Index i = 0;
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index k = 0; k < c; ++k) out[i++] = f(0, y + exclude, x + exclude, k);
    return out;
}

double covariance(const Eigen::ArrayXd& a, double mu_a, const Eigen::ArrayXd& b, double mu_b) {
    return ((a - mu_a) * (b - mu_b)).mean();
}

double ssim_formula(double mu_a, double mu_b, double var_a, double var_b, double cov, double c1,
                    double c2) {
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

Eigen::ArrayXXd gaussian_window(int size, double sigma) {
    Eigen::ArrayXXd w(size, size);
    const int half = size / 2;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            w(y, x) = std::exp(-((y - half) * (y - half) + (x - half) * (x - half)) /
                               (2.0 * sigma * sigma));
    return w / w.sum();
}

double windowed_ssim(const RealClip& gt, const RealClip& est, Index exclude, double c1, double c2) {
    constexpr int kSize = 11;
    const Eigen::ArrayXXd win = gaussian_window(kSize, 1.5);
    const Index h = gt.height() - 2 * exclude, w = gt.width() - 2 * exclude;
    if (h < kSize || w < kSize)
        throw InvalidArgument("ssim: interior smaller than the 11x11 window");
    double total = 0.0;
    Index count = 0;
    for (Index c = 0; c < gt.channels(); ++c) {
        for (Index y0 = exclude; y0 + kSize <= exclude + h; ++y0) {
            for (Index x0 = exclude; x0 + kSize <= exclude + w; ++x0) {
                double ma = 0, mb = 0;
                for (int y = 0; y < kSize; ++y)
                    for (int x = 0; x < kSize; ++x) {
                        ma += win(y, x) * gt(0, y0 + y, x0 + x, c);
                        mb += win(y, x) * est(0, y0 + y, x0 + x, c);
                    }
                double va = 0, vb = 0, cov = 0;
                for (int y = 0; y < kSize; ++y)
                    for (int x = 0; x < kSize; ++x) {
                        const double da = gt(0, y0 + y, x0 + x, c) - ma;
                        const double db = est(0, y0 + y, x0 + x, c) - mb;
                        va += win(y, x) * da * da;
                        vb += win(y, x) * db * db;
                        cov += win(y, x) * da * db;
                    }
                total += ssim_formula(ma, mb, va, vb, cov, c1, c2);
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

Eigen::ArrayXd luminance(const RealClip& clip, Index t) {
    const Index n = clip.height() * clip.width();
    Eigen::ArrayXd out(n);
    const auto f = clip.frame_array(t);
    for (Index p = 0; p < n; ++p) out[p] = f.segment(p * clip.channels(), clip.channels()).mean();
    return out;
}

void check_hdr(const RealClip& hdr) {
    if (!hdr.empty() && hdr.array().minCoeff() < 0.0)
        throw InvalidArgument("tonemap: negative radiance");
    if (!hdr.array().isFinite().all()) throw InvalidArgument("tonemap: non-finite radiance");
}

IntClip reinhard(const RealClip& hdr, const std::vector<double>& frame_scale, double key) {
    IntClip out(SampleClip(hdr.frames(), hdr.height(), hdr.width(), hdr.channels()), 8);
    if (key <= 0.0) return out;
    for (Index t = 0; t < hdr.frames(); ++t) {
        const double s = frame_scale[static_cast<std::size_t>(t)];
        auto dst = out.samples.frame_array(t);
        const auto src = hdr.frame_array(t);
        for (Index i = 0; i < src.size(); ++i) {
            const double v = src[i] * s;
            dst[i] = static_cast<Sample>(std::lround(255.0 * v / (v + key)));
        }
    }
    return out;
}

} // namespace

Psnr psnr(const RealClip& gt, const RealClip& est, Index exclude) {
    check_pair(gt, est, exclude, "psnr");
    const Eigen::ArrayXd a = interior(gt, exclude);
    const Eigen::ArrayXd b = interior(est, exclude);
    const double mse = (a - b).square().mean();
    if (mse == 0.0) return Psnr::identical();
    const double peak = a.maxCoeff();
    if (!(peak > 0.0)) throw DegenerateInput("psnr: ground truth peak is not positive");
    return {20.0 * std::log10(peak / std::sqrt(mse)), false};
}

double ssim(const RealClip& gt, const RealClip& est, Index exclude, const SsimOptions& opts) {
    check_pair(gt, est, exclude, "ssim");
    const Eigen::ArrayXd a = interior(gt, exclude);
    const Eigen::ArrayXd b = interior(est, exclude);
    const double range = opts.dynamic_range.value_or(a.maxCoeff());
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    if (opts.windowed) return windowed_ssim(gt, est, exclude, c1, c2);
    const double mu_a = a.mean(), mu_b = b.mean();
    const double var_a = covariance(a, mu_a, a, mu_a);
    const double var_b = covariance(b, mu_b, b, mu_b);
    const double cov = covariance(a, mu_a, b, mu_b);
    return ssim_formula(mu_a, mu_b, var_a, var_b, cov, c1, c2);
}

QualityReport evaluate_video(const RealClip& gt, const RealClip& est, Index exclude,
                             const SsimOptions& opts) {
    if (!gt.same_shape(est))
        throw InvalidArgument("evaluate_video: shape mismatch " + shape_string(gt) + " vs " +
                              shape_string(est));
    QualityReport r;
    r.exclude = exclude;
    const auto n = static_cast<std::size_t>(gt.frames());
    r.psnr.resize(n);
    r.ssim.resize(n);
    parallel_for(n, [&](std::size_t t) {
        const RealClip a = gt.frame(static_cast<Index>(t));
        const RealClip b = est.frame(static_cast<Index>(t));
        r.psnr[t] = psnr(a, b, exclude);
        r.ssim[t] = ssim(a, b, exclude, opts);
    });
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (r.psnr[t].infinite) ++r.identical_frames;
        psnr_sum += r.psnr[t].infinite ? kPsnrCapDb : r.psnr[t].db;
        ssim_sum += r.ssim[t];
    }
    if (n > 0) {
        r.mean_psnr_db = psnr_sum / static_cast<double>(n);
        r.mean_ssim = ssim_sum / static_cast<double>(n);
    }
    r.all_identical = n > 0 && r.identical_frames == static_cast<Index>(n);
    return r;
}

QualityReport evaluate_video(const IntClip& gt, const IntClip& est, Index exclude,
                             const SsimOptions& opts) {
    return evaluate_video(gt.samples.cast<double>(), est.samples.cast<double>(), exclude, opts);
}

std::vector<double> frame_means(const RealClip& clip) {
    std::vector<double> out;
    for (Index t = 0; t < clip.frames(); ++t) out.push_back(luminance(clip, t).mean());
    return out;
}

IntClip tonemap_video(const RealClip& hdr, const TonemapOptions& opts) {
    check_hdr(hdr);
    if (opts.alpha < 0.0 || opts.alpha >= 1.0)
        throw InvalidArgument("tonemap: alpha must be in [0, 1)");
    const std::vector<double> means = frame_means(hdr);
    double key = 0.0;
    for (double m : means) key += m;
    if (!means.empty()) key /= static_cast<double>(means.size());

    std::vector<double> scale(means.size(), 1.0);
    double shown = 0.0;
    for (std::size_t t = 0; t < means.size(); ++t) {
        shown = t == 0 ? means[t] : opts.alpha * shown + (1.0 - opts.alpha) * means[t];
        scale[t] = means[t] > 0.0 ? shown / means[t] : 1.0;
    }
    return reinhard(hdr, scale, key);
}

IntClip tonemap_unsmoothed(const RealClip& hdr) {
    check_hdr(hdr);
    const std::vector<double> means = frame_means(hdr);
    double key = 0.0;
    for (double m : means) key += m;
    if (!means.empty()) key /= static_cast<double>(means.size());
    return reinhard(hdr, std::vector<double>(means.size(), 1.0), key);
}

} // namespace modvid
