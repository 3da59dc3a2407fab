// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/token_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "modvid/parallel.hpp"

namespace modvid {

namespace {

constexpr double kProbFloor = 1e-12;

Index clamp_index(Index i, Index n) { return std::clamp<Index>(i, 0, n - 1); }

} // namespace

EmbeddingVolume::EmbeddingVolume(Index length, Index height, Index width, Index dim)
    : EmbeddingVolume(length, height, width, FeatureMatrix::Zero(length * height * width, dim)) {}

EmbeddingVolume::EmbeddingVolume(Index length, Index height, Index width, FeatureMatrix features)
    : length_(length), height_(height), width_(width), features_(std::move(features)) {
    if (length < 0 || height < 0 || width < 0)
        throw InvalidArgument("EmbeddingVolume: negative extent");
    if (features_.rows() != length * height * width)
        throw InvalidArgument("EmbeddingVolume: feature rows " + std::to_string(features_.rows()) +
                              " do not match grid " + std::to_string(length * height * width));
    if (features_.rows() > 0 && features_.cols() < 1)
        throw InvalidArgument("EmbeddingVolume: feature dimension must be >= 1");
}

TokenCoord EmbeddingVolume::coord(Index token) const {
    return {token / (height_ * width_), (token / width_) % height_, token % width_};
}

FeatureMatrix EmbeddingVolume::neighborhood(const TokenCoord& c, int radius) const {
    FeatureMatrix local(neighborhood_size(radius), dim());
    Index row = 0;
    for (Index ds = -radius; ds <= radius; ++ds)
        for (Index du = -radius; du <= radius; ++du)
            for (Index dv = -radius; dv <= radius; ++dv) {
                const TokenCoord n{clamp_index(c.s + ds, length_), clamp_index(c.u + du, height_),
                                   clamp_index(c.v + dv, width_)};
                local.row(row++) = feature(n);
            }
    return local;
}

Eigen::VectorXd similarity_distribution(const EmbeddingVolume& vol, const TokenCoord& c,
                                        int radius) {
    if (radius < 1) throw InvalidArgument("similarity_distribution: radius must be >= 1");
    if (c.s < 0 || c.s >= vol.length() || c.u < 0 || c.u >= vol.height() || c.v < 0 ||
        c.v >= vol.width())
        throw InvalidArgument("similarity_distribution: coordinate out of bounds");
    const FeatureMatrix local = vol.neighborhood(c, radius);
    Eigen::VectorXd logits = local * vol.feature(c).transpose();
    const double top = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - top).exp();
    return p / p.sum();
}

NsmScore nsm_score(const EmbeddingVolume& vol, const TokenCoord& c, const NsmOptions& opts) {
    const Eigen::VectorXd p_sim = similarity_distribution(vol, c, opts.radius);
    const Index nb = p_sim.size();
    const double p_u = 1.0 / static_cast<double>(nb);

    NsmScore s;
    const double center_norm = vol.feature(c).norm();
    if (center_norm == 0.0) {
        s.degenerate = true;
        return s;
    }

    double kl = 0.0;
    for (Index i = 0; i < nb; ++i) kl += p_u * std::log(p_u / std::max(p_sim[i], kProbFloor));
    s.kl = opts.kl == KlConvention::Divergence ? kl : -kl;

    const FeatureMatrix local = vol.neighborhood(c, opts.radius);
    double cos_sum = 0.0;
    for (Index i = 0; i < nb; ++i) {
        const double n = local.row(i).norm();
        const double cosine = n == 0.0 ? 0.0 : local.row(i).dot(vol.feature(c)) / (n * center_norm);
        cos_sum += 1.0 - cosine;
    }
    s.cos = cos_sum / static_cast<double>(nb);
    s.total = s.kl + s.cos;
    return s;
}

NsmScoreVolume nsm_scores(const EmbeddingVolume& vol, const NsmOptions& opts) {
    NsmScoreVolume out;
    out.length = vol.length();
    out.height = vol.height();
    out.width = vol.width();
    out.radius = opts.radius;
    out.scores = Eigen::VectorXd::Zero(vol.tokens());
    out.degenerate.assign(static_cast<std::size_t>(vol.tokens()), 0);
    parallel_for(static_cast<std::size_t>(vol.tokens()), [&](std::size_t i) {
        const NsmScore s = nsm_score(vol, vol.coord(static_cast<Index>(i)), opts);
        out.scores[static_cast<Index>(i)] = s.total;
        out.degenerate[i] = s.degenerate ? 1 : 0;
    });
    return out;
}

Index selection_count(Index total, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw InvalidArgument("selection fraction must be in (0, 1], got " + std::to_string(fraction));
    // The small slack keeps exact products such as 0.1 * 30 from rounding up.
    const double raw = fraction * static_cast<double>(total);
    const auto n = static_cast<Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::clamp<Index>(n, 1, total);
}

SelectionResult select_from_scores(const EmbeddingVolume& vol, const NsmScoreVolume& scores,
                                   double fraction) {
    if (vol.empty()) throw InvalidArgument("select_tokens: empty volume");
    const Index total = vol.tokens();
    const Index keep = selection_count(total, fraction);

    std::vector<Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return scores.scores[a] > scores.scores[b];
    });

    SelectionResult r;
    r.selected_tokens.resize(keep, vol.dim());
    std::vector<std::uint8_t> chosen(static_cast<std::size_t>(total), 0);
    for (Index i = 0; i < keep; ++i) {
        const Index t = order[static_cast<std::size_t>(i)];
        r.selected.push_back(vol.coord(t));
        r.selected_tokens.row(i) = vol.features().row(t);
        chosen[static_cast<std::size_t>(t)] = 1;
    }
    for (Index t = 0; t < total; ++t)
        if (!chosen[static_cast<std::size_t>(t)]) r.complement.push_back(vol.coord(t));
    return r;
}

SelectionResult select_tokens(const EmbeddingVolume& vol, const NsmOptions& opts, double fraction) {
    if (vol.empty()) throw InvalidArgument("select_tokens: empty volume");
    return select_from_scores(vol, nsm_scores(vol, opts), fraction);
}

} // namespace modvid
