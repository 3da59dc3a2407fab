// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "modvid/errors.hpp"

namespace modvid {

using Index = Eigen::Index;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Token position (time, row, column) in an embedding volume.
struct TokenCoord {
    Index s = 0;
    Index u = 0;
    Index v = 0;

    auto operator<=>(const TokenCoord&) const = default;
};

/// l x h x w grid of d_q-dimensional features, stored one token per row in
/// raster order (s, then u, then v).
class EmbeddingVolume {
public:
    EmbeddingVolume() = default;
    EmbeddingVolume(Index length, Index height, Index width, Index dim);
    EmbeddingVolume(Index length, Index height, Index width, FeatureMatrix features);

    Index length() const { return length_; }
    Index height() const { return height_; }
    Index width() const { return width_; }
    Index dim() const { return features_.cols(); }
    Index tokens() const { return features_.rows(); }
    bool empty() const { return tokens() == 0; }

    Index token_index(const TokenCoord& c) const { return (c.s * height_ + c.u) * width_ + c.v; }
    TokenCoord coord(Index token) const;

    auto feature(const TokenCoord& c) const { return features_.row(token_index(c)); }
    auto feature(const TokenCoord& c) { return features_.row(token_index(c)); }

    const FeatureMatrix& features() const { return features_; }
    FeatureMatrix& features() { return features_; }

    /// Features of the (2r+1)^3 neighbourhood around `c`, edge-replicated,
    /// ordered by (ds, du, dv) raster offsets. The centre is included.
    FeatureMatrix neighborhood(const TokenCoord& c, int radius) const;

private:
    Index length_ = 0;
    Index height_ = 0;
    Index width_ = 0;
    FeatureMatrix features_;
};

/// How the KL term is oriented. `Divergence` is KL(p_u || p_sim) >= 0;
/// `AsPrinted` is sum p_u log(p_sim / p_u), its negation.
enum class KlConvention { Divergence, AsPrinted };

struct NsmOptions {
    int radius = 1;
    KlConvention kl = KlConvention::Divergence;
};

struct NsmScore {
    double kl = 0.0;
    double cos = 0.0;
    double total = 0.0;
    bool degenerate = false;  // zero-norm centre feature; total forced to 0
};

inline Index neighborhood_size(int radius) {
    const Index side = 2 * radius + 1;
    return side * side * side;
}

/// Softmax of the dot products between the centre feature and its neighbourhood.
Eigen::VectorXd similarity_distribution(const EmbeddingVolume& vol, const TokenCoord& c,
                                        int radius);

NsmScore nsm_score(const EmbeddingVolume& vol, const TokenCoord& c, const NsmOptions& opts = {});

struct NsmScoreVolume {
    Index length = 0, height = 0, width = 0;
    int radius = 1;
    Eigen::VectorXd scores;               // raster order
    std::vector<std::uint8_t> degenerate;  // per token
};

/// Scores every token; parallel over tokens when the thread count allows.
NsmScoreVolume nsm_scores(const EmbeddingVolume& vol, const NsmOptions& opts = {});

struct SelectionResult {
    std::vector<TokenCoord> selected;    // descending score, raster tie-break
    FeatureMatrix selected_tokens;       // one row per selected coordinate
    std::vector<TokenCoord> complement;  // raster order
};

/// ceil(fraction * total), clamped to [1, total].
Index selection_count(Index total, double fraction);

SelectionResult select_tokens(const EmbeddingVolume& vol, const NsmOptions& opts, double fraction);
SelectionResult select_from_scores(const EmbeddingVolume& vol, const NsmScoreVolume& scores,
                                   double fraction);

} // namespace modvid
