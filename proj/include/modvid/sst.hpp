// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "modvid/clip.hpp"
#include "modvid/flow.hpp"
#include "modvid/modulo.hpp"
#include "modvid/tensor.hpp"
#include "modvid/token_select.hpp"

/// Selective spatiotemporal transformer mask predictor: a shared patch
/// encoder, NSM token selection, a pre-norm transformer over the selected
/// tubes without positional embeddings, and a linear per-pixel logit head.
namespace modvid::sst {

/// Where tube tokens are cut from before the W projection.
enum class TubeSource { Embedding, RawPixels };

/// Which historical mask the flow fallback warps.
enum class FallbackSource { SameOrder, FinalMask };

struct ModelConfig {
    Index patch = 8;  // tube is 1 frame x patch x patch pixels
    Index channels = 1;
    Index embed_dim = 16;   // d_q
    Index token_dim = 32;   // d
    Index layers = 2;
    Index heads = 2;
    Index mlp_hidden = 64;
    Index clip_len = 4;  // n_c; windows hold n_c + 1 frames
    int radius = 1;
    double fraction = 1.0;
    TubeSource tube_source = TubeSource::Embedding;
    /// Adds a linear map from the tube's raw pixels to its logits in the head.
    bool pixel_skip = false;
    std::uint64_t seed = 7;

    Index tube_pixels() const { return patch * patch * channels; }
    Index tube_input_dim() const {
        return tube_source == TubeSource::Embedding ? embed_dim : tube_pixels();
    }
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

/// Named leaf tensors in a fixed order.
class Parameters {
public:
    void add(std::string name, nd::Tensor t);
    const nd::Tensor& at(const std::string& name) const;
    nd::Tensor& at(const std::string& name);
    bool contains(const std::string& name) const;

    std::vector<std::pair<std::string, nd::Tensor>>& entries() { return entries_; }
    const std::vector<std::pair<std::string, nd::Tensor>>& entries() const { return entries_; }

    Index count() const;
    /// Deep copy with fresh leaves; `requires_grad` applies to every copy.
    Parameters clone(bool requires_grad) const;
    void zero_grad();

private:
    std::vector<std::pair<std::string, nd::Tensor>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Centered uniform fan-in init, zero biases, unit LN gains.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

struct Model {
    ModelConfig config;
    Parameters params;
};

/// Patch grid of a (zero-padded) clip.
struct PatchGrid {
    Index frames = 0;
    Index rows = 0;   // h
    Index cols = 0;   // w
    Index patch = 8;
    Index height = 0;  // original frame size
    Index width = 0;
    Index channels = 1;

    Index tokens() const { return frames * rows * cols; }
    /// True for pixels that exist in the original frame.
    bool inside(Index y, Index x) const { return y < height && x < width; }
};

struct EncodedClip {
    PatchGrid grid;
    nd::Tensor patches;    // tokens x tube_pixels, normalised raw pixels
    nd::Tensor embedding;  // tokens x d_q
};

/// Normalises by the clip maximum, zero-pads to whole patches and applies the
/// shared linear patch encoder to every frame.
EncodedClip encode_frames(const Model& model, const IntClip& clip);

EmbeddingVolume to_volume(const EncodedClip& enc);

struct TokenSequence {
    nd::Tensor tokens;                // n x d
    std::vector<TokenCoord> origins;  // tube of each row
};

/// Gathers the selected tubes and projects them with W. Token order follows
/// the selection order.
TokenSequence tubes_to_tokens(const Model& model, const EncodedClip& enc,
                              const SelectionResult& selection);

/// n_L pre-norm layers: Y = MSA(LN(Z)) + Z, Z' = MLP(LN(Y)) + Y.
nd::Tensor transformer_encode(const Model& model, const nd::Tensor& tokens);

struct MaskLogits {
    nd::Tensor logits;                // n x tube_pixels
    std::vector<TokenCoord> origins;
};

MaskLogits decode_masks(const Model& model, const TokenSequence& seq);

/// Pixel coordinates (t, y, x, c) of a tube in logit-column order; padded
/// positions are reported with y or x beyond the frame.
struct TubePixel {
    Index t, y, x, c;
};
std::vector<TubePixel> tube_pixels(const PatchGrid& grid, const TokenCoord& origin);

/// Writes sigmoid >= 0.5 (logit >= 0) decisions of the selected tubes into `mask`.
void scatter_logits(const MaskLogits& logits, const PatchGrid& grid, MaskClip& mask);

/// Targets of the selected tubes in logit order (padded pixels are 0).
Eigen::VectorXd gather_targets(const MaskClip& target, const PatchGrid& grid,
                               const std::vector<TokenCoord>& origins);

struct ForwardPass {
    EncodedClip encoded;
    SelectionResult selection;
    MaskLogits logits;
    std::uint64_t transformer_macs = 0;
};

/// Full forward pass with NSM selection at `fraction`.
ForwardPass forward(const Model& model, const IntClip& clip, double fraction);

/// Warped-history masks for tokens the transformer does not see.
class FlowFallback {
public:
    explicit FlowFallback(FlowOptions flow = {}, FallbackSource source = FallbackSource::SameOrder)
        : flow_(flow), source_(source) {}

    void begin_window(const IntClip& modulo_window, Index first_frame);
    /// Full-window fallback mask of the given order (zero without history).
    MaskClip fallback(int order) const;
    void record(int order, const MaskClip& mask);
    void end_window();

    const std::vector<FlowField>& flows() const { return flows_; }
    bool has_history() const { return usable_; }

private:
    FlowOptions flow_;
    FallbackSource source_;
    bool has_prev_ = false;
    bool usable_ = false;
    Index prev_first_ = -1;
    Index cur_first_ = -1;
    IntClip prev_modulo_, cur_modulo_;
    std::map<int, MaskClip> prev_masks_, cur_masks_;
    SampleClip prev_final_, cur_final_;
    std::vector<FlowField> flows_;  // per frame of this window; zero except the newest
};

/// The learned predictor g used inside run_inference.
class SsvitPredictor : public MaskPredictor {
public:
    SsvitPredictor(Model model, double fraction, FlowOptions flow = {},
                   FallbackSource source = FallbackSource::SameOrder);

    void begin_window(const IntClip& modulo_window, Index first_frame) override;
    BinaryFoldMask predict(const IntClip& current, int order) override;
    void end_window() override;

    std::uint64_t transformer_macs() const { return macs_; }
    const FlowFallback& fallback() const { return fallback_; }

private:
    Model model_;
    double fraction_;
    FlowFallback fallback_;
    std::uint64_t macs_ = 0;
};

/// Predicts every tube from warped history only.
class FlowOnlyPredictor : public MaskPredictor {
public:
    explicit FlowOnlyPredictor(FlowOptions flow = {},
                               FallbackSource source = FallbackSource::SameOrder)
        : fallback_(flow, source) {}

    void begin_window(const IntClip& modulo_window, Index first_frame) override;
    BinaryFoldMask predict(const IntClip& current, int order) override;
    void end_window() override { fallback_.end_window(); }

private:
    FlowFallback fallback_;
};

// --- Training

struct TrainingPair {
    IntClip clip;      // F_m^(k) for one window
    MaskClip target;   // M^(k+1)
    int order = 1;     // k + 1
};

/// Teacher-forced pairs for every window of a ground-truth video and every
/// order k = 0..max(L) of that window (the last target is all zero).
std::vector<TrainingPair> make_training_pairs(const IntClip& ground_truth, int bits_a,
                                              Index clip_len);

struct TrainOptions {
    int steps = 5000;
    double lr = 1e-4;
    int batch = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 11;
};

struct TrainResult {
    Parameters params;
    std::vector<double> losses;  // mean batch loss per step
};

/// Mean per-pixel binary cross-entropy of one pair over its selected tubes.
nd::Tensor pair_loss(const Model& model, const TrainingPair& pair, double fraction);

/// Adam on the mean BCE over selected tubes. Per-sample gradients are summed
/// in sample order, so results do not depend on the thread count.
TrainResult train(const std::vector<TrainingPair>& data, const Model& initial,
                  const TrainOptions& opts);

// --- Checkpoints: "MODVIDCK", u32 version, u32 + JSON config, u32 count,
// then per parameter u32 name length, name, u32 rank, u64 dims, f64 LE data.

std::string save_checkpoint(const Model& model);
Model load_checkpoint(std::string_view bytes);

// --- Evaluation helpers

struct MaskAccuracy {
    Index pixels = 0;
    Index correct = 0;
    Index zero_baseline_correct = 0;  // pixels whose target is 0

    double accuracy() const { return pixels ? static_cast<double>(correct) / pixels : 0.0; }
    double baseline() const {
        return pixels ? static_cast<double>(zero_baseline_correct) / pixels : 0.0;
    }
    MaskAccuracy& operator+=(const MaskAccuracy& o);
};

/// Teacher-forced pixel accuracy over all windows and orders of a video,
/// feeding windows in order so history-based fallbacks see their predecessors.
MaskAccuracy teacher_forced_accuracy(MaskPredictor& predictor, const IntClip& ground_truth,
                                     int bits_a, Index clip_len);

} // namespace modvid::sst
