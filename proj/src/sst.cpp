// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/sst.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string_view>

#include "json.hpp"

#include "modvid/parallel.hpp"
#include "modvid/rng.hpp"

namespace modvid::sst {

using nd::Tensor;

// --- ModelConfig

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("ModelConfig: ") + what);
    };
    require(patch >= 1, "patch must be positive");
    require(channels >= 1, "channels must be positive");
    require(embed_dim >= 1 && token_dim >= 1 && mlp_hidden >= 1, "dimensions must be positive");
    require(layers >= 0, "layers must be non-negative");
    require(heads >= 1 && token_dim % heads == 0, "token_dim must be divisible by heads");
    require(clip_len >= 1, "clip_len must be positive");
    require(radius >= 1, "radius must be at least 1");
    require(fraction > 0.0 && fraction <= 1.0, "fraction must be in (0, 1]");
}

std::string ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["patch"] = patch;
    j["channels"] = channels;
    j["embed_dim"] = embed_dim;
    j["token_dim"] = token_dim;
    j["layers"] = layers;
    j["heads"] = heads;
    j["mlp_hidden"] = mlp_hidden;
    j["clip_len"] = clip_len;
    j["radius"] = radius;
    j["fraction"] = fraction;
    j["tube_source"] = tube_source == TubeSource::Embedding ? "embedding" : "raw";
    j["pixel_skip"] = pixel_skip;
    j["seed"] = seed;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model config: ") + e.what(), e.byte);
    }
    if (!j.is_object()) throw ValidationError("model config: expected a JSON object");
    ModelConfig c;
    try {
        c.patch = j.value("patch", c.patch);
        c.channels = j.value("channels", c.channels);
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.token_dim = j.value("token_dim", c.token_dim);
        c.layers = j.value("layers", c.layers);
        c.heads = j.value("heads", c.heads);
        c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
        c.clip_len = j.value("clip_len", c.clip_len);
        c.radius = j.value("radius", c.radius);
        c.fraction = j.value("fraction", c.fraction);
        c.pixel_skip = j.value("pixel_skip", c.pixel_skip);
        c.seed = j.value("seed", c.seed);
        const std::string src = j.value("tube_source", std::string("embedding"));
        if (src == "embedding")
            c.tube_source = TubeSource::Embedding;
        else if (src == "raw")
            c.tube_source = TubeSource::RawPixels;
        else
            throw ValidationError("model config: unknown tube_source '" + src + "'");
    } catch (const nlohmann::json::type_error& e) {
        throw ValidationError(std::string("model config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError(e.what());
    }
    return c;
}

// --- Parameters

void Parameters::add(std::string name, Tensor t) {
    if (index_.count(name)) throw InvalidArgument("Parameters: duplicate name '" + name + "'");
    index_[name] = entries_.size();
    entries_.emplace_back(std::move(name), std::move(t));
}

const Tensor& Parameters::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("Parameters: no parameter '" + name + "'");
    return entries_[it->second].second;
}

Tensor& Parameters::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("Parameters: no parameter '" + name + "'");
    return entries_[it->second].second;
}

bool Parameters::contains(const std::string& name) const { return index_.count(name) > 0; }

Index Parameters::count() const {
    Index n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
}

Parameters Parameters::clone(bool requires_grad) const {
    Parameters out;
    for (const auto& [name, t] : entries_)
        out.add(name, Tensor::from_values(t.shape(), t.values(), requires_grad));
    return out;
}

void Parameters::zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

namespace {

std::string layer_key(Index l, const char* leaf) { return "l" + std::to_string(l) + "." + leaf; }

} // namespace

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Parameters p;
    auto weight = [&](const std::string& name, Index in, Index out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        nd::Vector v(in * out);
        for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
        p.add(name, Tensor::from_values({in, out}, std::move(v)));
    };
    auto constant = [&](const std::string& name, Index n, double value) {
        p.add(name, Tensor::from_values({n}, nd::Vector::Constant(n, value)));
    };
    const Index d = cfg.token_dim;
    weight("enc.w", cfg.tube_pixels(), cfg.embed_dim);
    constant("enc.b", cfg.embed_dim, 0.0);
    weight("tok.w", cfg.tube_input_dim(), d);
    constant("tok.b", d, 0.0);
    for (Index l = 0; l < cfg.layers; ++l) {
        constant(layer_key(l, "ln1.g"), d, 1.0);
        constant(layer_key(l, "ln1.b"), d, 0.0);
        weight(layer_key(l, "attn.qkv.w"), d, 3 * d);
        constant(layer_key(l, "attn.qkv.b"), 3 * d, 0.0);
        weight(layer_key(l, "attn.out.w"), d, d);
        constant(layer_key(l, "attn.out.b"), d, 0.0);
        constant(layer_key(l, "ln2.g"), d, 1.0);
        constant(layer_key(l, "ln2.b"), d, 0.0);
        weight(layer_key(l, "mlp.fc1.w"), d, cfg.mlp_hidden);
        constant(layer_key(l, "mlp.fc1.b"), cfg.mlp_hidden, 0.0);
        weight(layer_key(l, "mlp.fc2.w"), cfg.mlp_hidden, d);
        constant(layer_key(l, "mlp.fc2.b"), d, 0.0);
    }
    weight("head.w", d, cfg.tube_pixels());
    constant("head.b", cfg.tube_pixels(), 0.0);
    if (cfg.pixel_skip) weight("head.skip", cfg.tube_pixels(), cfg.tube_pixels());
    return p;
}

// --- Forward pass

EncodedClip encode_frames(const Model& model, const IntClip& clip) {
    const ModelConfig& cfg = model.config;
    const SampleClip& s = clip.samples;
    if (s.channels() != cfg.channels)
        throw InvalidArgument("encode_frames: clip has " + std::to_string(s.channels()) +
                              " channels, model expects " + std::to_string(cfg.channels));
    if (s.empty()) throw InvalidArgument("encode_frames: empty clip");

    EncodedClip enc;
    PatchGrid& g = enc.grid;
    g.frames = s.frames();
    g.patch = cfg.patch;
    g.height = s.height();
    g.width = s.width();
    g.channels = s.channels();
    g.rows = (g.height + g.patch - 1) / g.patch;
    g.cols = (g.width + g.patch - 1) / g.patch;

    const Sample top = s.array().maxCoeff();
    const double inv = top > 0 ? 1.0 / static_cast<double>(top) : 0.0;
    const Index p = g.patch, c = g.channels;
    nd::RowMatrix patches = nd::RowMatrix::Zero(g.tokens(), cfg.tube_pixels());
    for (Index t = 0; t < g.frames; ++t)
        for (Index u = 0; u < g.rows; ++u)
            for (Index v = 0; v < g.cols; ++v) {
                const Index row = (t * g.rows + u) * g.cols + v;
                for (Index py = 0; py < p; ++py)
                    for (Index px = 0; px < p; ++px) {
                        const Index y = u * p + py, x = v * p + px;
                        if (!g.inside(y, x)) continue;
                        for (Index ch = 0; ch < c; ++ch)
                            patches(row, (py * p + px) * c + ch) =
                                static_cast<double>(s(t, y, x, ch)) * inv;
                    }
            }
    enc.patches = Tensor::from_matrix(patches);
    enc.embedding =
        nd::add_row(nd::matmul(enc.patches, model.params.at("enc.w")), model.params.at("enc.b"));
    return enc;
}

EmbeddingVolume to_volume(const EncodedClip& enc) {
    return EmbeddingVolume(enc.grid.frames, enc.grid.rows, enc.grid.cols,
                           FeatureMatrix(enc.embedding.matrix()));
}

TokenSequence tubes_to_tokens(const Model& model, const EncodedClip& enc,
                              const SelectionResult& selection) {
    if (selection.selected.empty()) throw InvalidArgument("tubes_to_tokens: empty selection");
    const PatchGrid& g = enc.grid;
    std::vector<Index> rows;
    rows.reserve(selection.selected.size());
    for (const TokenCoord& c : selection.selected) {
        if (c.s < 0 || c.s >= g.frames || c.u < 0 || c.u >= g.rows || c.v < 0 || c.v >= g.cols)
            throw InvalidArgument("tubes_to_tokens: selected tube outside the grid");
        rows.push_back((c.s * g.rows + c.u) * g.cols + c.v);
    }
    const Tensor& src =
        model.config.tube_source == TubeSource::Embedding ? enc.embedding : enc.patches;
    TokenSequence seq;
    seq.tokens = nd::add_row(nd::matmul(nd::gather_rows(src, rows), model.params.at("tok.w")),
                             model.params.at("tok.b"));
    seq.origins = selection.selected;
    return seq;
}

namespace {

Tensor attention(const Parameters& p, Index l, const Tensor& x, Index heads) {
    const Index d = x.cols();
    const Index dh = d / heads;
    const Tensor qkv =
        nd::add_row(nd::matmul(x, p.at(layer_key(l, "attn.qkv.w"))), p.at(layer_key(l, "attn.qkv.b")));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    for (Index h = 0; h < heads; ++h) {
        const Tensor q = nd::slice_cols(qkv, h * dh, dh);
        const Tensor k = nd::slice_cols(qkv, d + h * dh, dh);
        const Tensor v = nd::slice_cols(qkv, 2 * d + h * dh, dh);
        const Tensor scores = nd::scale(nd::matmul(q, nd::transpose(k)), scale);
        if (!scores.values().allFinite())
            throw NumericalFailure("transformer_encode: non-finite attention scores in layer " +
                                   std::to_string(l) + ", head " + std::to_string(h));
        outs.push_back(nd::matmul(nd::softmax(scores, 1), v));
    }
    const Tensor merged = heads == 1 ? outs.front() : nd::concat_cols(outs);
    return nd::add_row(nd::matmul(merged, p.at(layer_key(l, "attn.out.w"))),
                       p.at(layer_key(l, "attn.out.b")));
}

} // namespace

Tensor transformer_encode(const Model& model, const Tensor& tokens) {
    const ModelConfig& cfg = model.config;
    if (tokens.rank() != 2 || tokens.rows() < 1 || tokens.cols() != cfg.token_dim)
        throw InvalidArgument("transformer_encode: expected n x " + std::to_string(cfg.token_dim) +
                              " tokens with n >= 1");
    const Parameters& p = model.params;
    Tensor z = tokens;
    for (Index l = 0; l < cfg.layers; ++l) {
        const Tensor a = nd::layer_norm(z, p.at(layer_key(l, "ln1.g")), p.at(layer_key(l, "ln1.b")));
        const Tensor y = nd::add(attention(p, l, a, cfg.heads), z);
        const Tensor b = nd::layer_norm(y, p.at(layer_key(l, "ln2.g")), p.at(layer_key(l, "ln2.b")));
        const Tensor hidden = nd::gelu(nd::add_row(nd::matmul(b, p.at(layer_key(l, "mlp.fc1.w"))),
                                                   p.at(layer_key(l, "mlp.fc1.b"))));
        const Tensor m = nd::add_row(nd::matmul(hidden, p.at(layer_key(l, "mlp.fc2.w"))),
                                     p.at(layer_key(l, "mlp.fc2.b")));
        z = nd::add(m, y);
    }
    return z;
}

MaskLogits decode_masks(const Model& model, const TokenSequence& seq) {
    if (static_cast<std::size_t>(seq.tokens.rows()) != seq.origins.size())
        throw InvalidArgument("decode_masks: token and origin counts differ");
    MaskLogits out;
    out.logits = nd::add_row(nd::matmul(seq.tokens, model.params.at("head.w")),
                             model.params.at("head.b"));
    out.origins = seq.origins;
    return out;
}

namespace {

// Logits with the optional raw-pixel skip term.
MaskLogits decode_with_skip(const Model& model, const TokenSequence& seq, const EncodedClip& enc) {
    MaskLogits out = decode_masks(model, seq);
    if (!model.config.pixel_skip) return out;
    std::vector<Index> rows;
    rows.reserve(seq.origins.size());
    for (const TokenCoord& c : seq.origins)
        rows.push_back((c.s * enc.grid.rows + c.u) * enc.grid.cols + c.v);
    out.logits = nd::add(out.logits, nd::matmul(nd::gather_rows(enc.patches, rows),
                                                model.params.at("head.skip")));
    return out;
}

} // namespace

std::vector<TubePixel> tube_pixels(const PatchGrid& grid, const TokenCoord& origin) {
    std::vector<TubePixel> out;
    out.reserve(static_cast<std::size_t>(grid.patch * grid.patch * grid.channels));
    for (Index py = 0; py < grid.patch; ++py)
        for (Index px = 0; px < grid.patch; ++px)
            for (Index c = 0; c < grid.channels; ++c)
                out.push_back({origin.s, origin.u * grid.patch + py, origin.v * grid.patch + px, c});
    return out;
}

void scatter_logits(const MaskLogits& logits, const PatchGrid& grid, MaskClip& mask) {
    if (mask.frames() != grid.frames || mask.height() != grid.height ||
        mask.width() != grid.width || mask.channels() != grid.channels)
        throw InvalidArgument("scatter_logits: mask shape does not match the patch grid");
    const auto m = logits.logits.matrix();
    for (std::size_t i = 0; i < logits.origins.size(); ++i) {
        const auto pixels = tube_pixels(grid, logits.origins[i]);
        for (std::size_t j = 0; j < pixels.size(); ++j) {
            const TubePixel& px = pixels[j];
            if (!grid.inside(px.y, px.x)) continue;
            mask(px.t, px.y, px.x, px.c) =
                m(static_cast<Index>(i), static_cast<Index>(j)) >= 0.0 ? 1 : 0;
        }
    }
}

Eigen::VectorXd gather_targets(const MaskClip& target, const PatchGrid& grid,
                               const std::vector<TokenCoord>& origins) {
    const Index per = grid.patch * grid.patch * grid.channels;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Index>(origins.size()) * per);
    for (std::size_t i = 0; i < origins.size(); ++i) {
        const auto pixels = tube_pixels(grid, origins[i]);
        for (std::size_t j = 0; j < pixels.size(); ++j) {
            const TubePixel& px = pixels[j];
            if (grid.inside(px.y, px.x))
                out[static_cast<Index>(i) * per + static_cast<Index>(j)] =
                    target(px.t, px.y, px.x, px.c) ? 1.0 : 0.0;
        }
    }
    return out;
}

ForwardPass forward(const Model& model, const IntClip& clip, double fraction) {
    ForwardPass fp;
    fp.encoded = encode_frames(model, clip);
    fp.selection = select_tokens(to_volume(fp.encoded), NsmOptions{model.config.radius}, fraction);
    TokenSequence seq = tubes_to_tokens(model, fp.encoded, fp.selection);
    const std::uint64_t before = nd::mac_count();
    seq.tokens = transformer_encode(model, seq.tokens);
    fp.transformer_macs = nd::mac_count() - before;
    fp.logits = decode_with_skip(model, seq, fp.encoded);
    return fp;
}

// --- Flow fallback

void FlowFallback::begin_window(const IntClip& modulo_window, Index first_frame) {
    cur_modulo_ = modulo_window;
    cur_first_ = first_frame;
    cur_masks_.clear();
    flows_.clear();
    usable_ = has_prev_ && prev_first_ + 1 == first_frame &&
              prev_modulo_.samples.same_shape(modulo_window.samples);
    if (!usable_) return;
    // Frames shared with the previous window map onto themselves; only the
    // newest frame is warped from its predecessor.
    const SampleClip& cur = modulo_window.samples;
    const Index last = cur.frames() - 1;
    for (Index s = 0; s < last; ++s)
        flows_.push_back(FlowField::zero(cur.height(), cur.width(), flow_.block, flow_.radius));
    flows_.push_back(estimate_flow(prev_modulo_.samples.frame(last), cur.frame(last), flow_));
}

MaskClip FlowFallback::fallback(int order) const {
    const SampleClip& shape = cur_modulo_.samples;
    MaskClip out(shape.frames(), shape.height(), shape.width(), shape.channels());
    if (!usable_) return out;
    const Index last = shape.frames() - 1;
    for (Index s = 0; s <= last; ++s) {
        const Index src = std::min(s + 1, last);  // same absolute frame, or its predecessor
        MaskClip prev(1, shape.height(), shape.width(), shape.channels());
        if (source_ == FallbackSource::SameOrder) {
            auto it = prev_masks_.find(order);
            if (it == prev_masks_.end()) continue;
            prev = it->second.frame(src);
        } else {
            prev.array() = (prev_final_.frame_array(src) >= order).cast<std::uint8_t>();
        }
        out.set_frames(s, s < last ? prev : warp_mask(prev, flows_[static_cast<std::size_t>(s)]));
    }
    return out;
}

void FlowFallback::record(int order, const MaskClip& mask) {
    if (!mask.same_shape(cur_modulo_.samples))
        throw ContractViolation("FlowFallback::record: mask shape differs from the window");
    cur_masks_[order] = mask;
}

void FlowFallback::end_window() {
    const SampleClip& shape = cur_modulo_.samples;
    SampleClip final_counts(shape.frames(), shape.height(), shape.width(), shape.channels());
    for (const auto& [order, m] : cur_masks_) final_counts.array() += m.array().cast<Sample>();
    prev_final_ = std::move(final_counts);
    prev_modulo_ = std::move(cur_modulo_);
    prev_masks_ = std::move(cur_masks_);
    prev_first_ = cur_first_;
    has_prev_ = true;
    cur_modulo_ = IntClip();
    cur_masks_.clear();
}

SsvitPredictor::SsvitPredictor(Model model, double fraction, FlowOptions flow,
                               FallbackSource source)
    : model_(std::move(model)), fraction_(fraction), fallback_(flow, source) {
    model_.config.validate();
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InvalidArgument("SsvitPredictor: fraction must be in (0, 1]");
}

void SsvitPredictor::begin_window(const IntClip& modulo_window, Index first_frame) {
    fallback_.begin_window(modulo_window, first_frame);
}

BinaryFoldMask SsvitPredictor::predict(const IntClip& current, int order) {
    nd::NoGradGuard no_grad;
    // Without history there is nothing to warp, so every tube is predicted.
    const ForwardPass fp = forward(model_, current, fallback_.has_history() ? fraction_ : 1.0);
    macs_ += fp.transformer_macs;
    const SampleClip& s = current.samples;
    MaskClip mask = fp.selection.complement.empty()
                        ? MaskClip(s.frames(), s.height(), s.width(), s.channels())
                        : fallback_.fallback(order);
    if (!mask.same_shape(s))
        throw ContractViolation("SsvitPredictor: window shape changed without begin_window");
    scatter_logits(fp.logits, fp.encoded.grid, mask);
    fallback_.record(order, mask);
    return {std::move(mask), order};
}

void SsvitPredictor::end_window() { fallback_.end_window(); }

void FlowOnlyPredictor::begin_window(const IntClip& modulo_window, Index first_frame) {
    fallback_.begin_window(modulo_window, first_frame);
}

BinaryFoldMask FlowOnlyPredictor::predict(const IntClip& current, int order) {
    MaskClip mask = fallback_.fallback(order);
    if (!mask.same_shape(current.samples))
        throw ContractViolation("FlowOnlyPredictor: window shape changed without begin_window");
    fallback_.record(order, mask);
    return {std::move(mask), order};
}

// --- Training

namespace {

int bits_for(Sample v) {
    int b = 1;
    while (b < 62 && (Sample{1} << b) <= v) ++b;
    return b;
}

struct WindowTruth {
    IntClip modulo;
    SampleClip counts;
};

std::vector<WindowTruth> windows_of(const IntClip& ground_truth, int bits_a, Index clip_len) {
    if (clip_len < 1) throw InvalidArgument("clip_len must be positive");
    if (ground_truth.frames() < clip_len + 1)
        throw InvalidArgument("video has " + std::to_string(ground_truth.frames()) +
                              " frames, a window needs " + std::to_string(clip_len + 1));
    const FoldResult f = fold_clip(ground_truth, bits_a);
    std::vector<WindowTruth> out;
    for (Index t = 0; t + clip_len < ground_truth.frames(); ++t)
        out.push_back({f.modulo.frame_range(t, clip_len + 1),
                       f.counts.counts.frame_range(t, clip_len + 1)});
    return out;
}

IntClip running_clip(const WindowTruth& w, int bits_a, Sample k) {
    SampleClip s = w.modulo.samples;
    s.array() += (w.counts.array().min(k)) * (Sample{1} << bits_a);
    const Sample top = s.empty() ? 0 : s.array().maxCoeff();
    return {std::move(s), std::max(bits_a, bits_for(top))};
}

MaskClip order_mask(const SampleClip& counts, Sample order) {
    MaskClip m(counts.frames(), counts.height(), counts.width(), counts.channels());
    m.array() = (counts.array() >= order).cast<std::uint8_t>();
    return m;
}

} // namespace

std::vector<TrainingPair> make_training_pairs(const IntClip& ground_truth, int bits_a,
                                              Index clip_len) {
    std::vector<TrainingPair> out;
    for (const WindowTruth& w : windows_of(ground_truth, bits_a, clip_len)) {
        const Sample top = w.counts.array().maxCoeff();
        for (Sample k = 0; k <= top; ++k)
            out.push_back({running_clip(w, bits_a, k), order_mask(w.counts, k + 1),
                           static_cast<int>(k + 1)});
    }
    return out;
}

Tensor pair_loss(const Model& model, const TrainingPair& pair, double fraction) {
    const ForwardPass fp = forward(model, pair.clip, fraction);
    const Eigen::VectorXd targets =
        gather_targets(pair.target, fp.encoded.grid, fp.logits.origins);
    return nd::bce_with_logits(fp.logits.logits, targets);
}

TrainResult train(const std::vector<TrainingPair>& data, const Model& initial,
                  const TrainOptions& opts) {
    if (data.empty()) throw InvalidArgument("train: empty dataset");
    if (opts.steps < 0 || opts.batch < 1) throw InvalidArgument("train: bad step or batch count");
    for (const TrainingPair& p : data)
        if (!(p.target.array() <= 1).all())
            throw InvalidArgument("train: targets must be in {0, 1}");
    initial.config.validate();

    TrainResult result;
    result.params = initial.params.clone(false);
    auto& entries = result.params.entries();
    std::vector<nd::Vector> m1, m2;
    for (const auto& [name, t] : entries) {
        m1.push_back(nd::Vector::Zero(t.numel()));
        m2.push_back(nd::Vector::Zero(t.numel()));
    }

    Rng rng(opts.seed);
    std::vector<std::size_t> perm(data.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::size_t cursor = perm.size();
    auto next_index = [&] {
        if (cursor == perm.size()) {
            for (std::size_t i = perm.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1));
                std::swap(perm[i - 1], perm[j]);
            }
            cursor = 0;
        }
        return perm[cursor++];
    };

    const std::size_t batch = static_cast<std::size_t>(opts.batch);
    std::vector<std::size_t> picks(batch);
    std::vector<std::vector<nd::Vector>> grads(batch);
    std::vector<double> losses(batch);
    double b1t = 1.0, b2t = 1.0;
    for (int step = 1; step <= opts.steps; ++step) {
        for (auto& p : picks) p = next_index();
        parallel_for(batch, [&](std::size_t i) {
            Model local{initial.config, result.params.clone(true)};
            const Tensor loss = pair_loss(local, data[picks[i]], initial.config.fraction);
            nd::backward(loss);
            losses[i] = loss.item();
            grads[i].clear();
            for (const auto& [name, t] : local.params.entries()) grads[i].push_back(t.grad());
        });

        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) {
            const std::string last =
                result.losses.empty() ? "none" : std::to_string(result.losses.back());
            throw TrainingFailure("train: loss is not finite at step " + std::to_string(step) +
                                  " (last finite loss " + last + ")");
        }
        result.losses.push_back(loss);

        b1t *= opts.beta1;
        b2t *= opts.beta2;
        for (std::size_t p = 0; p < entries.size(); ++p) {
            nd::Vector g = grads[0][p];
            for (std::size_t i = 1; i < batch; ++i) g += grads[i][p];
            g /= static_cast<double>(batch);
            m1[p] = opts.beta1 * m1[p] + (1.0 - opts.beta1) * g;
            m2[p] = opts.beta2 * m2[p] + (1.0 - opts.beta2) * g.cwiseProduct(g);
            const nd::Vector mhat = m1[p] / (1.0 - b1t);
            const nd::Vector vhat = m2[p] / (1.0 - b2t);
            entries[p].second.mutable_values().array() -=
                opts.lr * mhat.array() / (vhat.array().sqrt() + opts.eps);
        }
    }
    return result;
}

// --- Checkpoints

namespace {

constexpr char kMagic[8] = {'M', 'O', 'D', 'V', 'I', 'D', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view b) : bytes_(b) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        char buf[sizeof(T)];
        std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string save_checkpoint(const Model& model) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    const std::string cfg = model.config.to_json();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.entries().size()));
    for (const auto& [name, t] : model.params.entries()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (Index d : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        for (Index i = 0; i < t.numel(); ++i) put<double>(out, t.values()[i]);
    }
    return out;
}

Model load_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic)))
        throw ParseError("not a modvid checkpoint (bad magic)", 0);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
    const auto cfg_len = r.get<std::uint32_t>("config length");
    Model model;
    model.config = ModelConfig::from_json(std::string(r.take(cfg_len, "config")));

    const Parameters expected = init_parameters(model.config, model.config.seed);
    const auto count = r.get<std::uint32_t>("parameter count");
    if (count != expected.entries().size())
        throw ValidationError("checkpoint holds " + std::to_string(count) +
                              " parameters, config implies " +
                              std::to_string(expected.entries().size()));
    for (const auto& [want_name, want] : expected.entries()) {
        const std::size_t at = r.pos();
        const auto name_len = r.get<std::uint32_t>("parameter name length");
        const std::string name(r.take(name_len, "parameter name"));
        if (name != want_name)
            throw ValidationError("checkpoint parameter '" + name + "' at byte " +
                                  std::to_string(at) + ", expected '" + want_name + "'");
        const auto rank = r.get<std::uint32_t>("parameter rank");
        nd::Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i)
            shape.push_back(static_cast<Index>(r.get<std::uint64_t>("parameter shape")));
        if (shape != want.shape())
            throw ValidationError("checkpoint parameter '" + name + "' has the wrong shape");
        nd::Vector v(want.numel());
        for (Index i = 0; i < v.size(); ++i) v[i] = r.get<double>("parameter data");
        if (!v.allFinite())
            throw ValidationError("checkpoint parameter '" + name + "' holds non-finite values");
        model.params.add(name, Tensor::from_values(shape, std::move(v)));
    }
    if (!r.done()) throw ParseError("trailing bytes after the last parameter", r.pos());
    return model;
}

// --- Evaluation

MaskAccuracy& MaskAccuracy::operator+=(const MaskAccuracy& o) {
    pixels += o.pixels;
    correct += o.correct;
    zero_baseline_correct += o.zero_baseline_correct;
    return *this;
}

MaskAccuracy teacher_forced_accuracy(MaskPredictor& predictor, const IntClip& ground_truth,
                                     int bits_a, Index clip_len) {
    MaskAccuracy acc;
    Index first = 0;
    for (const WindowTruth& w : windows_of(ground_truth, bits_a, clip_len)) {
        predictor.begin_window(w.modulo, first++);
        const Sample top = w.counts.array().maxCoeff();
        for (Sample k = 0; k <= top; ++k) {
            const BinaryFoldMask pred =
                predictor.predict(running_clip(w, bits_a, k), static_cast<int>(k + 1));
            const MaskClip truth = order_mask(w.counts, k + 1);
            if (!pred.bits.same_shape(truth))
                throw ContractViolation("predictor returned a mask of the wrong shape");
            acc.pixels += truth.size();
            acc.correct += (pred.bits.array() == truth.array()).count();
            acc.zero_baseline_correct += (truth.array() == 0).count();
        }
        predictor.end_window();
    }
    return acc;
}

} // namespace modvid::sst
