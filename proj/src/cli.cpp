// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "modvid/clip_io.hpp"
#include "modvid/datagen.hpp"
#include "modvid/flow.hpp"
#include "modvid/imaging.hpp"
#include "modvid/modulo.hpp"
#include "modvid/parallel.hpp"
#include "modvid/sst.hpp"
#include "modvid/token_select.hpp"

namespace modvid {

namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string command;
    std::string input, output, truth, model, spec, model_config, gt, est;
    int bits_a = 8;
    int bits_b = 12;
    int clip_len = 4;
    std::uint64_t seed = 1;
    double fraction = 1.0;
    int radius = 1;
    std::string predictor = "oracle";
    int threads = 1;
    int flow_block = 8;
    int flow_radius = 7;
    int exclude = 4;
    bool windowed = false;
    double alpha = 0.9;
    int steps = 5000;
    double lr = 1e-4;
    int batch = 8;
    int holdout = 0;
    int patch = 8;
    bool dump_flow = false;
    std::string fallback = "same-order";

    // Which options the user set explicitly.
    std::map<std::string, bool> given;
    bool was_given(const std::string& k) const {
        auto it = given.find(k);
        return it != given.end() && it->second;
    }
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Key/value echo of the run, thread count included.
std::vector<std::pair<std::string, std::string>> run_fields(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> f{
        {"command", c.command},
        {"bits_a", std::to_string(c.bits_a)},
        {"bits_b", std::to_string(c.bits_b)},
        {"clip_len", std::to_string(c.clip_len)},
        {"seed", std::to_string(c.seed)},
        {"fraction", num(c.fraction)},
        {"radius", std::to_string(c.radius)},
        {"predictor", c.predictor},
        {"fallback", c.fallback},
        {"flow_block", std::to_string(c.flow_block)},
        {"flow_radius", std::to_string(c.flow_radius)},
        {"exclude", std::to_string(c.exclude)},
        {"windowed", c.windowed ? "1" : "0"},
        {"alpha", num(c.alpha)},
        {"steps", std::to_string(c.steps)},
        {"lr", num(c.lr)},
        {"batch", std::to_string(c.batch)},
        {"holdout", std::to_string(c.holdout)},
        {"patch", std::to_string(c.patch)},
    };
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"input", c.input}, {"output", c.output}, {"truth", c.truth}, {"model", c.model},
             {"spec", c.spec}, {"model_config", c.model_config}, {"gt", c.gt}, {"est", c.est}})
        if (!v.empty()) f.emplace_back(k, v);
    return f;
}

void write_provenance(const fs::path& dir, const RunConfig& c) {
    fs::create_directories(dir);
    std::string text = "modvid-run 1\n";
    for (const auto& [k, v] : run_fields(c)) text += k + ": " + v + "\n";
    text += "threads: " + std::to_string(c.threads) + "\n";
    write_file(dir / "provenance.manifest", text);
}

/// Run echo for output clip manifests. Thread count and output directory
/// live only in provenance.manifest so outputs compare byte for byte.
std::vector<std::pair<std::string, std::string>> manifest_echo(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto& [k, v] : run_fields(c))
        if (k != "output") out.emplace_back("run_" + k, v);
    return out;
}

fs::path require_out(const RunConfig& c) {
    if (c.output.empty()) throw InvalidArgument(c.command + ": --out is required");
    return c.output;
}

fs::path manifest_path(const std::string& p, const char* default_stem) {
    fs::path path(p);
    if (fs::is_directory(path)) path /= std::string(default_stem) + ".manifest";
    return path;
}

bool manifest_is_real(const fs::path& path) {
    const ClipManifest m = load_manifest(path);
    return !m.frames.empty() && m.frames.front().size() > 4 &&
           m.frames.front().compare(m.frames.front().size() - 4, 4, ".pfm") == 0;
}

RealClip load_as_real(const fs::path& path) {
    if (manifest_is_real(path)) return load_real_clip(path);
    return load_int_clip(path).samples.cast<double>();
}

// --- fold

int cmd_fold(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) throw InvalidArgument("fold: --in is required");
    const fs::path dir = require_out(c);
    const fs::path in = manifest_path(c.input, "gt");
    const IntClip clip = load_int_clip(in);
    if (c.bits_a >= clip.bit_depth)
        throw InvalidArgument("fold: A = " + std::to_string(c.bits_a) +
                              " must be below the input bit depth B = " +
                              std::to_string(clip.bit_depth));
    const FoldResult f = fold_clip(clip, c.bits_a);
    const std::optional<std::uint64_t> seed = load_manifest(in).seed;
    ClipMeta meta{"modulo", c.bits_a, clip.bit_depth, seed, manifest_echo(c)};
    meta.extra.emplace_back("source", in.string());
    save_clip(dir, "modulo", f.modulo, meta);
    meta.kind = "counts";
    save_clip(dir, "counts", IntClip(f.counts.counts, std::max(1, clip.bit_depth - c.bits_a)), meta);
    write_provenance(dir, c);
    out << "folded " << clip.frames() << " frames at A=" << c.bits_a << " (B=" << clip.bit_depth
        << "), max fold count " << f.counts.max_count() << "\n";
    return kExitOk;
}

// --- synth

SynthConfig synth_config(const RunConfig& c) {
    SynthConfig s;
    s.bits_b = 12;
    if (!c.spec.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(c.spec));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("synth spec '" + c.spec + "': " + e.what(), e.byte);
        }
        if (!j.is_object()) throw ValidationError("synth spec: expected a JSON object");
        static const std::set<std::string> known{
            "videos", "width", "height", "frames", "channels", "bits_a", "bits_b", "over_rate",
            "seed", "min_blobs", "max_blobs", "sigma_min", "sigma_max", "speed_max",
            "ramp_slope_max", "base_max"};
        for (const auto& [k, v] : j.items())
            if (!known.count(k)) throw ValidationError("synth spec: unknown key '" + k + "'");
        try {
            s.videos = j.value("videos", s.videos);
            s.scene.width = j.value("width", s.scene.width);
            s.scene.height = j.value("height", s.scene.height);
            s.scene.frames = j.value("frames", s.scene.frames);
            s.scene.channels = j.value("channels", s.scene.channels);
            s.bits_a = j.value("bits_a", s.bits_a);
            s.bits_b = j.value("bits_b", s.bits_b);
            s.over_rate = j.value("over_rate", s.over_rate);
            s.seed = j.value("seed", s.seed);
            s.scene.min_blobs = j.value("min_blobs", s.scene.min_blobs);
            s.scene.max_blobs = j.value("max_blobs", s.scene.max_blobs);
            s.scene.sigma_min = j.value("sigma_min", s.scene.sigma_min);
            s.scene.sigma_max = j.value("sigma_max", s.scene.sigma_max);
            s.scene.speed_max = j.value("speed_max", s.scene.speed_max);
            s.scene.ramp_slope_max = j.value("ramp_slope_max", s.scene.ramp_slope_max);
            s.scene.base_max = j.value("base_max", s.scene.base_max);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("synth spec: ") + e.what());
        }
    }
    if (c.was_given("bits_a")) s.bits_a = c.bits_a;
    if (c.was_given("bits_b")) s.bits_b = c.bits_b;
    if (c.was_given("seed")) s.seed = c.seed;

    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ValidationError("synth spec: " + what);
    };
    require(s.videos >= 1, "videos must be positive");
    require(s.scene.width >= 1 && s.scene.height >= 1 && s.scene.frames >= 1,
            "width, height and frames must be positive");
    require(s.scene.channels == 1 || s.scene.channels == 3, "channels must be 1 or 3");
    require(s.bits_a >= 1 && s.bits_a < s.bits_b && s.bits_b <= 16,
            "need 1 <= bits_a < bits_b <= 16");
    require(s.over_rate >= 0.0 && s.over_rate < 1.0, "over_rate must be in [0, 1)");
    require(s.scene.min_blobs >= 0 && s.scene.min_blobs <= s.scene.max_blobs,
            "blob count range is empty");
    require(s.scene.sigma_min > 0.0 && s.scene.sigma_min <= s.scene.sigma_max,
            "sigma range is empty");
    return s;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
    const fs::path dir = require_out(c);
    const SynthConfig s = synth_config(c);
    const auto videos = synthesize(s);
    write_dataset(dir, s, videos);
    const auto check = read_dataset(dir);  // re-fold and compare every tuple
    write_provenance(dir, c);
    out << "wrote " << check.size() << " videos of " << s.scene.frames << " frames ("
        << s.scene.width << "x" << s.scene.height << "x" << s.scene.channels << ", B=" << s.bits_b
        << ", A=" << s.bits_a << ")\n";
    return kExitOk;
}

// --- train

int cmd_train(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) throw InvalidArgument("train: --in <dataset dir> is required");
    const fs::path dir = require_out(c);
    const auto data = read_dataset(c.input);
    const ClipManifest top = read_manifest(read_file(fs::path(c.input) / "dataset.manifest"));
    if (c.holdout < 0 || static_cast<std::size_t>(c.holdout) >= data.size())
        throw InvalidArgument("train: --holdout must leave at least one training video");

    sst::ModelConfig cfg;
    if (!c.model_config.empty()) cfg = sst::ModelConfig::from_json(read_file(c.model_config));
    cfg.channels = top.channels;
    if (c.was_given("fraction")) cfg.fraction = c.fraction;
    if (c.was_given("radius")) cfg.radius = c.radius;
    if (c.was_given("clip_len")) cfg.clip_len = c.clip_len;
    if (c.was_given("seed")) cfg.seed = c.seed;
    cfg.validate();

    std::vector<sst::TrainingPair> pairs;
    const std::size_t n_train = data.size() - static_cast<std::size_t>(c.holdout);
    for (std::size_t i = 0; i < n_train; ++i) {
        auto p = sst::make_training_pairs(data[i].tuple.ground_truth, top.bits_a, cfg.clip_len);
        pairs.insert(pairs.end(), std::make_move_iterator(p.begin()),
                     std::make_move_iterator(p.end()));
    }
    sst::Model init{cfg, sst::init_parameters(cfg, cfg.seed)};
    sst::TrainOptions opts;
    opts.steps = c.steps;
    opts.lr = c.lr;
    opts.batch = c.batch;
    opts.seed = c.seed;
    const sst::TrainResult r = sst::train(pairs, init, opts);

    fs::create_directories(dir);
    write_file(dir / "model.ckpt", sst::save_checkpoint({cfg, r.params}));
    std::string log = "step,loss\n";
    for (std::size_t i = 0; i < r.losses.size(); ++i)
        log += std::to_string(i + 1) + "," + num(r.losses[i]) + "\n";
    write_file(dir / "losses.csv", log);
    write_provenance(dir, c);
    out << "trained " << r.params.count() << " parameters on " << pairs.size() << " pairs for "
        << c.steps << " steps";
    if (!r.losses.empty()) out << ", final loss " << num(r.losses.back());
    out << "\n";
    return kExitOk;
}

// --- infer

int cmd_infer(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) throw InvalidArgument("infer: --in is required");
    const fs::path dir = require_out(c);
    const fs::path in = manifest_path(c.input, "modulo");
    const ClipManifest m = load_manifest(in);
    const IntClip modulo = load_int_clip(in);
    const int bits_a = m.bits_a;
    const int bits_b = c.was_given("bits_b") ? c.bits_b : m.bits_b;
    if (bits_a >= bits_b) throw InvalidArgument("infer: A must be below B");
    const FlowOptions flow{c.flow_block, c.flow_radius};
    const sst::FallbackSource fb = c.fallback == "final" ? sst::FallbackSource::FinalMask
                                                         : sst::FallbackSource::SameOrder;

    std::unique_ptr<MaskPredictor> predictor;
    if (c.predictor == "oracle") {
        std::string truth = c.truth;
        if (truth.empty() && fs::is_directory(c.input) && fs::exists(fs::path(c.input) / "gt.manifest"))
            truth = (fs::path(c.input) / "gt.manifest").string();
        if (truth.empty()) throw InvalidArgument("infer: the oracle predictor needs --truth");
        predictor = std::make_unique<OraclePredictor>(load_int_clip(manifest_path(truth, "gt")), bits_a);
    } else if (c.predictor == "flow-only") {
        predictor = std::make_unique<sst::FlowOnlyPredictor>(flow, fb);
    } else if (c.predictor == "ssvit") {
        if (c.model.empty()) throw InvalidArgument("infer: the ssvit predictor needs --model");
        sst::Model model = sst::load_checkpoint(read_file(c.model));
        const double fraction = c.was_given("fraction") ? c.fraction : model.config.fraction;
        if (c.was_given("radius")) model.config.radius = c.radius;
        predictor = std::make_unique<sst::SsvitPredictor>(std::move(model), fraction, flow, fb);
    } else {
        throw InvalidArgument("infer: unknown predictor '" + c.predictor + "'");
    }

    const SlidingResult r = sliding_window_reconstruct(modulo, *predictor, c.clip_len, bits_b);
    ClipMeta meta{"reconstruction", bits_a, bits_b, m.seed, manifest_echo(c)};
    meta.extra.emplace_back("source", in.string());
    save_clip(dir, "recon", r.video, meta);

    std::string iters = "window,iterations\n";
    for (std::size_t i = 0; i < r.iterations.size(); ++i)
        iters += std::to_string(i) + "," + std::to_string(r.iterations[i]) + "\n";
    write_file(dir / "iterations.csv", iters);

    if (c.dump_flow) {
        std::ostringstream os;
        for (Index t = 1; t < modulo.frames(); ++t) {
            os << "# frame " << t - 1 << " -> " << t << "\n";
            write_flow(os, estimate_flow(modulo.samples.frame(t - 1), modulo.samples.frame(t), flow));
        }
        write_file(dir / "flow.txt", os.str());
    }
    write_provenance(dir, c);
    out << "reconstructed " << r.video.frames() << " frames over " << r.windows
        << " windows with the " << c.predictor << " predictor\n";
    return kExitOk;
}

// --- eval

std::string psnr_text(const Psnr& p) { return p.infinite ? "inf" : num(p.db); }

int cmd_eval(const RunConfig& c, std::ostream& out) {
    if (c.gt.empty() || c.est.empty()) throw InvalidArgument("eval: --gt and --est are required");
    const RealClip gt = load_as_real(manifest_path(c.gt, "gt"));
    const RealClip est = load_as_real(manifest_path(c.est, "recon"));
    if (!gt.same_shape(est))
        throw ValidationError("eval: shapes differ (" + shape_string(gt) + " vs " +
                              shape_string(est) + ")");
    SsimOptions so;
    so.windowed = c.windowed;
    const QualityReport q = evaluate_video(gt, est, c.exclude, so);
    std::string table = "frame,psnr_db,ssim\n";
    for (std::size_t i = 0; i < q.psnr.size(); ++i)
        table += std::to_string(i) + "," + psnr_text(q.psnr[i]) + "," + num(q.ssim[i]) + "\n";
    table += "mean," + (q.all_identical ? std::string("inf") : num(q.mean_psnr_db)) + "," +
             num(q.mean_ssim) + "\n";
    out << table;
    if (!c.output.empty()) {
        const fs::path dir = c.output;
        fs::create_directories(dir);
        write_file(dir / "eval.csv", table);
        nlohmann::ordered_json j;
        j["frames"] = q.psnr.size();
        j["exclude"] = c.exclude;
        j["windowed_ssim"] = c.windowed;
        j["mean_psnr_db"] = q.all_identical ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(q.mean_psnr_db);
        j["identical_frames"] = q.identical_frames;
        j["psnr_cap_db"] = kPsnrCapDb;
        j["mean_ssim"] = q.mean_ssim;
        write_file(dir / "summary.json", j.dump(2) + "\n");
        write_provenance(dir, c);
    }
    return kExitOk;
}

// --- tonemap

int cmd_tonemap(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) throw InvalidArgument("tonemap: --in is required");
    const fs::path dir = require_out(c);
    const fs::path in = manifest_path(c.input, "recon");
    const RealClip hdr = load_as_real(in);
    TonemapOptions opts;
    opts.alpha = c.alpha;
    const IntClip ldr = tonemap_video(hdr, opts);
    const ClipManifest src = load_manifest(in);
    ClipMeta meta{"tonemapped", src.bits_a, src.bits_b, src.seed, manifest_echo(c)};
    meta.extra.emplace_back("source", in.string());
    save_clip(dir, "tonemapped", ldr, meta);
    write_provenance(dir, c);
    out << "tone mapped " << ldr.frames() << " frames\n";
    return kExitOk;
}

// --- select

int cmd_select(const RunConfig& c, std::ostream& out) {
    if (c.input.empty()) throw InvalidArgument("select: --in is required");
    const fs::path dir = require_out(c);
    const fs::path in = manifest_path(c.input, "modulo");
    const IntClip clip = load_int_clip(in);

    sst::Model model;
    if (!c.model.empty()) {
        model = sst::load_checkpoint(read_file(c.model));
    } else {
        // Without a model the features are the normalised raw patch pixels.
        model.config.patch = c.patch;
        model.config.channels = clip.samples.channels();
        model.config.embed_dim = model.config.tube_pixels();
        model.config.layers = 0;
        model.params = sst::init_parameters(model.config, 0);
        const Index n = model.config.tube_pixels();
        nd::Vector& w = model.params.at("enc.w").mutable_values();
        w.setZero();
        for (Index i = 0; i < n; ++i) w[i * n + i] = 1.0;
    }
    if (model.config.channels != clip.samples.channels())
        throw ValidationError("select: model channel count differs from the clip");
    nd::NoGradGuard no_grad;
    const sst::EncodedClip enc = sst::encode_frames(model, clip);
    const EmbeddingVolume vol = sst::to_volume(enc);
    NsmOptions opts;
    opts.radius = c.radius;
    const NsmScoreVolume scores = nsm_scores(vol, opts);
    const SelectionResult sel = select_from_scores(vol, scores, c.fraction);

    RealClip heat(1, vol.length() * vol.height(), vol.width(), 1);
    for (Index i = 0; i < vol.tokens(); ++i) {
        const TokenCoord tc = vol.coord(i);
        heat(0, tc.s * vol.height() + tc.u, tc.v, 0) = scores.scores[i];
    }
    fs::create_directories(dir);
    write_file(dir / "nsm.pfm", write_pfm(heat));
    std::string list = "rank,s,u,v,score\n";
    for (std::size_t r = 0; r < sel.selected.size(); ++r) {
        const TokenCoord& tc = sel.selected[r];
        list += std::to_string(r) + "," + std::to_string(tc.s) + "," + std::to_string(tc.u) + "," +
                std::to_string(tc.v) + "," + num(scores.scores[vol.token_index(tc)]) + "\n";
    }
    write_file(dir / "selection.csv", list);
    write_provenance(dir, c);
    out << "selected " << sel.selected.size() << " of " << vol.tokens() << " tubes\n";
    return kExitOk;
}

int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidData:
    case ErrorKind::DegenerateInput:
    case ErrorKind::Parse:
    case ErrorKind::Validation:
        return kExitValidation;
    case ErrorKind::Io:
        return kExitIo;
    case ErrorKind::NumericalFailure:
    case ErrorKind::TrainingFailure:
        return kExitNumerical;
    case ErrorKind::ContractViolation:
        break;
    }
    return kExitOther;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"modvid: modulo video reconstruction toolkit"};
    app.require_subcommand(1);
    std::map<std::string, CLI::Option*> opts;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1, 256));
        opts["seed"] = sub->add_option("--seed", c.seed, "Random seed");
    };
    auto bits = [&](CLI::App* sub) {
        opts["bits_a"] = sub->add_option("--bits-a", c.bits_a, "Modulo bit depth A");
        opts["bits_b"] = sub->add_option("--bits-b", c.bits_b, "Ground-truth bit depth B");
    };
    auto selection = [&](CLI::App* sub) {
        opts["fraction"] = sub->add_option("--fraction", c.fraction, "Selected token fraction");
        opts["radius"] = sub->add_option("--radius", c.radius, "NSM neighbourhood radius");
    };

    auto* fold = app.add_subcommand("fold", "Fold a ground-truth clip to A bits");
    fold->add_option("--in", c.input, "Ground-truth manifest or tuple directory")->required();
    fold->add_option("--out", c.output, "Output directory")->required();
    bits(fold);
    common(fold);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--spec", c.spec, "JSON scene/dataset spec");
    synth->add_option("--out", c.output, "Output directory")->required();
    bits(synth);
    common(synth);

    auto* train = app.add_subcommand("train", "Train the mask predictor");
    train->add_option("--in", c.input, "Dataset directory")->required();
    train->add_option("--out", c.output, "Output directory")->required();
    train->add_option("--model-config", c.model_config, "JSON model config");
    train->add_option("--steps", c.steps, "Adam steps")->check(CLI::NonNegativeNumber);
    train->add_option("--lr", c.lr, "Learning rate");
    train->add_option("--batch", c.batch, "Pairs per step")->check(CLI::PositiveNumber);
    train->add_option("--holdout", c.holdout, "Trailing videos left out of training");
    opts["clip_len"] = train->add_option("--clip-len", c.clip_len, "Window predecessors n_c");
    selection(train);
    common(train);

    auto* infer = app.add_subcommand("infer", "Reconstruct a modulo video");
    infer->add_option("--in", c.input, "Modulo manifest or tuple directory")->required();
    infer->add_option("--out", c.output, "Output directory")->required();
    infer->add_option("--predictor", c.predictor, "oracle, flow-only or ssvit")
        ->check(CLI::IsMember({"oracle", "flow-only", "ssvit"}));
    infer->add_option("--truth", c.truth, "Ground truth for the oracle predictor");
    infer->add_option("--model", c.model, "Checkpoint for the ssvit predictor");
    infer->add_option("--clip-len", c.clip_len, "Window predecessors n_c")->check(CLI::PositiveNumber);
    infer->add_option("--flow-block", c.flow_block, "Block size for matching")->check(CLI::PositiveNumber);
    infer->add_option("--flow-radius", c.flow_radius, "Search radius")->check(CLI::NonNegativeNumber);
    infer->add_option("--fallback", c.fallback, "Warped history: final or same-order")
        ->check(CLI::IsMember({"final", "same-order"}));
    infer->add_flag("--dump-flow", c.dump_flow, "Write frame-to-frame flow fields");
    bits(infer);
    selection(infer);
    common(infer);

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM of a reconstruction");
    eval->add_option("--gt", c.gt, "Ground-truth manifest")->required();
    eval->add_option("--est", c.est, "Estimate manifest")->required();
    eval->add_option("--exclude", c.exclude, "Boundary pixels excluded per side")
        ->check(CLI::NonNegativeNumber);
    eval->add_flag("--windowed", c.windowed, "Gaussian-windowed SSIM");
    eval->add_option("--out", c.output, "Output directory for eval.csv");
    common(eval);

    auto* tonemap = app.add_subcommand("tonemap", "Temporally smoothed Reinhard tone mapping");
    tonemap->add_option("--in", c.input, "HDR manifest")->required();
    tonemap->add_option("--out", c.output, "Output directory")->required();
    tonemap->add_option("--alpha", c.alpha, "Smoothing weight")->check(CLI::Range(0.0, 1.0));
    common(tonemap);

    auto* select = app.add_subcommand("select", "NSM scores and token selection");
    select->add_option("--in", c.input, "Clip manifest or tuple directory")->required();
    select->add_option("--out", c.output, "Output directory")->required();
    select->add_option("--model", c.model, "Checkpoint whose encoder supplies the features");
    select->add_option("--patch", c.patch, "Patch size without a model")->check(CLI::PositiveNumber);
    selection(select);
    common(select);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
    for (const auto& [k, o] : opts)
        if (o->count() > 0) c.given[k] = true;

    try {
        set_thread_count(c.threads);
        if (c.command == "fold") return cmd_fold(c, out);
        if (c.command == "synth") return cmd_synth(c, out);
        if (c.command == "train") return cmd_train(c, out);
        if (c.command == "infer") return cmd_infer(c, out);
        if (c.command == "eval") return cmd_eval(c, out);
        if (c.command == "tonemap") return cmd_tonemap(c, out);
        if (c.command == "select") return cmd_select(c, out);
        err << "modvid: unknown subcommand\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "modvid " << c.command << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "modvid " << c.command << ": io: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "modvid " << c.command << ": " << e.what() << "\n";
        return kExitOther;
    }
}

} // namespace modvid
