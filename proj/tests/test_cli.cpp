// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "support.hpp"

#include "modvid/cli.hpp"
#include "modvid/clip_io.hpp"
#include "modvid/datagen.hpp"
#include "modvid/sst.hpp"

using namespace modvid;
namespace fs = std::filesystem;
using modvid::testing::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "modvid");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string p(const fs::path& x) { return x.string(); }

/// Every regular file under `dir` except provenance.manifest, by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "provenance.manifest")
            out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

void tiny_spec(const fs::path& file, int videos = 2) {
    write_file(file, R"({"videos": )" + std::to_string(videos) +
                         R"(, "width": 16, "height": 16, "frames": 6, "bits_b": 10, "seed": 5})");
}

} // namespace

TEST_CASE("fold of an unfolded video is the identity") {
    TempDir d("cli_fold");
    Rng rng(1);
    const IntClip gt{modvid::testing::random_samples(rng, 3, 5, 7, 1, 0, 255), 10};
    save_clip(d.path / "in", "gt", gt, {"ground_truth", 8, 10, 4, {}});
    const Outcome o = run({"fold", "--in", p(d.path / "in"), "--out", p(d.path / "out")});
    REQUIRE(o.code == kExitOk);
    CHECK(load_int_clip(d.path / "out/modulo.manifest").samples == gt.samples);
    CHECK((load_int_clip(d.path / "out/counts.manifest").samples.array() == 0).all());
    const ClipManifest m = load_manifest(d.path / "out/modulo.manifest");
    CHECK(m.bits_a == 8);
    CHECK(m.bits_b == 10);
    REQUIRE(m.find_extra("source") != nullptr);
    CHECK(m.find_extra("source")->find("gt.manifest") != std::string::npos);
    REQUIRE(m.find_extra("run_command") != nullptr);
    CHECK(*m.find_extra("run_command") == "fold");
    const std::string prov = read_file(d.path / "out/provenance.manifest");
    CHECK(prov.rfind("modvid-run 1\n", 0) == 0);
    CHECK(prov.find("threads: 1\n") != std::string::npos);
}

TEST_CASE("fold errors map to exit codes") {
    TempDir d("cli_fold_err");
    Rng rng(2);
    save_clip(d.path / "in", "gt", IntClip{modvid::testing::random_samples(rng, 2, 4, 4, 1, 0, 1023), 10},
              {"ground_truth", 8, 10, {}, {}});
    Outcome o = run({"fold", "--in", p(d.path / "in"), "--out", p(d.path / "o"), "--bits-a", "10"});
    CHECK(o.code == kExitValidation);
    CHECK(o.err.find("A = 10") != std::string::npos);
    CHECK_FALSE(fs::exists(d.path / "o/modulo.manifest"));

    o = run({"fold", "--in", p(d.path / "missing"), "--out", p(d.path / "o")});
    CHECK(o.code == kExitIo);
    CHECK_FALSE(o.err.empty());

    write_file(d.path / "in/gt.manifest", "garbage\n");
    o = run({"fold", "--in", p(d.path / "in"), "--out", p(d.path / "o")});
    CHECK(o.code == kExitValidation);

    CHECK(run({"fold", "--out", "x"}).code == kExitValidation);
    CHECK(run({"nonsense"}).code == kExitValidation);
    CHECK(run({"fold", "--in", "a", "--out", "b", "--threads", "0"}).code == kExitValidation);
    CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("synth is reproducible and validated") {
    TempDir d("cli_synth");
    tiny_spec(d.path / "spec.json");
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "a")}).code == kExitOk);
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "b"), "--threads", "3"})
                .code == kExitOk);
    CHECK(snapshot(d.path / "a") == snapshot(d.path / "b"));
    CHECK(read_dataset(d.path / "a").size() == 2);

    write_file(d.path / "bad.json", R"({"videos": 1, "colour": true})");
    Outcome o = run({"synth", "--spec", p(d.path / "bad.json"), "--out", p(d.path / "c")});
    CHECK(o.code == kExitValidation);
    CHECK(o.err.find("colour") != std::string::npos);
    write_file(d.path / "bad.json", R"({"bits_a": 12, "bits_b": 10})");
    CHECK(run({"synth", "--spec", p(d.path / "bad.json"), "--out", p(d.path / "c")}).code == kExitValidation);
    write_file(d.path / "bad.json", "{");
    CHECK(run({"synth", "--spec", p(d.path / "bad.json"), "--out", p(d.path / "c")}).code == kExitValidation);
}

TEST_CASE("synth defaults to 12-bit ground truth") {
    TempDir d("cli_synth_default");
    write_file(d.path / "spec.json", R"({"videos": 1, "width": 8, "height": 8, "frames": 2})");
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "a")}).code == kExitOk);
    const ClipManifest m = load_manifest(d.path / "a/dataset.manifest");
    CHECK(m.bits_b == 12);
    CHECK(m.bits_a == 8);
}

TEST_CASE("oracle inference is exact and eval reports the sentinel") {
    TempDir d("cli_oracle");
    tiny_spec(d.path / "spec.json", 1);
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "ds")}).code == kExitOk);
    const fs::path tuple = d.path / "ds/video_000";
    Outcome o = run({"infer", "--in", p(tuple), "--predictor", "oracle", "--out", p(d.path / "r"),
                     "--dump-flow"});
    REQUIRE(o.code == kExitOk);
    const IntClip gt = load_int_clip(tuple / "gt.manifest");
    const IntClip rec = load_int_clip(d.path / "r/recon.manifest");
    CHECK(rec.samples == gt.samples);
    CHECK(fs::exists(d.path / "r/flow.txt"));
    CHECK(read_file(d.path / "r/iterations.csv").rfind("window,iterations\n", 0) == 0);

    o = run({"eval", "--gt", p(tuple / "gt.manifest"), "--est", p(d.path / "r"), "--exclude", "2",
             "--out", p(d.path / "e")});
    REQUIRE(o.code == kExitOk);
    std::istringstream lines(o.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 1 + 6 + 1);
    CHECK(rows[0] == "frame,psnr_db,ssim");
    for (std::size_t i = 1; i <= 6; ++i) CHECK(rows[i] == std::to_string(i - 1) + ",inf,1");
    CHECK(rows.back() == "mean,inf,1");
    CHECK(fs::exists(d.path / "e/summary.json"));

    o = run({"eval", "--gt", p(tuple / "gt.manifest"), "--est", p(tuple / "modulo.manifest")});
    REQUIRE(o.code == kExitOk);
    CHECK(o.out.find("mean,inf,") == std::string::npos);

    CHECK(run({"infer", "--in", p(tuple), "--predictor", "magic", "--out", p(d.path / "x")}).code ==
          kExitValidation);
    CHECK(run({"infer", "--in", p(tuple / "modulo.manifest"), "--out", p(d.path / "x")}).code ==
          kExitValidation);  // oracle without truth
}

TEST_CASE("select writes a readable heat map") {
    TempDir d("cli_select");
    Rng rng(3);
    save_clip(d.path / "in", "modulo", IntClip{modvid::testing::random_samples(rng, 5, 16, 24, 1, 0, 255), 8},
              {"modulo", 8, 10, {}, {}});
    const Outcome o = run({"select", "--in", p(d.path / "in"), "--out", p(d.path / "s"), "--fraction",
                           "0.25"});
    REQUIRE(o.code == kExitOk);
    const RealClip heat = read_pfm(read_file(d.path / "s/nsm.pfm"));
    CHECK(heat.height() == 5 * 2);
    CHECK(heat.width() == 3);
    CHECK(heat.array().minCoeff() >= 0.0);
    std::istringstream csv(read_file(d.path / "s/selection.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 8);  // ceil(0.25 * 30)
}

TEST_CASE("tonemap writes an 8-bit clip") {
    TempDir d("cli_tonemap");
    tiny_spec(d.path / "spec.json", 1);
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "ds")}).code == kExitOk);
    REQUIRE(run({"tonemap", "--in", p(d.path / "ds/video_000/hdr.manifest"), "--out", p(d.path / "t")})
                .code == kExitOk);
    const IntClip ldr = load_int_clip(d.path / "t/tonemapped.manifest");
    CHECK(ldr.frames() == 6);
    CHECK(ldr.samples.array().maxCoeff() <= 255);
    CHECK(run({"tonemap", "--in", p(d.path / "ds/video_000/hdr.manifest"), "--out", p(d.path / "t"),
               "--alpha", "1.5"}).code == kExitValidation);
}

TEST_CASE("train then infer with the learned predictor") {
    TempDir d("cli_train");
    tiny_spec(d.path / "spec.json", 2);
    write_file(d.path / "model.json", R"({"patch": 4, "embed_dim": 6, "token_dim": 8, "mlp_hidden": 8})");
    REQUIRE(run({"synth", "--spec", p(d.path / "spec.json"), "--out", p(d.path / "ds")}).code == kExitOk);
    const std::vector<std::string> train{"train", "--in", p(d.path / "ds"), "--model-config",
                                         p(d.path / "model.json"), "--steps", "3", "--holdout", "1"};
    auto a = train, b = train;
    a.insert(a.end(), {"--out", p(d.path / "m1")});
    b.insert(b.end(), {"--out", p(d.path / "m2"), "--threads", "2"});
    REQUIRE(run(a).code == kExitOk);
    REQUIRE(run(b).code == kExitOk);
    CHECK(snapshot(d.path / "m1") == snapshot(d.path / "m2"));
    const sst::Model m = sst::load_checkpoint(read_file(d.path / "m1/model.ckpt"));
    CHECK(m.config.patch == 4);

    const Outcome o = run({"infer", "--in", p(d.path / "ds/video_001"), "--predictor", "ssvit", "--model",
                           p(d.path / "m1/model.ckpt"), "--fraction", "0.5", "--out", p(d.path / "r")});
    REQUIRE(o.code == kExitOk);
    CHECK(load_int_clip(d.path / "r/recon.manifest").bit_depth == 10);

    auto bad = train;
    bad.insert(bad.end(), {"--out", p(d.path / "m3"), "--holdout", "2"});
    CHECK(run(bad).code == kExitValidation);
    write_file(d.path / "m1/model.ckpt", "MODVIDCKxx");
    CHECK(run({"infer", "--in", p(d.path / "ds/video_001"), "--predictor", "ssvit", "--model",
               p(d.path / "m1/model.ckpt"), "--out", p(d.path / "r")}).code == kExitValidation);
}

TEST_CASE("binary exit status") {
    const char* bin = std::getenv("MODVID_BIN");
    if (bin == nullptr) return;
    const std::string cmd = std::string("\"") + bin + "\" fold --in /nonexistent --out /tmp/x 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == kExitIo);
    const int bad = std::system((std::string("\"") + bin + "\" --bogus 2>/dev/null >/dev/null").c_str());
    CHECK(WEXITSTATUS(bad) == kExitValidation);
}
