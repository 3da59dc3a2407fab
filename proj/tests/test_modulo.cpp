// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "support.hpp"

#include "modvid/modulo.hpp"

using namespace modvid;
using modvid::testing::random_clip;

namespace {

IntClip single(Sample v, int bits) {
    SampleClip s(1, 1, 1, 1);
    s(0, 0, 0, 0) = v;
    return {s, bits};
}

FoldCountMap counts_of(std::vector<Sample> v) {
    FoldCountMap m{SampleClip(1, 1, static_cast<Index>(v.size()), 1)};
    for (std::size_t i = 0; i < v.size(); ++i) m.counts.array()[static_cast<Index>(i)] = v[i];
    return m;
}

// Returns all-ones masks forever.
struct AlwaysOne : MaskPredictor {
    int calls = 0;
    BinaryFoldMask predict(const IntClip& current, int order) override {
        ++calls;
        const SampleClip& s = current.samples;
        return {MaskClip(s.frames(), s.height(), s.width(), s.channels(), 1), order};
    }
};

struct WrongShape : MaskPredictor {
    BinaryFoldMask predict(const IntClip&, int order) override { return {MaskClip(1, 1, 1, 1, 1), order}; }
};

struct NotBinary : MaskPredictor {
    BinaryFoldMask predict(const IntClip& current, int order) override {
        const SampleClip& s = current.samples;
        return {MaskClip(s.frames(), s.height(), s.width(), s.channels(), 2), order};
    }
};

// Records every clip it is shown, then defers to an oracle.
struct Recorder : MaskPredictor {
    OraclePredictor inner;
    std::vector<IntClip> seen;
    Recorder(const IntClip& truth, int a) : inner(truth, a) {}
    void begin_window(const IntClip& m, Index first) override { inner.begin_window(m, first); }
    BinaryFoldMask predict(const IntClip& current, int order) override {
        seen.push_back(current);
        return inner.predict(current, order);
    }
};

} // namespace

TEST_CASE("fold_clip worked values") {
    auto a = fold_clip(single(100, 10), 8);
    CHECK(a.modulo.samples(0, 0, 0, 0) == 100);
    CHECK(a.counts.counts(0, 0, 0, 0) == 0);
    CHECK(a.modulo.bit_depth == 8);

    auto b = fold_clip(single(4095, 12), 8);
    CHECK(b.modulo.samples(0, 0, 0, 0) == 255);
    CHECK(b.counts.counts(0, 0, 0, 0) == 15);

    auto c = fold_clip(single(256, 12), 8);
    CHECK(c.modulo.samples(0, 0, 0, 0) == 0);
    CHECK(c.counts.counts(0, 0, 0, 0) == 1);
}

TEST_CASE("fold_clip rejects A >= B and negative samples") {
    CHECK_THROWS_AS(fold_clip(single(3, 8), 8), InvalidArgument);
    CHECK_THROWS_AS(fold_clip(single(3, 8), 9), InvalidArgument);
    CHECK_THROWS_AS(fold_clip(single(-1, 12), 8), InvalidData);
}

TEST_CASE("fold_clip reconstructs each sample exactly") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const IntClip x = random_clip(rng, 2, 3, 4, 2, 12);
        const auto f = fold_clip(x, 8);
        CHECK((f.modulo.samples.array() >= 0).all());
        CHECK((f.modulo.samples.array() < 256).all());
        CHECK((f.modulo.samples.array() + 256 * f.counts.counts.array() == x.samples.array()).all());
        CHECK(f.counts.max_count() <= 15);
    }
}

TEST_CASE("masks_from_counts worked values") {
    auto m = masks_from_counts(counts_of({0, 1, 2}));
    REQUIRE(m.size() == 2);
    CHECK(m[0].order == 1);
    CHECK(m[0].bits.array()[0] == 0);
    CHECK(m[0].bits.array()[1] == 1);
    CHECK(m[0].bits.array()[2] == 1);
    CHECK(m[1].bits.array()[0] == 0);
    CHECK(m[1].bits.array()[1] == 0);
    CHECK(m[1].bits.array()[2] == 1);

    auto three = masks_from_counts(counts_of({3}));
    REQUIRE(three.size() == 3);
    for (const auto& k : three) CHECK(k.bits.array()[0] == 1);

    CHECK(masks_from_counts(counts_of({0, 0, 0})).empty());
}

TEST_CASE("masks are nested and sum to the counts") {
    Rng rng(9);
    for (int trial = 0; trial < 40; ++trial) {
        FoldCountMap c{modvid::testing::random_samples(rng, 2, 3, 3, 1, 0, 15)};
        const auto masks = masks_from_counts(c);
        CHECK(static_cast<Sample>(masks.size()) == c.max_count());
        SampleClip total(2, 3, 3, 1);
        for (std::size_t k = 0; k < masks.size(); ++k) {
            CHECK(masks[k].is_binary());
            if (k + 1 < masks.size())
                CHECK((masks[k + 1].bits.array() <= masks[k].bits.array()).all());
            total.array() += masks[k].bits.array().cast<Sample>();
        }
        CHECK(total == c.counts);
    }
}

TEST_CASE("apply_mask_update worked values and errors") {
    BinaryFoldMask one{MaskClip(1, 1, 1, 1, 1), 1};
    const IntClip up = apply_mask_update(single(255, 8), one, 8);
    CHECK(up.samples(0, 0, 0, 0) == 511);
    CHECK(up.bit_depth >= 9);

    BinaryFoldMask zero{MaskClip(1, 1, 1, 1, 0), 1};
    CHECK(apply_mask_update(single(17, 8), zero, 8).samples == single(17, 8).samples);

    Rng rng(2);
    const IntClip x = random_clip(rng, 2, 2, 2, 1, 8);
    BinaryFoldMask m1{modvid::testing::random_mask(rng, 2, 2, 2, 1), 1};
    BinaryFoldMask m2{modvid::testing::random_mask(rng, 2, 2, 2, 1), 2};
    const IntClip twice = apply_mask_update(apply_mask_update(x, m1, 8), m2, 8);
    CHECK((twice.samples.array() ==
           x.samples.array() + 256 * (m1.bits.array().cast<Sample>() + m2.bits.array().cast<Sample>()))
              .all());

    BinaryFoldMask wrong{MaskClip(1, 2, 2, 1, 0), 1};
    CHECK_THROWS_AS(apply_mask_update(x, wrong, 8), InvalidArgument);
}

TEST_CASE("run_inference with the oracle restores ground truth") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const IntClip gt = random_clip(rng, 5, 4, 4, 1, 12);
        const auto f = fold_clip(gt, 8);
        OraclePredictor oracle(gt, 8);
        oracle.begin_window(f.modulo, 0);
        const InferenceResult r = run_inference(f.modulo, oracle, 12);
        CHECK(r.reconstruction.samples == gt.samples);
        CHECK(static_cast<Sample>(r.masks.size()) == f.counts.max_count());
    }
}

TEST_CASE("run_inference on an unfolded clip applies nothing") {
    Rng rng(4);
    const IntClip gt = random_clip(rng, 5, 4, 4, 1, 8);
    const IntClip as12{gt.samples, 12};
    const auto f = fold_clip(as12, 8);
    OraclePredictor oracle(as12, 8);
    const InferenceResult r = run_inference(f.modulo, oracle, 12);
    CHECK(r.masks.empty());
    CHECK(r.reconstruction.samples == gt.samples);
    CHECK(r.predictor_calls == 1);
}

TEST_CASE("run_inference halts after 2^(B-A)-1 masks") {
    Rng rng(1);
    const IntClip m = random_clip(rng, 1, 2, 2, 1, 8);
    AlwaysOne p;
    const InferenceResult r = run_inference(m, p, 12);
    CHECK(r.masks.size() == 15);
    CHECK(p.calls == 15);
    CHECK((r.reconstruction.samples.array() == m.samples.array() + 15 * 256).all());

    AlwaysOne q;
    CHECK(run_inference(m, q, 10).masks.size() == 3);
}

TEST_CASE("run_inference rejects predictor contract violations") {
    Rng rng(1);
    const IntClip m = random_clip(rng, 1, 2, 2, 1, 8);
    WrongShape w;
    CHECK_THROWS_AS(run_inference(m, w, 12), ContractViolation);
    NotBinary nb;
    CHECK_THROWS_AS(run_inference(m, nb, 12), ContractViolation);
    IdentityPredictor id;
    CHECK_THROWS_AS(run_inference(m, id, 8), InvalidArgument);
}

TEST_CASE("reconstruction is monotone across iterations") {
    Rng rng(31);
    const IntClip gt = random_clip(rng, 3, 4, 4, 1, 12);
    const auto f = fold_clip(gt, 8);
    Recorder rec(gt, 8);
    run_inference(f.modulo, rec, 12);
    for (std::size_t i = 1; i < rec.seen.size(); ++i)
        CHECK((rec.seen[i].samples.array() >= rec.seen[i - 1].samples.array()).all());
}

TEST_CASE("sliding window counts and boundary frames") {
    Rng rng(8);
    const IntClip gt = random_clip(rng, 10, 4, 4, 1, 10);
    const auto f = fold_clip(gt, 8);
    OraclePredictor oracle(gt, 8);
    const SlidingResult r = sliding_window_reconstruct(f.modulo, oracle, 4, 10);
    CHECK(r.windows == 6);
    CHECK(r.iterations.size() == 6);
    CHECK(r.video.frames() == 10);
    CHECK(r.video.samples == gt.samples);

    SampleClip flat(7, 3, 3, 1, 42);
    IdentityPredictor id;
    const SlidingResult c = sliding_window_reconstruct({flat, 8}, id, 4, 12);
    CHECK(c.video.samples == flat);

    CHECK_THROWS_AS(sliding_window_reconstruct(f.modulo.frame_range(0, 4), oracle, 4, 10),
                    InvalidArgument);
}

TEST_CASE("IntClip validation") {
    IntClip ok = single(255, 8);
    CHECK(ok.valid());
    IntClip bad = single(256, 8);
    CHECK_FALSE(bad.valid());
    CHECK_THROWS_AS(bad.validate(), InvalidData);
}
