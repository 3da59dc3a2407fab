// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>

#include "modvid/clip.hpp"
#include "modvid/errors.hpp"
#include "modvid/parallel.hpp"

namespace modvid {

namespace {
std::atomic<int> g_threads{1};
} // namespace

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }
int thread_count() { return g_threads.load(); }

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InvalidData: return "invalid-data";
        case ErrorKind::ContractViolation: return "predictor-contract-violation";
        case ErrorKind::DegenerateInput: return "degenerate-input";
        case ErrorKind::NumericalFailure: return "numerical-failure";
        case ErrorKind::TrainingFailure: return "training-failure";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Validation: return "validation-error";
        case ErrorKind::Io: return "io-error";
    }
    return "error";
}

bool IntClip::valid() const {
    if (bit_depth <= 0 || bit_depth > 62) return false;
    if (samples.empty()) return true;
    const Sample limit = Sample{1} << bit_depth;
    return samples.array().minCoeff() >= 0 && samples.array().maxCoeff() < limit;
}

void IntClip::validate() const {
    if (bit_depth <= 0 || bit_depth > 62)
        throw InvalidArgument("IntClip: unsupported bit depth " + std::to_string(bit_depth));
    const Sample limit = Sample{1} << bit_depth;
    const auto& a = samples.array();
    for (Index i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || a[i] >= limit)
            throw InvalidData("IntClip: sample " + std::to_string(a[i]) + " at index " +
                              std::to_string(i) + " outside [0, 2^" + std::to_string(bit_depth) +
                              ")");
    }
}

} // namespace modvid
