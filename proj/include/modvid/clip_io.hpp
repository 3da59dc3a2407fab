// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modvid/clip.hpp"

namespace modvid {

// --- PFM: 32-bit float gray ("Pf") or RGB ("PF"), rows stored bottom-to-top.

/// Encodes a single-frame clip with 1 or 3 channels as little-endian PFM.
std::string write_pfm(const RealClip& frame);
/// Decodes PFM bytes. `expected_channels` of 0 accepts either kind; otherwise
/// a different channel count is an InvalidData error.
RealClip read_pfm(std::string_view bytes, int expected_channels = 0);

// --- PGM16: binary P5, maxval 65535, big-endian 16-bit samples.

std::string write_pgm16(const SampleClip& frame);
SampleClip read_pgm16(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// --- Manifests: "modvid-manifest 1", key: value header, "frames:" list.

struct ClipManifest {
    int version = 1;
    std::string kind;
    Index width = 0;
    Index height = 0;
    Index channels = 1;
    Index frame_count = 0;
    int bits_a = 8;
    int bits_b = 12;
    std::optional<int> bit_depth;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> extra;  // unknown keys, in file order
    std::vector<std::string> frames;  // one line per frame (space-separated files per channel)

    const std::string* find_extra(const std::string& key) const;
    void set_extra(const std::string& key, const std::string& value);

    bool operator==(const ClipManifest&) const = default;
};

std::string write_manifest(const ClipManifest& m);
/// Parses and validates the header. Missing keys, inconsistent counts, or
/// bits_a >= bits_b raise ValidationError (syntax problems raise ParseError).
ClipManifest read_manifest(std::string_view text);
/// Checks that every referenced file exists under `dir`.
void validate_manifest_files(const ClipManifest& m, const std::filesystem::path& dir);

struct ClipMeta {
    std::string kind;
    int bits_a = 8;
    int bits_b = 12;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> extra;
};

/// Writes `<dir>/<stem>.manifest` plus one PGM16 per frame and channel.
ClipManifest save_clip(const std::filesystem::path& dir, const std::string& stem,
                       const IntClip& clip, const ClipMeta& meta);
/// Writes `<dir>/<stem>.manifest` plus one PFM per frame.
ClipManifest save_clip(const std::filesystem::path& dir, const std::string& stem,
                       const RealClip& clip, const ClipMeta& meta);

IntClip load_int_clip(const std::filesystem::path& manifest_path);
RealClip load_real_clip(const std::filesystem::path& manifest_path);
ClipManifest load_manifest(const std::filesystem::path& manifest_path);

} // namespace modvid
