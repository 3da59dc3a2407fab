// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/clip_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace modvid {

namespace fs = std::filesystem;

namespace {

// Byte cursor over a netpbm-style header.
class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view token() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            ++pos_;
        if (start == pos_) throw ParseError("unexpected end of header", start);
        return bytes_.substr(start, pos_ - start);
    }

    long long integer(const char* what) {
        const std::size_t at = (skip_space_and_comments(), pos_);
        const std::string_view t = token();
        long long v = 0;
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size())
            throw ParseError(std::string("malformed ") + what, at);
        return v;
    }

    double real(const char* what) {
        const std::size_t at = (skip_space_and_comments(), pos_);
        const std::string t(token());
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (end != t.c_str() + t.size() || !std::isfinite(v))
            throw ParseError(std::string("malformed ") + what, at);
        return v;
    }

    // Exactly one whitespace byte separates the header from the payload.
    void single_space() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            throw ParseError("missing separator before payload", pos_);
        ++pos_;
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }

void require_payload(std::string_view bytes, std::size_t offset, std::size_t need) {
    if (bytes.size() < offset + need)
        throw ParseError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - std::min(bytes.size(), offset)),
                         bytes.size());
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

Index parse_index(const std::string& v, const std::string& key) {
    Index out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError("manifest: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

std::string frame_name(const std::string& stem, Index t, Index c, Index channels, const char* ext) {
    char buf[64];
    if (channels > 1)
        std::snprintf(buf, sizeof(buf), "_%04lld_c%lld", static_cast<long long>(t),
                      static_cast<long long>(c));
    else
        std::snprintf(buf, sizeof(buf), "_%04lld", static_cast<long long>(t));
    return stem + buf + ext;
}

ClipManifest base_manifest(const ClipMeta& meta, Index frames, Index h, Index w, Index c) {
    ClipManifest m;
    m.kind = meta.kind;
    m.width = w;
    m.height = h;
    m.channels = c;
    m.frame_count = frames;
    m.bits_a = meta.bits_a;
    m.bits_b = meta.bits_b;
    m.seed = meta.seed;
    m.extra = meta.extra;
    return m;
}

} // namespace

std::string write_pfm(const RealClip& frame) {
    if (frame.frames() != 1) throw InvalidArgument("write_pfm: expected a single frame");
    if (frame.channels() != 1 && frame.channels() != 3)
        throw InvalidArgument("write_pfm: PFM holds 1 or 3 channels, got " +
                              std::to_string(frame.channels()));
    if (!frame.array().isFinite().all()) throw InvalidData("write_pfm: non-finite sample");
    std::string out = frame.channels() == 3 ? "PF\n" : "Pf\n";
    out += std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + static_cast<std::size_t>(frame.size()) * 4);
    std::size_t at = header;
    for (Index y = frame.height() - 1; y >= 0; --y)
        for (Index x = 0; x < frame.width(); ++x)
            for (Index c = 0; c < frame.channels(); ++c) {
                const std::uint32_t b = float_bits(static_cast<float>(frame(0, y, x, c)));
                for (int k = 0; k < 4; ++k) out[at++] = static_cast<char>((b >> (8 * k)) & 0xFF);
            }
    return out;
}

RealClip read_pfm(std::string_view bytes, int expected_channels) {
    HeaderReader r(bytes);
    const std::string_view magic = r.token();
    Index channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw ParseError("not a PFM file (magic '" + std::string(magic) + "')", 0);
    if (expected_channels != 0 && expected_channels != channels)
        throw InvalidData("read_pfm: channel mismatch, file has " + std::to_string(channels) +
                          ", expected " + std::to_string(expected_channels));
    const long long w = r.integer("width");
    const long long h = r.integer("height");
    if (w <= 0 || h <= 0) throw ParseError("non-positive PFM dimensions", r.pos());
    const double scale = r.real("scale");
    if (scale == 0.0) throw ParseError("PFM scale must be non-zero", r.pos());
    r.single_space();
    const bool little = scale < 0.0;
    const std::size_t payload = static_cast<std::size_t>(w * h * channels) * 4;
    require_payload(bytes, r.pos(), payload);

    RealClip out(1, h, w, channels);
    std::size_t at = r.pos();
    for (Index y = h - 1; y >= 0; --y)
        for (Index x = 0; x < w; ++x)
            for (Index c = 0; c < channels; ++c) {
                std::uint32_t b = 0;
                for (int k = 0; k < 4; ++k) {
                    const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + k]));
                    b |= little ? byte << (8 * k) : byte << (8 * (3 - k));
                }
                at += 4;
                out(0, y, x, c) = static_cast<double>(std::bit_cast<float>(b));
            }
    return out;
}

std::string write_pgm16(const SampleClip& frame) {
    if (frame.frames() != 1 || frame.channels() != 1)
        throw InvalidArgument("write_pgm16: expected a single one-channel frame");
    if (!frame.empty() && (frame.array().minCoeff() < 0 || frame.array().maxCoeff() > 65535))
        throw InvalidData("write_pgm16: sample outside [0, 65535]");
    std::string out = "P5\n" + std::to_string(frame.width()) + " " +
                      std::to_string(frame.height()) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + static_cast<std::size_t>(frame.size()) * 2);
    for (Index i = 0; i < frame.size(); ++i) {
        const auto v = static_cast<std::uint16_t>(frame.array()[i]);
        out[header + 2 * i] = static_cast<char>(v >> 8);
        out[header + 2 * i + 1] = static_cast<char>(v & 0xFF);
    }
    return out;
}

SampleClip read_pgm16(std::string_view bytes) {
    HeaderReader r(bytes);
    if (r.token() != "P5") throw ParseError("not a binary PGM (P5) file", 0);
    const long long w = r.integer("width");
    const long long h = r.integer("height");
    const std::size_t maxval_at = r.pos();
    const long long maxval = r.integer("maxval");
    if (w <= 0 || h <= 0) throw ParseError("non-positive PGM dimensions", maxval_at);
    if (maxval <= 0 || maxval > 65535) throw ParseError("PGM maxval out of range", maxval_at);
    r.single_space();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    require_payload(bytes, r.pos(), static_cast<std::size_t>(w * h) * bps);

    SampleClip out(1, h, w, 1);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + r.pos());
    for (Index i = 0; i < out.size(); ++i) {
        const Sample v = bps == 2 ? (Sample{p[2 * i]} << 8) | p[2 * i + 1] : Sample{p[i]};
        if (v > maxval)
            throw InvalidData("read_pgm16: sample " + std::to_string(v) + " exceeds maxval");
        out.array()[i] = v;
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

const std::string* ClipManifest::find_extra(const std::string& key) const {
    for (const auto& [k, v] : extra)
        if (k == key) return &v;
    return nullptr;
}

void ClipManifest::set_extra(const std::string& key, const std::string& value) {
    for (auto& [k, v] : extra)
        if (k == key) {
            v = value;
            return;
        }
    extra.emplace_back(key, value);
}

std::string write_manifest(const ClipManifest& m) {
    std::ostringstream os;
    os << "modvid-manifest " << m.version << "\n";
    os << "kind: " << m.kind << "\n";
    os << "width: " << m.width << "\n";
    os << "height: " << m.height << "\n";
    os << "channels: " << m.channels << "\n";
    os << "frame_count: " << m.frame_count << "\n";
    os << "bits_a: " << m.bits_a << "\n";
    os << "bits_b: " << m.bits_b << "\n";
    if (m.bit_depth) os << "bit_depth: " << *m.bit_depth << "\n";
    if (m.seed) os << "seed: " << *m.seed << "\n";
    for (const auto& [k, v] : m.extra) os << k << ": " << v << "\n";
    os << "frames:\n";
    for (const auto& f : m.frames) os << f << "\n";
    return os.str();
}

ClipManifest read_manifest(std::string_view text) {
    ClipManifest m;
    std::size_t pos = 0;
    auto next_line = [&](std::string& line) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        line = std::string(text.substr(pos, end - pos));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = end + 1;
        return true;
    };

    std::string line;
    if (!next_line(line)) throw ParseError("empty manifest", 0);
    {
        const auto parts = split_ws(line);
        if (parts.size() != 2 || parts[0] != "modvid-manifest")
            throw ParseError("manifest: bad magic line", 0);
        m.version = static_cast<int>(parse_index(parts[1], "version"));
        if (m.version != 1)
            throw ValidationError("manifest: unsupported version " + parts[1]);
    }

    std::set<std::string> seen;
    bool in_frames = false;
    while (true) {
        const std::size_t line_start = pos;
        if (!next_line(line)) break;
        if (in_frames) {
            const std::string t = trim(line);
            if (!t.empty()) m.frames.push_back(t);
            continue;
        }
        if (trim(line).empty()) continue;
        if (trim(line) == "frames:") {
            in_frames = true;
            continue;
        }
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError("manifest: expected 'key: value'", line_start);
        const std::string key = trim(std::string_view(line).substr(0, colon));
        const std::string value = trim(std::string_view(line).substr(colon + 1));
        if (key.empty()) throw ParseError("manifest: empty key", line_start);
        if (!seen.insert(key).second)
            throw ValidationError("manifest: duplicate key '" + key + "'");
        if (key == "kind") m.kind = value;
        else if (key == "width") m.width = parse_index(value, key);
        else if (key == "height") m.height = parse_index(value, key);
        else if (key == "channels") m.channels = parse_index(value, key);
        else if (key == "frame_count") m.frame_count = parse_index(value, key);
        else if (key == "bits_a") m.bits_a = static_cast<int>(parse_index(value, key));
        else if (key == "bits_b") m.bits_b = static_cast<int>(parse_index(value, key));
        else if (key == "bit_depth") m.bit_depth = static_cast<int>(parse_index(value, key));
        else if (key == "seed") m.seed = static_cast<std::uint64_t>(parse_index(value, key));
        else m.extra.emplace_back(key, value);
    }

    for (const char* key : {"kind", "width", "height", "channels", "frame_count", "bits_a", "bits_b"})
        if (!seen.count(key)) throw ValidationError(std::string("manifest: missing key '") + key + "'");
    if (!in_frames) throw ValidationError("manifest: missing 'frames:' section");
    if (m.width <= 0 || m.height <= 0 || m.channels <= 0)
        throw ValidationError("manifest: dimensions must be positive");
    if (m.bits_a <= 0 || m.bits_a >= m.bits_b)
        throw ValidationError("manifest: bits_a (" + std::to_string(m.bits_a) +
                              ") must be positive and below bits_b (" + std::to_string(m.bits_b) +
                              ")");
    if (m.frame_count != static_cast<Index>(m.frames.size()))
        throw ValidationError("manifest: frame_count " + std::to_string(m.frame_count) +
                              " but " + std::to_string(m.frames.size()) + " frame entries");
    return m;
}

void validate_manifest_files(const ClipManifest& m, const fs::path& dir) {
    for (const auto& line : m.frames)
        for (const auto& f : split_ws(line))
            if (!fs::exists(dir / f))
                throw ValidationError("manifest references missing file '" + f + "'");
}

ClipManifest load_manifest(const fs::path& manifest_path) {
    ClipManifest m = read_manifest(read_file(manifest_path));
    validate_manifest_files(m, manifest_path.parent_path());
    return m;
}

ClipManifest save_clip(const fs::path& dir, const std::string& stem, const IntClip& clip,
                       const ClipMeta& meta) {
    const auto& s = clip.samples;
    ClipManifest m = base_manifest(meta, s.frames(), s.height(), s.width(), s.channels());
    m.bit_depth = clip.bit_depth;
    fs::create_directories(dir);
    for (Index t = 0; t < s.frames(); ++t) {
        std::string line;
        for (Index c = 0; c < s.channels(); ++c) {
            SampleClip plane(1, s.height(), s.width(), 1);
            for (Index y = 0; y < s.height(); ++y)
                for (Index x = 0; x < s.width(); ++x) plane(0, y, x, 0) = s(t, y, x, c);
            const std::string name = frame_name(stem, t, c, s.channels(), ".pgm");
            write_file(dir / name, write_pgm16(plane));
            line += (c ? " " : "") + name;
        }
        m.frames.push_back(line);
    }
    write_file(dir / (stem + ".manifest"), write_manifest(m));
    return m;
}

ClipManifest save_clip(const fs::path& dir, const std::string& stem, const RealClip& clip,
                       const ClipMeta& meta) {
    ClipManifest m = base_manifest(meta, clip.frames(), clip.height(), clip.width(), clip.channels());
    fs::create_directories(dir);
    for (Index t = 0; t < clip.frames(); ++t) {
        const std::string name = frame_name(stem, t, 0, 1, ".pfm");
        write_file(dir / name, write_pfm(clip.frame(t)));
        m.frames.push_back(name);
    }
    write_file(dir / (stem + ".manifest"), write_manifest(m));
    return m;
}

IntClip load_int_clip(const fs::path& manifest_path) {
    const ClipManifest m = load_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    SampleClip s(m.frame_count, m.height, m.width, m.channels);
    for (Index t = 0; t < m.frame_count; ++t) {
        const auto files = split_ws(m.frames[static_cast<std::size_t>(t)]);
        if (static_cast<Index>(files.size()) != m.channels)
            throw ValidationError("manifest frame " + std::to_string(t) + " lists " +
                                  std::to_string(files.size()) + " files for " +
                                  std::to_string(m.channels) + " channels");
        for (Index c = 0; c < m.channels; ++c) {
            const std::string& f = files[static_cast<std::size_t>(c)];
            const SampleClip plane = read_pgm16(read_file(dir / f));
            if (plane.height() != m.height || plane.width() != m.width)
                throw ValidationError("frame file '" + f + "' is " + std::to_string(plane.width()) +
                                      "x" + std::to_string(plane.height()) + ", manifest says " +
                                      std::to_string(m.width) + "x" + std::to_string(m.height));
            for (Index y = 0; y < m.height; ++y)
                for (Index x = 0; x < m.width; ++x) s(t, y, x, c) = plane(0, y, x, 0);
        }
    }
    int bits = m.bit_depth.value_or(m.kind == "modulo" ? m.bits_a : m.bits_b);
    IntClip clip(std::move(s), bits);
    clip.validate();
    return clip;
}

RealClip load_real_clip(const fs::path& manifest_path) {
    const ClipManifest m = load_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    RealClip out(m.frame_count, m.height, m.width, m.channels);
    for (Index t = 0; t < m.frame_count; ++t) {
        const std::string& f = m.frames[static_cast<std::size_t>(t)];
        const RealClip frame = read_pfm(read_file(dir / f), static_cast<int>(m.channels));
        if (frame.height() != m.height || frame.width() != m.width)
            throw ValidationError("frame file '" + f + "' does not match manifest dimensions");
        out.set_frames(t, frame);
    }
    return out;
}

} // namespace modvid
