#pragma once

// On-disk formats shared by the command-line tools: raw frame files,
// interval lists and shot pool manifests.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "transnet/intervals.hpp"

namespace transnet {

/// Decoded frames, 8-bit RGB, row-major, frame-major.
struct Video {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::size_t frame_bytes() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3; }
    std::size_t frame_count() const { return frame_bytes() ? pixels.size() / frame_bytes() : 0; }
    std::span<const std::uint8_t> frame(std::size_t i) const {
        return std::span<const std::uint8_t>(pixels).subspan(i * frame_bytes(), frame_bytes());
    }
    std::span<std::uint8_t> frame(std::size_t i) {
        return std::span<std::uint8_t>(pixels).subspan(i * frame_bytes(), frame_bytes());
    }
    friend bool operator==(const Video&, const Video&) = default;
};

/// Raw frame file: "TNSF", u32 version = 1, u32 frame count, u16 width,
/// u16 height, then the pixel bytes.
inline constexpr std::uint32_t kRawFrameVersion = 1;
inline constexpr std::size_t kRawFrameHeaderBytes = 16;

std::vector<std::uint8_t> encode_raw_frames(const Video& video);
Video decode_raw_frames(std::span<const std::uint8_t> bytes);
void save_raw_frames(const Video& video, const std::filesystem::path& path);
Video load_raw_frames(const std::filesystem::path& path);

/// One "start<TAB>end" line per interval.
std::string format_intervals(const IntervalList& list);
IntervalList parse_intervals(const std::string& text);
void save_intervals(const IntervalList& list, const std::filesystem::path& path);
IntervalList load_intervals(const std::filesystem::path& path);

/// Shot pool manifest entry: `length` frames starting at `offset` in `frames_file`.
struct ManifestEntry {
    std::string video_id;
    std::string frames_file;
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// JSON array of {video_id, frames_file, offset, length}. Relative
/// frames_file paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

}  // namespace transnet
