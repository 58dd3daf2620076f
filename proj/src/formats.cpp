#include "transnet/formats.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "transnet/bytes.hpp"
#include "transnet/errors.hpp"

namespace transnet {

void validate_interval_list(const IntervalList& list, const char* what) {
    for (std::size_t i = 0; i < list.size(); ++i) {
        const Interval& iv = list[i];
        if (iv.start < 0 || iv.end < iv.start) {
            throw DataError(std::string(what) + ": invalid interval [" + std::to_string(iv.start) + "," +
                            std::to_string(iv.end) + "] at position " + std::to_string(i));
        }
        if (i > 0 && iv.start <= list[i - 1].end) {
            throw DataError(std::string(what) + ": intervals must be sorted and disjoint, [" +
                            std::to_string(list[i - 1].start) + "," + std::to_string(list[i - 1].end) +
                            "] is followed by [" + std::to_string(iv.start) + "," + std::to_string(iv.end) + "]");
        }
    }
}

std::vector<std::uint8_t> encode_raw_frames(const Video& video) {
    if (video.width <= 0 || video.height <= 0 || video.width > 0xFFFF || video.height > 0xFFFF) {
        throw DataError("raw frames: invalid frame size " + std::to_string(video.width) + "x" +
                        std::to_string(video.height));
    }
    if (video.pixels.size() % video.frame_bytes() != 0) {
        throw DataError("raw frames: pixel buffer is not a whole number of frames");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kRawFrameHeaderBytes + video.pixels.size());
    bytes::put_bytes(out, "TNSF", 4);
    bytes::put<std::uint32_t>(out, kRawFrameVersion);
    bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(video.frame_count()));
    bytes::put<std::uint16_t>(out, static_cast<std::uint16_t>(video.width));
    bytes::put<std::uint16_t>(out, static_cast<std::uint16_t>(video.height));
    out.insert(out.end(), video.pixels.begin(), video.pixels.end());
    return out;
}

Video decode_raw_frames(std::span<const std::uint8_t> data) {
    bytes::Reader reader(data);
    char magic[4];
    std::uint32_t version = 0, count = 0;
    std::uint16_t width = 0, height = 0;
    if (!reader.get_bytes(magic, 4) || !reader.get(version) || !reader.get(count) || !reader.get(width) ||
        !reader.get(height)) {
        throw DataError("raw frames: header truncated (" + std::to_string(data.size()) + " bytes)");
    }
    if (std::string(magic, 4) != "TNSF") throw DataError("raw frames: bad magic, expected 'TNSF'");
    if (version != kRawFrameVersion) {
        throw DataError("raw frames: unsupported version " + std::to_string(version));
    }
    if (width == 0 || height == 0) throw DataError("raw frames: zero frame size");
    Video video;
    video.width = width;
    video.height = height;
    const std::size_t expected = static_cast<std::size_t>(count) * video.frame_bytes();
    if (reader.remaining() != expected) {
        throw DataError("raw frames: expected " + std::to_string(expected) + " pixel bytes for " +
                        std::to_string(count) + " frames, found " + std::to_string(reader.remaining()));
    }
    video.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(kRawFrameHeaderBytes), data.end());
    return video;
}

void save_raw_frames(const Video& video, const std::filesystem::path& path) {
    bytes::write_file(path.string(), encode_raw_frames(video));
}

Video load_raw_frames(const std::filesystem::path& path) {
    try {
        return decode_raw_frames(bytes::read_file(path.string()));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_intervals(const IntervalList& list) {
    std::string out;
    for (const auto& iv : list) {
        out += std::to_string(iv.start);
        out += '\t';
        out += std::to_string(iv.end);
        out += '\n';
    }
    return out;
}

IntervalList parse_intervals(const std::string& text) {
    IntervalList list;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("interval file line " + std::to_string(line_no) + ": expected 'start<TAB>end'");
        }
        try {
            std::size_t used_a = 0, used_b = 0;
            const std::string a = line.substr(0, tab), b = line.substr(tab + 1);
            Interval iv{std::stoll(a, &used_a), std::stoll(b, &used_b)};
            if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing");
            list.push_back(iv);
        } catch (const std::logic_error&) {
            throw DataError("interval file line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
        }
    }
    validate_interval_list(list, "interval file");
    return list;
}

void save_intervals(const IntervalList& list, const std::filesystem::path& path) {
    const std::string text = format_intervals(list);
    bytes::write_file(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

IntervalList load_intervals(const std::filesystem::path& path) {
    const auto raw = bytes::read_file(path.string());
    try {
        return parse_intervals(std::string(raw.begin(), raw.end()));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest '" + path.string() + "': " + e.what());
    }
    if (!doc.is_array()) throw DataError("manifest '" + path.string() + "' must be a JSON array");
    std::vector<ManifestEntry> entries;
    const auto base = path.parent_path();
    for (const auto& item : doc) {
        try {
            ManifestEntry e;
            e.video_id = item.at("video_id").get<std::string>();
            std::filesystem::path file = item.at("frames_file").get<std::string>();
            e.frames_file = (file.is_relative() ? base / file : file).string();
            e.offset = item.at("offset").get<std::size_t>();
            e.length = item.at("length").get<std::size_t>();
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("manifest '" + path.string() + "': " + ex.what());
        }
    }
    return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& e : entries) {
        doc.push_back({{"video_id", e.video_id}, {"frames_file", e.frames_file}, {"offset", e.offset},
                       {"length", e.length}});
    }
    const std::string text = doc.dump(2) + "\n";
    bytes::write_file(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace transnet
