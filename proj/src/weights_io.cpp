#include "transnet/weights_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "transnet/bytes.hpp"

namespace transnet {
namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'W'};

using Kind = WeightFileError::Kind;

}  // namespace

namespace bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace bytes

std::uint32_t crc32(std::span<const std::uint8_t> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes a uInt length; feed large buffers in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t pos = 0; pos < data.size(); pos += kChunk) {
        const std::size_t n = std::min(kChunk, data.size() - pos);
        crc = ::crc32(crc, data.data() + pos, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_weights(const WeightStore& weights, const ModelConfig& config) {
    std::vector<std::uint8_t> out;
    out.reserve(64 + param_count(weights) * sizeof(float));
    bytes::put_bytes(out, kMagic, sizeof(kMagic));
    bytes::put<std::uint32_t>(out, kWeightFileVersion);
    for (int field : {config.cells_per_block, config.blocks, config.filters, config.dense_units, config.window,
                      config.width, config.height}) {
        bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(field));
    }
    bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.size()));
    for (const auto& [name, tensor] : weights) {
        bytes::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        bytes::put_bytes(out, name.data(), name.size());
        bytes::put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t extent : tensor.shape()) bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(extent));
        bytes::put_bytes(out, tensor.data().data(), tensor.size() * sizeof(float));
    }
    bytes::put<std::uint32_t>(out, crc32(out));
    return out;
}

LoadedWeights decode_weights(std::span<const std::uint8_t> data) {
    if (data.size() < sizeof(kMagic) + 2 * sizeof(std::uint32_t)) {
        throw WeightFileError(Kind::Truncated, "weight file truncated: only " + std::to_string(data.size()) + " bytes");
    }
    if (!std::equal(kMagic, kMagic + 4, data.begin())) {
        throw WeightFileError(Kind::BadMagic, "not a weight file: magic bytes are not 'TNSW'");
    }
    bytes::Reader reader(data.first(data.size() - sizeof(std::uint32_t)));
    auto truncated = [&]() {
        return WeightFileError(Kind::Truncated,
                               "weight file truncated at byte " + std::to_string(reader.position()));
    };
    char magic[4];
    reader.get_bytes(magic, 4);
    std::uint32_t version = 0;
    reader.get(version);
    if (version != kWeightFileVersion) {
        throw WeightFileError(Kind::BadVersion, "unsupported weight file version " + std::to_string(version) +
                                                    " (expected " + std::to_string(kWeightFileVersion) + ")");
    }

    std::uint32_t fields[7];
    for (auto& f : fields) {
        if (!reader.get(f)) throw truncated();
    }
    LoadedWeights loaded;
    loaded.config = ModelConfig{static_cast<int>(fields[0]), static_cast<int>(fields[1]), static_cast<int>(fields[2]),
                                static_cast<int>(fields[3]), static_cast<int>(fields[4]), static_cast<int>(fields[5]),
                                static_cast<int>(fields[6])};

    std::uint32_t count = 0;
    if (!reader.get(count)) throw truncated();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = 0;
        if (!reader.get(name_len)) throw truncated();
        std::string name(name_len, '\0');
        if (!reader.get_bytes(name.data(), name_len)) throw truncated();
        std::uint8_t rank = 0;
        if (!reader.get(rank)) throw truncated();
        Shape shape(rank);
        for (auto& extent : shape) {
            std::uint32_t e = 0;
            if (!reader.get(e)) throw truncated();
            if (e == 0) throw WeightFileError(Kind::ShapeMismatch, "parameter '" + name + "' has a zero extent");
            extent = e;
        }
        const std::size_t n = shape_size(shape);
        if (n > reader.remaining() / sizeof(float)) throw truncated();
        std::vector<float> values(n);
        reader.get_bytes(values.data(), n * sizeof(float));
        loaded.weights.insert_or_assign(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    if (reader.remaining() != 0) {
        throw WeightFileError(Kind::Truncated, "weight file has " + std::to_string(reader.remaining()) +
                                                   " unexpected bytes before the checksum");
    }

    std::uint32_t stored = 0;
    std::memcpy(&stored, data.data() + data.size() - sizeof(stored), sizeof(stored));
    if (stored != crc32(data.first(data.size() - sizeof(stored)))) {
        throw WeightFileError(Kind::Checksum, "weight file checksum mismatch");
    }

    try {
        loaded.config.validate();
    } catch (const DataError& e) {
        throw WeightFileError(Kind::ShapeMismatch, std::string("weight file config invalid: ") + e.what());
    }
    std::set<std::string> expected;
    for (const auto& spec : parameter_layout(loaded.config)) {
        expected.insert(spec.name);
        auto it = loaded.weights.find(spec.name);
        if (it == loaded.weights.end()) {
            throw WeightFileError(Kind::MissingParameter, "weight file is missing parameter '" + spec.name + "'");
        }
        if (it->second.shape() != spec.shape) {
            throw WeightFileError(Kind::ShapeMismatch, "parameter '" + spec.name + "' has shape " +
                                                           shape_string(it->second.shape()) + ", expected " +
                                                           shape_string(spec.shape));
        }
    }
    for (const auto& [name, tensor] : loaded.weights) {
        if (!expected.count(name)) {
            throw WeightFileError(Kind::UnknownParameter, "weight file has unknown parameter '" + name + "'");
        }
    }
    return loaded;
}

void save_weights(const WeightStore& weights, const ModelConfig& config, const std::filesystem::path& path) {
    validate_weights(config, weights);
    bytes::write_file(path.string(), encode_weights(weights, config));
}

LoadedWeights load_weights(const std::filesystem::path& path) { return decode_weights(bytes::read_file(path.string())); }

}  // namespace transnet
