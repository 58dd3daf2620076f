#pragma once

// Little-endian byte writing and bounds-checked reading for the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace transnet::bytes {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

inline void put_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
}

/// Sequential reader; `ok()` turns false once a read runs past the end.
class Reader {
 public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    template <typename T>
    bool get(T& value) {
        if (!take(sizeof(T))) return false;
        std::memcpy(&value, data_.data() + pos_ - sizeof(T), sizeof(T));
        return true;
    }

    bool get_bytes(void* dst, std::size_t n) {
        if (!take(n)) return false;
        std::memcpy(dst, data_.data() + pos_ - n, n);
        return true;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

 private:
    bool take(std::size_t n) {
        if (n > remaining()) return false;
        pos_ += n;
        return true;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace transnet::bytes
