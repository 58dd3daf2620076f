#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "transnet/bytes.hpp"
#include "transnet/errors.hpp"
#include "transnet/formats.hpp"
#include "transnet/weights_io.hpp"

using namespace transnet;
using Kind = WeightFileError::Kind;

namespace {

ModelConfig io_config() {
    ModelConfig c;
    c.filters = 2;
    c.blocks = 2;
    c.cells_per_block = 1;
    c.dense_units = 4;
    c.window = 20;
    c.width = 12;
    c.height = 8;
    return c;
}

Kind decode_failure(std::span<const std::uint8_t> bytes) {
    try {
        decode_weights(bytes);
    } catch (const WeightFileError& e) {
        return e.kind();
    }
    FAIL("decode unexpectedly succeeded");
    return Kind::BadMagic;
}

void refresh_crc(std::vector<std::uint8_t>& bytes) {
    bytes.resize(bytes.size() - 4);
    const std::uint32_t crc = crc32(bytes);
    bytes::put<std::uint32_t>(bytes, crc);
}

}  // namespace

TEST_CASE("crc32 matches the standard check value") {
    const std::string s = "123456789";
    CHECK(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("weight file round-trips bit-exactly") {
    const ModelConfig c = io_config();
    const WeightStore w = init_weights(c, 3);
    testing::TempDir dir("weights");
    save_weights(w, c, dir / "a.tnsw");
    const LoadedWeights loaded = load_weights(dir / "a.tnsw");
    CHECK(loaded.config == c);
    CHECK(loaded.weights == w);
    save_weights(loaded.weights, loaded.config, dir / "b.tnsw");
    CHECK(bytes::read_file((dir / "a.tnsw").string()) == bytes::read_file((dir / "b.tnsw").string()));

    const auto enc = encode_weights(w, c);
    CHECK(std::string(enc.begin(), enc.begin() + 4) == "TNSW");
}

TEST_CASE("weight file errors are distinct") {
    const ModelConfig c = io_config();
    const WeightStore w = init_weights(c, 4);
    const auto good = encode_weights(w, c);

    auto bad = good;
    bad[0] = 'X';
    CHECK(decode_failure(bad) == Kind::BadMagic);

    bad = good;
    bad[4] = 2;
    refresh_crc(bad);
    CHECK(decode_failure(bad) == Kind::BadVersion);

    CHECK(decode_failure(std::span(good).first(good.size() / 2)) == Kind::Truncated);
    CHECK(decode_failure(std::span(good).first(10)) == Kind::Truncated);

    bad = good;
    bad[good.size() - 100] ^= 0x01;  // inside the last tensor's payload
    CHECK(decode_failure(bad) == Kind::Checksum);

    WeightStore missing = w;
    missing.erase(kDense1Bias);
    try {
        decode_weights(encode_weights(missing, c));
        FAIL("expected missing parameter");
    } catch (const WeightFileError& e) {
        CHECK(e.kind() == Kind::MissingParameter);
        CHECK(std::string(e.what()).find(kDense1Bias) != std::string::npos);
    }

    WeightStore extra = w;
    extra.emplace("head/dense3/weights", Tensor({2}));
    CHECK(decode_failure(encode_weights(extra, c)) == Kind::UnknownParameter);

    WeightStore misshapen = w;
    misshapen.at(kDense2Bias) = Tensor({3});
    CHECK(decode_failure(encode_weights(misshapen, c)) == Kind::ShapeMismatch);

    CHECK_THROWS_AS(save_weights(missing, c, "/nonexistent/never.tnsw"), DataError);
    CHECK_THROWS_AS(load_weights("/nonexistent/never.tnsw"), DataError);
}

TEST_CASE("raw frame files") {
    std::mt19937_64 rng(1);
    const Video v = testing::random_video(5, 3, 4, rng);
    const auto enc = encode_raw_frames(v);
    CHECK(enc.size() == kRawFrameHeaderBytes + 4 * 5 * 3 * 3);
    CHECK(decode_raw_frames(enc) == v);
    CHECK(encode_raw_frames(decode_raw_frames(enc)) == enc);

    auto bad = enc;
    bad[0] = 'Z';
    CHECK_THROWS_AS(decode_raw_frames(bad), DataError);
    bad = enc;
    bad.pop_back();
    CHECK_THROWS_AS(decode_raw_frames(bad), DataError);
    bad = enc;
    bad[4] = 9;
    CHECK_THROWS_AS(decode_raw_frames(bad), DataError);
    CHECK_THROWS_AS(decode_raw_frames(std::span(enc).first(7)), DataError);

    testing::TempDir dir("frames");
    save_raw_frames(v, dir / "v.tnsf");
    CHECK(load_raw_frames(dir / "v.tnsf") == v);
    CHECK_THROWS_WITH_AS(load_raw_frames(dir / "missing.tnsf"), doctest::Contains("missing.tnsf"), DataError);
}

TEST_CASE("interval files") {
    const IntervalList list{{0, 1}, {3, 4}, {10, 10}};
    const std::string text = format_intervals(list);
    CHECK(text == "0\t1\n3\t4\n10\t10\n");
    CHECK(parse_intervals(text) == list);
    CHECK(parse_intervals("") == IntervalList{});
    CHECK(parse_intervals("2\t5") == IntervalList{{2, 5}});
    CHECK_THROWS_AS(parse_intervals("1 2\n"), DataError);
    CHECK_THROWS_AS(parse_intervals("1\tx\n"), DataError);
    CHECK_THROWS_AS(parse_intervals("4\t2\n"), DataError);
    CHECK_THROWS_AS(parse_intervals("0\t3\n2\t5\n"), DataError);
    CHECK_THROWS_AS(parse_intervals("-1\t3\n"), DataError);

    testing::TempDir dir("intervals");
    save_intervals(list, dir / "l.txt");
    CHECK(load_intervals(dir / "l.txt") == list);
    save_intervals(load_intervals(dir / "l.txt"), dir / "m.txt");
    CHECK(bytes::read_file((dir / "l.txt").string()) == bytes::read_file((dir / "m.txt").string()));
}

TEST_CASE("manifest files resolve relative paths") {
    testing::TempDir dir("manifest");
    const std::vector<ManifestEntry> entries{{"a", "a.tnsf", 0, 10}, {"a", "a.tnsf", 10, 6}, {"b", "/abs/b.tnsf", 3, 7}};
    save_manifest(entries, dir / "m.json");
    const auto loaded = load_manifest(dir / "m.json");
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].frames_file == (dir / "a.tnsf").string());
    CHECK(loaded[1].offset == 10);
    CHECK(loaded[2].frames_file == "/abs/b.tnsf");
    CHECK(loaded[2].length == 7);

    std::ofstream(dir / "bad.json") << "{\"video_id\": 1}";
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), DataError);
    std::ofstream(dir / "broken.json") << "[{";
    CHECK_THROWS_AS(load_manifest(dir / "broken.json"), DataError);
    std::ofstream(dir / "missing_key.json") << "[{\"video_id\": \"a\", \"offset\": 0, \"length\": 1}]";
    CHECK_THROWS_AS(load_manifest(dir / "missing_key.json"), DataError);
}
