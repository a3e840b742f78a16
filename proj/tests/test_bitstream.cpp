#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mrdac/bitstream.hpp"
#include "test_util.hpp"

using namespace mrdac;

namespace {

KeypointSet sine_keypoints(double phase, std::size_t k) {
    KeypointSet s;
    for (std::size_t i = 0; i < k; ++i) {
        const double base = -0.5 + static_cast<double>(i) / std::max<std::size_t>(k - 1, 1);
        s.points.emplace_back(Vec2{base + 0.2 * std::sin(phase + i),
                                   0.3 * std::cos(phase * 0.7 + i)});
    }
    return s;
}

Bitstream tiny_stream() {
    Bitstream s;
    s.header.width = 64;
    s.header.height = 64;
    s.header.num_keypoints = 2;
    s.header.quant_log2 = 6;
    s.records.push_back({0, FrameKind::REFERENCE, {}, encode_payload({3, -1, 0, 7})});
    std::vector<std::int32_t> prev{3, -1, 0, 7};
    for (std::uint32_t t = 1; t <= 3; ++t) {
        std::vector<std::int32_t> cur{static_cast<std::int32_t>(3 + t), -1,
                                      static_cast<std::int32_t>(t), 7};
        s.records.push_back({t, FrameKind::ANIMATED, {0}, encode_payload(cur, &prev)});
        prev = cur;
    }
    return s;
}

}  // namespace

TEST_CASE("quantize_keypoints rounds half away from zero") {
    KeypointSet s;
    s.points.emplace_back(Vec2{0.5, 0.0});
    s.points.emplace_back(Vec2{-0.2578125, 0.0});
    const auto idx = quantize_keypoints(s, 1.0 / 64.0);
    REQUIRE(idx.size() == 4);
    CHECK(idx[0] == 32);
    CHECK(idx[1] == 0);
    CHECK(idx[2] == -17);  // -16.5 rounds away from zero

    const KeypointSet back = dequantize_keypoints(idx, 1.0 / 64.0, 2, false);
    CHECK(back.points[0].position.x == Catch::Approx(0.5));
    CHECK(back.points[1].position.x == Catch::Approx(-17.0 / 64.0));

    CHECK_THROWS_AS(quantize_keypoints(s, 0.0), InvalidInputError);
}

TEST_CASE("quantization covers jacobians when present") {
    KeypointSet s;
    s.points.emplace_back(Vec2{0.25, -0.125}, Mat2{1.0, 0.5, -0.5, 1.0});
    const auto idx = quantize_keypoints(s, 1.0 / 16.0);
    REQUIRE(idx.size() == 6);
    CHECK(idx[2] == 16);
    CHECK(idx[3] == 8);
    const KeypointSet back = dequantize_keypoints(idx, 1.0 / 16.0, 1, true);
    CHECK(back.points[0].jacobian->b == Catch::Approx(0.5));
}

TEST_CASE("exp-Golomb bit patterns match hand derivations") {
    SECTION("residual 0 codes to a single 1 bit") {
        const auto bytes = encode_payload({0});
        REQUIRE(bytes.size() == 1);
        CHECK(bytes[0] == 0x80);
    }
    SECTION("residual 1 -> zigzag 2 -> bits 011") {
        const auto bytes = encode_payload({1});
        REQUIRE(bytes.size() == 1);
        CHECK(bytes[0] == 0x60);
    }
    SECTION("residual -1 -> zigzag 1 -> bits 010") {
        const auto bytes = encode_payload({-1});
        REQUIRE(bytes.size() == 1);
        CHECK(bytes[0] == 0x40);
    }
    SECTION("zigzag round trip") {
        for (std::int64_t v : {-100000, -3, -1, 0, 1, 2, 65535, 100000})
            CHECK(unzigzag(zigzag(v)) == v);
    }
}

TEST_CASE("payload decoding inverts encoding") {
    SECTION("single zero residual with a predictor") {
        const std::vector<std::int32_t> pred{5};
        const auto decoded = decode_payload({0x80}, &pred, 1);
        REQUIRE(decoded.size() == 1);
        CHECK(decoded[0] == 5);
    }
    SECTION("random round trips with and without predictors") {
        testutil::Rng rng(101);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 24));
            std::vector<std::int32_t> cur(n), pred(n);
            for (std::size_t i = 0; i < n; ++i) {
                cur[i] = rng.uniform_int(-70000, 70000);
                pred[i] = rng.uniform_int(-70000, 70000);
            }
            const bool use_pred = trial % 2 == 0;
            const auto bytes = encode_payload(cur, use_pred ? &pred : nullptr);
            const auto back = decode_payload(bytes, use_pred ? &pred : nullptr, n);
            REQUIRE(back == cur);
        }
    }
    SECTION("malformed payloads are rejected with bit offsets") {
        CHECK_THROWS_AS(decode_payload({}, nullptr, 1), ParseError);
        // value bits then a non-zero padding bit
        CHECK_THROWS_AS(decode_payload({0x81}, nullptr, 1), ParseError);
        // a full spare byte after the last value
        CHECK_THROWS_AS(decode_payload({0x80, 0x00}, nullptr, 1), ParseError);
        // run of zeros with no terminating 1
        CHECK_THROWS_AS(decode_payload({0x00}, nullptr, 1), ParseError);
    }
}

TEST_CASE("closed-loop keypoint coding has exactly zero drift over 1000 frames") {
    const double step = 1.0 / 64.0;
    std::vector<std::int32_t> enc_prev, dec_prev;
    for (int t = 0; t < 1000; ++t) {
        const bool reference = t % 100 == 0;
        const auto idx = quantize_keypoints(sine_keypoints(t * 0.05, 5), step);
        const auto payload = encode_payload(idx, reference ? nullptr : &enc_prev);
        const auto decoded =
            decode_payload(payload, reference ? nullptr : &dec_prev, idx.size());
        REQUIRE(decoded == idx);  // decoder indices equal encoder indices, bit exact
        enc_prev = idx;
        dec_prev = decoded;
    }
}

TEST_CASE("container serialize/parse round trip") {
    SECTION("header-only stream") {
        Bitstream s;
        s.header.width = 128;
        s.header.height = 96;
        s.header.num_keypoints = 9;
        const auto bytes = serialize(s);
        const Bitstream back = parse(bytes);
        CHECK(serialize(back) == bytes);
        CHECK(back.records.empty());
        CHECK(back.header.width == 128);
    }
    SECTION("reference plus animated records round trip bitwise") {
        const Bitstream s = tiny_stream();
        const auto bytes = serialize(s);
        const Bitstream back = parse(bytes);
        REQUIRE(serialize(back) == bytes);
        REQUIRE(back.records.size() == 4);
        CHECK(back.records[1].ref_list == std::vector<std::uint32_t>{0});
        CHECK(back.records[1].payload == s.records[1].payload);
    }
    SECTION("gop echo survives the round trip") {
        Bitstream s = tiny_stream();
        s.header.gop.strategy = Strategy::BIDIR;
        s.header.gop.rp_interval = 12;
        s.header.gop.max_refs = 4;
        s.header.gop.max_future_delay_s = 1.5;
        const Bitstream back = parse(serialize(s));
        CHECK(back.header.gop.strategy == Strategy::BIDIR);
        CHECK(back.header.gop.rp_interval == 12);
        CHECK(back.header.gop.max_refs == 4);
        CHECK(back.header.gop.max_future_delay_s == Catch::Approx(1.5));
    }
}

TEST_CASE("container parse rejects malformed streams with named errors") {
    const auto good = serialize(tiny_stream());

    SECTION("bad magic") {
        auto bytes = good;
        bytes[0] = 'X';
        CHECK_THROWS_AS(parse(bytes), ParseError);
    }
    SECTION("unsupported version") {
        auto bytes = good;
        bytes[4] = 9;
        CHECK_THROWS_AS(parse(bytes), UnsupportedVersionError);
    }
    SECTION("every truncation point fails cleanly") {
        for (std::size_t cut = 0; cut < good.size(); ++cut) {
            std::vector<std::uint8_t> bytes(good.begin(), good.begin() + cut);
            CHECK_THROWS_AS(parse(bytes), ParseError);
        }
    }
    SECTION("trailing garbage") {
        auto bytes = good;
        bytes.push_back(0);
        CHECK_THROWS_AS(parse(bytes), ParseError);
    }
    SECTION("dangling ref_list") {
        Bitstream s = tiny_stream();
        s.records[2].ref_list = {17};  // frame 17 never declared
        CHECK_THROWS_WITH(parse(serialize(s)),
                          Catch::Matchers::ContainsSubstring("references frame 17"));
    }
    SECTION("animated record referencing another animated frame") {
        Bitstream s = tiny_stream();
        s.records[2].ref_list = {1};  // frame 1 is ANIMATED
        CHECK_THROWS_AS(parse(serialize(s)), ParseError);
    }
    SECTION("serialize rejects out-of-order records and empty ref lists") {
        Bitstream s = tiny_stream();
        std::swap(s.records[1], s.records[2]);
        CHECK_THROWS_AS(serialize(s), InvalidInputError);

        Bitstream s2 = tiny_stream();
        s2.records[1].ref_list.clear();
        CHECK_THROWS_AS(serialize(s2), InvalidInputError);
    }
    SECTION("header invariants") {
        Bitstream s = tiny_stream();
        s.header.num_keypoints = 0;
        CHECK_THROWS_AS(serialize(s), InvalidInputError);
        auto bytes = good;
        bytes[13] = 0;  // K byte
        CHECK_THROWS_AS(parse(bytes), ParseError);
        bytes = good;
        bytes[14] = 20;  // quant_log2 byte
        CHECK_THROWS_AS(parse(bytes), ParseError);
    }
}

TEST_CASE("container round trip fuzz over random well-formed streams") {
    testutil::Rng rng(211);
    for (int trial = 0; trial < 300; ++trial) {
        Bitstream s;
        s.header.width = static_cast<std::uint16_t>(rng.uniform_int(8, 512));
        s.header.height = static_cast<std::uint16_t>(rng.uniform_int(8, 512));
        s.header.num_keypoints = static_cast<std::uint8_t>(rng.uniform_int(1, 16));
        s.header.quant_log2 = static_cast<std::uint8_t>(rng.uniform_int(1, 16));
        s.header.has_jacobians = rng.uniform_int(0, 1) != 0;
        const int t_frames = rng.uniform_int(1, 12);
        std::vector<std::uint32_t> refs;
        for (int t = 0; t < t_frames; ++t) {
            FrameRecord rec;
            rec.frame_index = static_cast<std::uint32_t>(t);
            const bool is_ref = t == 0 || rng.uniform_int(0, 3) == 0;
            rec.kind = is_ref ? FrameKind::REFERENCE : FrameKind::ANIMATED;
            if (is_ref) {
                refs.push_back(rec.frame_index);
            } else {
                const int nrefs = rng.uniform_int(1, static_cast<int>(refs.size()));
                for (int k = 0; k < nrefs; ++k)
                    rec.ref_list.push_back(refs[static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<int>(refs.size()) - 1))]);
            }
            std::vector<std::int32_t> vals(static_cast<std::size_t>(rng.uniform_int(1, 12)));
            for (auto& v : vals) v = rng.uniform_int(-1000, 1000);
            rec.payload = encode_payload(vals);
            s.records.push_back(std::move(rec));
        }
        const auto bytes = serialize(s);
        REQUIRE(serialize(parse(bytes)) == bytes);
    }
}

TEST_CASE("bitrate_report accounting") {
    SECTION("one second at 25 fps with 10000 total bits is 10 kbps") {
        Bitstream s;
        s.header.fps_num = 25;
        s.header.fps_den = 1;
        s.header.num_keypoints = 1;
        FrameRecord ref;
        ref.frame_index = 0;
        ref.kind = FrameKind::REFERENCE;  // empty payload; cost model carries it
        s.records.push_back(ref);
        for (std::uint32_t t = 1; t < 25; ++t) {
            FrameRecord rec;
            rec.frame_index = t;
            rec.kind = FrameKind::ANIMATED;
            rec.ref_list = {0};
            rec.payload.assign(50, 0xAA);  // 400 bits
            s.records.push_back(rec);
        }
        CostModel cost;
        cost.reference_frame_bits = 400;
        const BitrateReport rep = bitrate_report(s, cost);
        CHECK(rep.total_bits == 10000);
        CHECK(rep.kbps == Catch::Approx(10.0));
        CHECK(rep.breakdown.animated_payload_bits == 9600);
        CHECK(rep.breakdown.reference_intra_bits == 400);
    }
    SECTION("doubling the reference cost strictly increases kbps") {
        const Bitstream s = tiny_stream();
        CostModel a, b;
        a.reference_frame_bits = 10000;
        b.reference_frame_bits = 20000;
        CHECK(bitrate_report(s, b).kbps > bitrate_report(s, a).kbps);
    }
    SECTION("all-animated record list has zero reference contribution") {
        Bitstream s;
        s.header.fps_num = 25;
        for (std::uint32_t t = 0; t < 4; ++t) {
            FrameRecord rec;
            rec.frame_index = t;
            rec.kind = FrameKind::ANIMATED;
            rec.ref_list = {99};
            rec.payload.assign(10, 0x55);
            s.records.push_back(rec);
        }
        const BitrateReport rep = bitrate_report(s);
        CHECK(rep.breakdown.reference_payload_bits == 0);
        CHECK(rep.breakdown.reference_intra_bits == 0);
        CHECK(rep.breakdown.animated_payload_bits == 320);
    }
    SECTION("zero frames rejected") {
        Bitstream s;
        CHECK_THROWS_AS(bitrate_report(s), InvalidInputError);
    }
}
