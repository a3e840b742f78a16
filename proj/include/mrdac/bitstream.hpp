#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrdac/error.hpp"
#include "mrdac/keypoint.hpp"
#include "mrdac/scheduler.hpp"

namespace mrdac {

// ---------------------------------------------------------------------------
// bit-level IO, MSB first
// ---------------------------------------------------------------------------

class BitWriter {
public:
    void put_bit(int b) {
        cur_ = static_cast<std::uint8_t>((cur_ << 1) | (b & 1));
        if (++nbits_ == 8) {
            bytes_.push_back(cur_);
            cur_ = 0;
            nbits_ = 0;
        }
    }

    void put_bits(std::uint64_t v, int n) {
        for (int i = n - 1; i >= 0; --i) put_bit(static_cast<int>((v >> i) & 1));
    }

    std::size_t bit_count() const { return bytes_.size() * 8 + nbits_; }

    // Zero-pads to a byte boundary.
    std::vector<std::uint8_t> finish() {
        while (nbits_ != 0) put_bit(0);
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t cur_ = 0;
    int nbits_ = 0;
};

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t size) : data_(data), size_bits_(size * 8) {}
    explicit BitReader(const std::vector<std::uint8_t>& bytes)
        : BitReader(bytes.data(), bytes.size()) {}

    int get_bit() {
        if (pos_ >= size_bits_)
            throw ParseError("payload truncated at bit " + std::to_string(pos_));
        const std::size_t byte = pos_ >> 3;
        const int shift = 7 - static_cast<int>(pos_ & 7);
        ++pos_;
        return (data_[byte] >> shift) & 1;
    }

    std::uint64_t get_bits(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
        return v;
    }

    std::size_t bit_position() const { return pos_; }
    std::size_t bits_remaining() const { return size_bits_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_bits_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// exp-Golomb with zigzag signed mapping
// ---------------------------------------------------------------------------

inline std::uint64_t zigzag(std::int64_t n) {
    return n >= 0 ? 2ULL * static_cast<std::uint64_t>(n)
                  : 2ULL * static_cast<std::uint64_t>(-(n + 1)) + 1ULL;
}

inline std::int64_t unzigzag(std::uint64_t u) {
    return (u & 1) ? -static_cast<std::int64_t>(u >> 1) - 1
                   : static_cast<std::int64_t>(u >> 1);
}

inline void put_exp_golomb(BitWriter& bw, std::uint64_t k) {
    const std::uint64_t v = k + 1;
    const int nbits = std::bit_width(v);
    for (int i = 0; i < nbits - 1; ++i) bw.put_bit(0);
    bw.put_bits(v, nbits);
}

inline std::uint64_t get_exp_golomb(BitReader& br) {
    int zeros = 0;
    while (br.get_bit() == 0)
        if (++zeros > 63)
            throw ParseError("exp-Golomb run past 63 zeros at bit " +
                             std::to_string(br.bit_position()));
    const std::uint64_t v = (1ULL << zeros) | br.get_bits(zeros);
    return v - 1;
}

// ---------------------------------------------------------------------------
// keypoint quantization
// ---------------------------------------------------------------------------

// Round-half-away-from-zero quantization of positions (and Jacobian entries
// when present) to integer indices; dequantize(i) = i * step.
inline std::vector<std::int32_t> quantize_keypoints(const KeypointSet& kps, double step) {
    if (!(step > 0.0)) throw InvalidInputError("quantization step must be > 0");
    std::vector<std::int32_t> idx;
    idx.reserve(kps.size() * (kps.has_jacobians() ? 6 : 2));
    auto q = [step](double v) { return static_cast<std::int32_t>(std::round(v / step)); };
    for (const Keypoint& p : kps.points) {
        idx.push_back(q(p.position.x));
        idx.push_back(q(p.position.y));
        if (kps.has_jacobians()) {
            idx.push_back(q(p.jacobian->a));
            idx.push_back(q(p.jacobian->b));
            idx.push_back(q(p.jacobian->c));
            idx.push_back(q(p.jacobian->d));
        }
    }
    return idx;
}

inline KeypointSet dequantize_keypoints(const std::vector<std::int32_t>& idx, double step,
                                        std::size_t k, bool has_jacobians,
                                        std::int64_t frame_index = 0) {
    const std::size_t per = has_jacobians ? 6 : 2;
    if (idx.size() != k * per)
        throw DimensionError("dequantize expected " + std::to_string(k * per) +
                             " indices, got " + std::to_string(idx.size()));
    KeypointSet set;
    set.frame_index = frame_index;
    for (std::size_t i = 0; i < k; ++i) {
        const std::int32_t* p = idx.data() + i * per;
        const Vec2 pos{p[0] * step, p[1] * step};
        if (has_jacobians) {
            const Mat2 jac{p[2] * step, p[3] * step, p[4] * step, p[5] * step};
            set.points.emplace_back(pos, jac);
        } else {
            set.points.emplace_back(pos);
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// per-frame payload: residuals against the previously decoded frame
// ---------------------------------------------------------------------------

// Residuals r = current - predictor (or current itself when the predictor is
// absent, i.e. at a REFERENCE frame) coded with signed exp-Golomb, zero-padded
// to a byte boundary.
inline std::vector<std::uint8_t> encode_payload(
    const std::vector<std::int32_t>& current_q,
    const std::vector<std::int32_t>* predictor_q = nullptr) {
    if (predictor_q && predictor_q->size() != current_q.size())
        throw DimensionError("payload predictor length differs from current");
    BitWriter bw;
    for (std::size_t i = 0; i < current_q.size(); ++i) {
        const std::int64_t r = static_cast<std::int64_t>(current_q[i]) -
                               (predictor_q ? (*predictor_q)[i] : 0);
        put_exp_golomb(bw, zigzag(r));
    }
    return bw.finish();
}

// Exact inverse of encode_payload for a known value count. Trailing padding
// bits must be zero.
inline std::vector<std::int32_t> decode_payload(const std::vector<std::uint8_t>& bytes,
                                                const std::vector<std::int32_t>* predictor_q,
                                                std::size_t count) {
    if (predictor_q && predictor_q->size() != count)
        throw DimensionError("payload predictor length differs from expected count");
    BitReader br(bytes);
    std::vector<std::int32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::int64_t r = unzigzag(get_exp_golomb(br));
        const std::int64_t v = r + (predictor_q ? (*predictor_q)[i] : 0);
        out[i] = static_cast<std::int32_t>(v);
    }
    if (br.bits_remaining() >= 8)
        throw ParseError("payload has " + std::to_string(br.bits_remaining()) +
                         " unread bits after the last value");
    while (br.bits_remaining() > 0)
        if (br.get_bit() != 0)
            throw ParseError("non-zero padding bit at bit " +
                             std::to_string(br.bit_position() - 1));
    return out;
}

// ---------------------------------------------------------------------------
// container
// ---------------------------------------------------------------------------

enum class FrameKind : std::uint8_t { REFERENCE = 0, ANIMATED = 1 };

struct FrameRecord {
    std::uint32_t frame_index = 0;
    FrameKind kind = FrameKind::REFERENCE;
    std::vector<std::uint32_t> ref_list;  // ANIMATED only, non-empty
    std::vector<std::uint8_t> payload;
};

struct BitstreamHeader {
    std::uint8_t version = 1;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint16_t fps_num = 25;
    std::uint16_t fps_den = 1;
    std::uint8_t num_keypoints = 1;   // K >= 1
    std::uint8_t quant_log2 = 6;      // step = 1 / 2^q, q in [1, 16]
    bool has_jacobians = false;
    GopConfig gop;                    // echoed so the decoder can rebuild the plan

    double quant_step() const { return 1.0 / static_cast<double>(1u << quant_log2); }
    double fps() const { return static_cast<double>(fps_num) / static_cast<double>(fps_den); }
};

struct Bitstream {
    BitstreamHeader header;
    std::vector<FrameRecord> records;
};

namespace detail {

inline constexpr char kMagic[4] = {'M', 'R', 'D', 'C'};

struct ByteWriter {
    std::vector<std::uint8_t> bytes;
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<std::uint8_t>(v >> s));
    }
};

struct ByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > size)
            throw ParseError(std::string("truncated while reading ") + what + " at byte " +
                             std::to_string(pos));
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data[pos++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>((data[pos] << 8) | data[pos + 1]);
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data[pos + i];
        pos += 4;
        return v;
    }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const Bitstream& stream) {
    const BitstreamHeader& h = stream.header;
    if (h.num_keypoints < 1) throw InvalidInputError("header needs K >= 1");
    if (h.quant_log2 < 1 || h.quant_log2 > 16)
        throw InvalidInputError("header quant_log2 must be in [1,16]");

    detail::ByteWriter w;
    for (char c : detail::kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(h.version);
    w.u16(h.width);
    w.u16(h.height);
    w.u16(h.fps_num);
    w.u16(h.fps_den);
    w.u8(h.num_keypoints);
    w.u8(h.quant_log2);
    w.u8(h.has_jacobians ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(h.gop.strategy));
    w.u16(static_cast<std::uint16_t>(h.gop.gop_size));
    w.u16(static_cast<std::uint16_t>(h.gop.rp_interval));
    w.u8(static_cast<std::uint8_t>(h.gop.max_refs));
    w.u32(static_cast<std::uint32_t>(std::lround(h.gop.max_future_delay_s * 1000.0)));

    std::int64_t prev_index = -1;
    for (const FrameRecord& r : stream.records) {
        if (static_cast<std::int64_t>(r.frame_index) <= prev_index)
            throw InvalidInputError("records must be ordered by frame_index; offender " +
                                    std::to_string(r.frame_index));
        prev_index = r.frame_index;
        if (r.kind == FrameKind::ANIMATED && r.ref_list.empty())
            throw InvalidInputError("animated record " + std::to_string(r.frame_index) +
                                    " has an empty ref_list");
    }

    w.u32(static_cast<std::uint32_t>(stream.records.size()));
    for (const FrameRecord& r : stream.records) {
        w.u32(r.frame_index);
        w.u8(static_cast<std::uint8_t>(r.kind));
        if (r.kind == FrameKind::ANIMATED) {
            w.u8(static_cast<std::uint8_t>(r.ref_list.size()));
            for (std::uint32_t ref : r.ref_list) w.u32(ref);
        }
        w.u32(static_cast<std::uint32_t>(r.payload.size()));
        w.bytes.insert(w.bytes.end(), r.payload.begin(), r.payload.end());
    }
    return std::move(w.bytes);
}

inline Bitstream parse(const std::uint8_t* data, std::size_t size) {
    detail::ByteReader r{data, size};
    for (char c : detail::kMagic)
        if (r.u8("magic") != static_cast<std::uint8_t>(c))
            throw ParseError("bad magic, expected \"MRDC\"");

    Bitstream s;
    BitstreamHeader& h = s.header;
    h.version = r.u8("version");
    if (h.version != 1)
        throw UnsupportedVersionError("version " + std::to_string(h.version));
    h.width = r.u16("width");
    h.height = r.u16("height");
    h.fps_num = r.u16("fps_num");
    h.fps_den = r.u16("fps_den");
    h.num_keypoints = r.u8("num_keypoints");
    if (h.num_keypoints < 1) throw ParseError("header K must be >= 1");
    h.quant_log2 = r.u8("quant_log2");
    if (h.quant_log2 < 1 || h.quant_log2 > 16)
        throw ParseError("header quant_log2 " + std::to_string(h.quant_log2) +
                         " outside [1,16]");
    h.has_jacobians = r.u8("has_jacobians") != 0;
    const std::uint8_t strat = r.u8("gop.strategy");
    if (strat > 3) throw ParseError("unknown gop strategy " + std::to_string(strat));
    h.gop.strategy = static_cast<Strategy>(strat);
    h.gop.gop_size = r.u16("gop.gop_size");
    h.gop.rp_interval = r.u16("gop.rp_interval");
    h.gop.max_refs = r.u8("gop.max_refs");
    h.gop.max_future_delay_s = static_cast<double>(r.u32("gop.max_future_delay_ms")) / 1000.0;
    h.gop.fps = h.fps_den != 0 ? static_cast<double>(h.fps_num) / h.fps_den : 0.0;

    const std::uint32_t record_count = r.u32("record_count");
    std::int64_t prev_index = -1;
    for (std::uint32_t i = 0; i < record_count; ++i) {
        FrameRecord rec;
        rec.frame_index = r.u32("record.frame_index");
        if (static_cast<std::int64_t>(rec.frame_index) <= prev_index)
            throw ParseError("record " + std::to_string(rec.frame_index) +
                             " out of order (previous " + std::to_string(prev_index) + ")");
        prev_index = rec.frame_index;
        const std::uint8_t kind = r.u8("record.kind");
        if (kind > 1)
            throw ParseError("record " + std::to_string(rec.frame_index) +
                             " has unknown kind " + std::to_string(kind));
        rec.kind = static_cast<FrameKind>(kind);
        if (rec.kind == FrameKind::ANIMATED) {
            const std::uint8_t nrefs = r.u8("record.ref_count");
            if (nrefs == 0)
                throw ParseError("animated record " + std::to_string(rec.frame_index) +
                                 " has an empty ref_list");
            for (std::uint8_t k = 0; k < nrefs; ++k) rec.ref_list.push_back(r.u32("record.ref"));
        }
        const std::uint32_t plen = r.u32("record.payload_len");
        r.need(plen, "record.payload");
        rec.payload.assign(data + r.pos, data + r.pos + plen);
        r.pos += plen;
        s.records.push_back(std::move(rec));
    }
    if (r.pos != size)
        throw ParseError("trailing data after last record at byte " + std::to_string(r.pos));

    // Referential integrity: every ref_list entry must be declared REFERENCE
    // somewhere in the stream (future references are legal under RP-style
    // scheduling; the coding delay is the scheduler's concern).
    for (const FrameRecord& rec : s.records) {
        for (std::uint32_t ref : rec.ref_list) {
            bool found = false;
            for (const FrameRecord& other : s.records)
                if (other.frame_index == ref && other.kind == FrameKind::REFERENCE) {
                    found = true;
                    break;
                }
            if (!found)
                throw ParseError("record " + std::to_string(rec.frame_index) +
                                 " references frame " + std::to_string(ref) +
                                 " which is not a REFERENCE record");
        }
    }
    return s;
}

inline Bitstream parse(const std::vector<std::uint8_t>& bytes) {
    return parse(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// bitrate accounting
// ---------------------------------------------------------------------------

// Reference frames are not pixel-coded here; their intra cost enters through
// this model (bits per reference frame).
struct CostModel {
    std::uint64_t reference_frame_bits = 40000;
};

struct BitrateBreakdown {
    std::uint64_t reference_payload_bits = 0;
    std::uint64_t animated_payload_bits = 0;
    std::uint64_t reference_intra_bits = 0;
};

struct BitrateReport {
    std::uint64_t total_bits = 0;
    double kbps = 0.0;
    BitrateBreakdown breakdown;
};

inline BitrateReport bitrate_report(const Bitstream& stream, const CostModel& cost = {}) {
    if (stream.records.empty()) throw InvalidInputError("bitrate_report on a zero-frame stream");
    if (stream.header.fps_den == 0 || stream.header.fps_num == 0)
        throw InvalidInputError("bitrate_report needs a valid fps");
    BitrateReport rep;
    for (const FrameRecord& r : stream.records) {
        const std::uint64_t bits = 8ULL * r.payload.size();
        if (r.kind == FrameKind::REFERENCE) {
            rep.breakdown.reference_payload_bits += bits;
            rep.breakdown.reference_intra_bits += cost.reference_frame_bits;
        } else {
            rep.breakdown.animated_payload_bits += bits;
        }
    }
    rep.total_bits = rep.breakdown.reference_payload_bits + rep.breakdown.animated_payload_bits +
                     rep.breakdown.reference_intra_bits;
    rep.kbps = static_cast<double>(rep.total_bits) * stream.header.fps() /
               (1000.0 * static_cast<double>(stream.records.size()));
    return rep;
}

}  // namespace mrdac
