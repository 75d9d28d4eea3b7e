#include "popforge/flac.hpp"

#include <cstring>
#include <fstream>

#include "popforge/errors.hpp"

namespace popforge::flac {
namespace {

struct BitReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t byte_pos = 0;
    int bit_pos = 0; // 0..7, MSB first

    bool at_end() const { return byte_pos >= size; }

    bool aligned() const { return bit_pos == 0; }

    void align() {
        if (bit_pos != 0) {
            bit_pos = 0;
            ++byte_pos;
        }
    }

    std::uint64_t bits(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            if (byte_pos >= size) throw UnsupportedFormat("flac: truncated stream");
            v = (v << 1) | ((data[byte_pos] >> (7 - bit_pos)) & 1u);
            if (++bit_pos == 8) {
                bit_pos = 0;
                ++byte_pos;
            }
        }
        return v;
    }

    std::int64_t signed_bits(int n) {
        std::uint64_t v = bits(n);
        if (n > 0 && (v & (1ULL << (n - 1))))
            v |= ~((1ULL << n) - 1); // sign extend
        return static_cast<std::int64_t>(v);
    }

    // Count of zero bits before the next one bit.
    int unary() {
        int q = 0;
        while (bits(1) == 0) ++q;
        return q;
    }
};

std::uint8_t crc8(const std::uint8_t* data, std::size_t n) {
    std::uint8_t crc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b)
            crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07)
                               : static_cast<std::uint8_t>(crc << 1);
    }
    return crc;
}

std::uint16_t crc16(const std::uint8_t* data, std::size_t n) {
    std::uint16_t crc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= static_cast<std::uint16_t>(data[i]) << 8;
        for (int b = 0; b < 8; ++b)
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x8005)
                                 : static_cast<std::uint16_t>(crc << 1);
    }
    return crc;
}

std::uint64_t read_utf8_number(BitReader& br) {
    const std::uint64_t first = br.bits(8);
    int ones = 0;
    while (ones < 8 && (first & (0x80u >> ones))) ++ones;
    if (ones == 0) return first;
    if (ones == 1 || ones > 7) throw UnsupportedFormat("flac: bad utf8-coded number");
    std::uint64_t v = first & (0x7Fu >> ones);
    for (int i = 1; i < ones; ++i) {
        const std::uint64_t cont = br.bits(8);
        if ((cont & 0xC0u) != 0x80u) throw UnsupportedFormat("flac: bad utf8 continuation");
        v = (v << 6) | (cont & 0x3Fu);
    }
    return v;
}

void decode_residual(BitReader& br, int block_size, int predictor_order,
                     std::vector<std::int64_t>& out) {
    const int method = static_cast<int>(br.bits(2));
    if (method > 1) throw UnsupportedFormat("flac: reserved residual coding method");
    const int param_bits = method == 0 ? 4 : 5;
    const int escape = method == 0 ? 15 : 31;
    const int partition_order = static_cast<int>(br.bits(4));
    const int partitions = 1 << partition_order;
    if (block_size % partitions != 0)
        throw UnsupportedFormat("flac: block size not divisible by partition count");

    int produced = predictor_order;
    for (int p = 0; p < partitions; ++p) {
        int count = block_size >> partition_order;
        if (p == 0) count -= predictor_order;
        if (count < 0) throw UnsupportedFormat("flac: invalid partition layout");
        const int param = static_cast<int>(br.bits(param_bits));
        if (param == escape) {
            const int raw_bits = static_cast<int>(br.bits(5));
            for (int i = 0; i < count; ++i)
                out[produced++] = raw_bits == 0 ? 0 : br.signed_bits(raw_bits);
        } else {
            for (int i = 0; i < count; ++i) {
                const int q = br.unary();
                const std::uint64_t r = param == 0 ? 0 : br.bits(param);
                const std::uint64_t v =
                    (static_cast<std::uint64_t>(q) << param) | r;
                out[produced++] = static_cast<std::int64_t>(v >> 1) ^
                                  -static_cast<std::int64_t>(v & 1);
            }
        }
    }
}

void apply_fixed_predictor(int order, std::vector<std::int64_t>& s) {
    for (std::size_t i = order; i < s.size(); ++i) {
        switch (order) {
        case 0: break;
        case 1: s[i] += s[i - 1]; break;
        case 2: s[i] += 2 * s[i - 1] - s[i - 2]; break;
        case 3: s[i] += 3 * s[i - 1] - 3 * s[i - 2] + s[i - 3]; break;
        case 4: s[i] += 4 * s[i - 1] - 6 * s[i - 2] + 4 * s[i - 3] - s[i - 4]; break;
        default: throw UnsupportedFormat("flac: fixed predictor order > 4");
        }
    }
}

std::vector<std::int64_t> decode_subframe(BitReader& br, int block_size, int bps) {
    if (br.bits(1) != 0) throw UnsupportedFormat("flac: bad subframe padding bit");
    const int type = static_cast<int>(br.bits(6));
    int wasted = 0;
    if (br.bits(1) == 1) wasted = br.unary() + 1;
    bps -= wasted;
    if (bps <= 0 || bps > 33) throw UnsupportedFormat("flac: invalid subframe bit depth");

    std::vector<std::int64_t> s(block_size, 0);
    if (type == 0) { // CONSTANT
        const std::int64_t v = br.signed_bits(bps);
        for (auto& x : s) x = v;
    } else if (type == 1) { // VERBATIM
        for (auto& x : s) x = br.signed_bits(bps);
    } else if (type >= 8 && type <= 12) { // FIXED
        const int order = type - 8;
        if (order > block_size) throw UnsupportedFormat("flac: predictor order > block size");
        for (int i = 0; i < order; ++i) s[i] = br.signed_bits(bps);
        decode_residual(br, block_size, order, s);
        apply_fixed_predictor(order, s);
    } else if (type >= 32) { // LPC
        const int order = (type & 31) + 1;
        if (order > block_size) throw UnsupportedFormat("flac: predictor order > block size");
        for (int i = 0; i < order; ++i) s[i] = br.signed_bits(bps);
        const int precision = static_cast<int>(br.bits(4)) + 1;
        if (precision == 16) throw UnsupportedFormat("flac: invalid qlp precision");
        const int shift = static_cast<int>(br.signed_bits(5));
        if (shift < 0) throw UnsupportedFormat("flac: negative qlp shift");
        std::vector<std::int64_t> coef(order);
        for (int i = 0; i < order; ++i) coef[i] = br.signed_bits(precision);
        decode_residual(br, block_size, order, s);
        for (std::size_t i = order; i < s.size(); ++i) {
            std::int64_t acc = 0;
            for (int j = 0; j < order; ++j) acc += coef[j] * s[i - 1 - j];
            s[i] += acc >> shift;
        }
    } else {
        throw UnsupportedFormat("flac: reserved subframe type");
    }

    if (wasted > 0)
        for (auto& x : s) x <<= wasted;
    return s;
}

} // namespace

Decoded decode(const std::vector<std::uint8_t>& bytes) {
    BitReader br{bytes.data(), bytes.size()};

    // Skip an ID3v2 tag if one was prepended.
    if (bytes.size() >= 10 && std::memcmp(bytes.data(), "ID3", 3) == 0) {
        const std::size_t tag = ((bytes[6] & 0x7FUL) << 21) | ((bytes[7] & 0x7FUL) << 14) |
                                ((bytes[8] & 0x7FUL) << 7) | (bytes[9] & 0x7FUL);
        br.byte_pos = 10 + tag;
    }

    if (br.bits(32) != 0x664C6143u) // "fLaC"
        throw UnsupportedFormat("flac: missing stream marker");

    long sample_rate = 0;
    int channels = 0;
    int bits_per_sample = 0;
    std::uint64_t total_samples = 0;
    bool have_streaminfo = false;

    for (bool last = false; !last;) {
        last = br.bits(1) != 0;
        const int type = static_cast<int>(br.bits(7));
        const std::size_t length = static_cast<std::size_t>(br.bits(24));
        if (type == 0) {
            if (length != 34) throw UnsupportedFormat("flac: bad STREAMINFO length");
            br.bits(16); // min block size
            br.bits(16); // max block size
            br.bits(24); // min frame size
            br.bits(24); // max frame size
            sample_rate = static_cast<long>(br.bits(20));
            channels = static_cast<int>(br.bits(3)) + 1;
            bits_per_sample = static_cast<int>(br.bits(5)) + 1;
            total_samples = br.bits(36);
            for (int i = 0; i < 16; ++i) br.bits(8); // md5
            have_streaminfo = true;
        } else {
            if (br.byte_pos + length > bytes.size())
                throw UnsupportedFormat("flac: truncated metadata block");
            br.byte_pos += length;
        }
    }
    if (!have_streaminfo || sample_rate <= 0)
        throw UnsupportedFormat("flac: missing STREAMINFO");

    Decoded out;
    out.sample_rate = sample_rate;
    out.bits_per_sample = bits_per_sample;
    out.channels.assign(channels, {});

    while (!br.at_end()) {
        const std::size_t frame_start = br.byte_pos;

        if (br.bits(14) != 0x3FFEu) throw UnsupportedFormat("flac: lost frame sync");
        br.bits(1); // reserved
        br.bits(1); // blocking strategy
        const int bs_code = static_cast<int>(br.bits(4));
        const int sr_code = static_cast<int>(br.bits(4));
        const int ch_code = static_cast<int>(br.bits(4));
        const int ss_code = static_cast<int>(br.bits(3));
        br.bits(1); // reserved
        read_utf8_number(br);

        int block_size;
        switch (bs_code) {
        case 1: block_size = 192; break;
        case 2: case 3: case 4: case 5:
            block_size = 576 << (bs_code - 2);
            break;
        case 6: block_size = static_cast<int>(br.bits(8)) + 1; break;
        case 7: block_size = static_cast<int>(br.bits(16)) + 1; break;
        default:
            if (bs_code >= 8)
                block_size = 256 << (bs_code - 8);
            else
                throw UnsupportedFormat("flac: reserved block size code");
        }
        if (sr_code == 12) br.bits(8);
        else if (sr_code == 13 || sr_code == 14) br.bits(16);
        else if (sr_code == 15) throw UnsupportedFormat("flac: invalid sample rate code");

        int frame_bps = bits_per_sample;
        switch (ss_code) {
        case 0: break;
        case 1: frame_bps = 8; break;
        case 2: frame_bps = 12; break;
        case 4: frame_bps = 16; break;
        case 5: frame_bps = 20; break;
        case 6: frame_bps = 24; break;
        case 7: frame_bps = 32; break;
        default: throw UnsupportedFormat("flac: reserved sample size code");
        }

        const std::uint8_t header_crc = static_cast<std::uint8_t>(br.bits(8));
        if (crc8(bytes.data() + frame_start, br.byte_pos - 1 - frame_start) != header_crc)
            throw UnsupportedFormat("flac: frame header crc mismatch");

        int frame_channels;
        if (ch_code <= 7) frame_channels = ch_code + 1;
        else if (ch_code <= 10) frame_channels = 2;
        else throw UnsupportedFormat("flac: reserved channel assignment");
        if (frame_channels != channels)
            throw UnsupportedFormat("flac: frame channel count differs from STREAMINFO");

        std::vector<std::vector<std::int64_t>> sub(frame_channels);
        for (int c = 0; c < frame_channels; ++c) {
            int bps = frame_bps;
            // The side channel carries one extra bit.
            if ((ch_code == 8 && c == 1) || (ch_code == 9 && c == 0) ||
                (ch_code == 10 && c == 1))
                ++bps;
            sub[c] = decode_subframe(br, block_size, bps);
        }

        br.align();
        const std::uint16_t frame_crc = static_cast<std::uint16_t>(br.bits(16));
        if (crc16(bytes.data() + frame_start, br.byte_pos - 2 - frame_start) != frame_crc)
            throw UnsupportedFormat("flac: frame crc mismatch");

        // Undo inter-channel decorrelation.
        if (ch_code == 8) { // left/side
            for (int i = 0; i < block_size; ++i) sub[1][i] = sub[0][i] - sub[1][i];
        } else if (ch_code == 9) { // right/side
            for (int i = 0; i < block_size; ++i) sub[0][i] = sub[1][i] + sub[0][i];
        } else if (ch_code == 10) { // mid/side
            for (int i = 0; i < block_size; ++i) {
                std::int64_t mid = (sub[0][i] << 1) | (sub[1][i] & 1);
                const std::int64_t side = sub[1][i];
                sub[0][i] = (mid + side) >> 1;
                sub[1][i] = (mid - side) >> 1;
            }
        }

        for (int c = 0; c < channels; ++c)
            out.channels[c].insert(out.channels[c].end(), sub[c].begin(), sub[c].end());
    }

    if (total_samples > 0)
        for (auto& ch : out.channels)
            if (ch.size() > total_samples) ch.resize(total_samples);
    return out;
}

Decoded decode_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes);
}

} // namespace popforge::flac
