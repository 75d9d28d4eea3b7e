#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "popforge/audio.hpp"
#include "popforge/errors.hpp"
#include "popforge/flac.hpp"
#include "test_support.hpp"

using namespace popforge;

namespace {

// ---- minimal FLAC encoder (test oracle; independent of src/flac.cpp) ----

struct BitWriter {
    std::vector<std::uint8_t> bytes;
    int bit = 0;

    void put(std::uint64_t v, int n) {
        for (int i = n - 1; i >= 0; --i) {
            if (bit == 0) bytes.push_back(0);
            if ((v >> i) & 1) bytes.back() |= std::uint8_t(0x80 >> bit);
            bit = (bit + 1) % 8;
        }
    }
    void align() {
        while (bit != 0) put(0, 1);
    }
};

std::uint8_t ref_crc8(const std::uint8_t* d, std::size_t n) {
    std::uint8_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        c ^= d[i];
        for (int b = 0; b < 8; ++b) c = (c & 0x80) ? std::uint8_t((c << 1) ^ 0x07) : std::uint8_t(c << 1);
    }
    return c;
}

std::uint16_t ref_crc16(const std::uint8_t* d, std::size_t n) {
    std::uint16_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        c ^= std::uint16_t(d[i]) << 8;
        for (int b = 0; b < 8; ++b)
            c = (c & 0x8000) ? std::uint16_t((c << 1) ^ 0x8005) : std::uint16_t(c << 1);
    }
    return c;
}

enum class SubframeKind { Constant, Verbatim, FixedOrder2, LpcOrder1 };

void write_subframe(BitWriter& w, const std::vector<int>& s, int bps, SubframeKind kind) {
    w.put(0, 1); // padding
    switch (kind) {
    case SubframeKind::Constant:
        w.put(0, 6);
        w.put(0, 1); // no wasted bits
        w.put(std::uint64_t(std::int64_t(s[0])) & ((1ULL << bps) - 1), bps);
        break;
    case SubframeKind::Verbatim:
        w.put(1, 6);
        w.put(0, 1);
        for (int v : s) w.put(std::uint64_t(std::int64_t(v)) & ((1ULL << bps) - 1), bps);
        break;
    case SubframeKind::FixedOrder2: {
        w.put(8 + 2, 6);
        w.put(0, 1);
        for (int i = 0; i < 2; ++i)
            w.put(std::uint64_t(std::int64_t(s[i])) & ((1ULL << bps) - 1), bps);
        w.put(0, 2); // rice, 4-bit params
        w.put(0, 4); // partition order 0
        const int param = 6;
        w.put(param, 4);
        for (std::size_t i = 2; i < s.size(); ++i) {
            const long r = long(s[i]) - (2L * s[i - 1] - s[i - 2]);
            const unsigned long u = r >= 0 ? 2UL * r : std::uint64_t(-2L * r - 1);
            const unsigned long q = u >> param;
            for (unsigned long z = 0; z < q; ++z) w.put(0, 1);
            w.put(1, 1);
            w.put(u & ((1UL << param) - 1), param);
        }
        break;
    }
    case SubframeKind::LpcOrder1: {
        w.put(32 + 0, 6); // LPC order 1
        w.put(0, 1);
        w.put(std::uint64_t(std::int64_t(s[0])) & ((1ULL << bps) - 1), bps);
        w.put(4, 4);  // precision 5 bits
        w.put(0, 5);  // shift 0
        w.put(1, 5);  // coefficient = 1 -> predict previous sample
        w.put(0, 2);
        w.put(0, 4);
        const int param = 6;
        w.put(param, 4);
        for (std::size_t i = 1; i < s.size(); ++i) {
            const long r = long(s[i]) - long(s[i - 1]);
            const unsigned long u = r >= 0 ? 2UL * r : std::uint64_t(-2L * r - 1);
            const unsigned long q = u >> param;
            for (unsigned long z = 0; z < q; ++z) w.put(0, 1);
            w.put(1, 1);
            w.put(u & ((1UL << param) - 1), param);
        }
        break;
    }
    }
}

// channels: raw integer samples per channel; assignment 0..7 = independent,
// 8 = left/side (ch1 must already hold the side = left - right signal).
std::vector<std::uint8_t> encode_flac(const std::vector<std::vector<int>>& channels,
                                      int sample_rate, int bps, SubframeKind kind,
                                      int assignment = -1) {
    const int n = static_cast<int>(channels[0].size());
    const int n_ch = static_cast<int>(channels.size());
    if (assignment < 0) assignment = n_ch - 1;

    BitWriter w;
    w.put(0x664C6143u, 32); // fLaC
    // STREAMINFO, last metadata block
    w.put(1, 1);
    w.put(0, 7);
    w.put(34, 24);
    w.put(n, 16);
    w.put(n, 16);
    w.put(0, 24);
    w.put(0, 24);
    w.put(sample_rate, 20);
    w.put(n_ch - 1, 3);
    w.put(bps - 1, 5);
    w.put(std::uint64_t(n), 36);
    for (int i = 0; i < 16; ++i) w.put(0, 8);

    const std::size_t frame_start = w.bytes.size();
    w.put(0x3FFE, 14);
    w.put(0, 1);
    w.put(0, 1); // fixed blocking
    w.put(7, 4); // 16-bit block size at header end
    w.put(0, 4); // sample rate from STREAMINFO
    w.put(assignment, 4);
    w.put(4, 3); // 16-bit samples
    w.put(0, 1);
    w.put(0, 8);     // utf8 frame number 0
    w.put(n - 1, 16); // block size - 1
    w.put(ref_crc8(w.bytes.data() + frame_start, w.bytes.size() - frame_start), 8);

    for (int c = 0; c < n_ch; ++c) {
        int sub_bps = bps;
        if (assignment == 8 && c == 1) ++sub_bps; // side channel
        write_subframe(w, channels[c], sub_bps, kind);
    }
    w.align();
    w.put(ref_crc16(w.bytes.data() + frame_start, w.bytes.size() - frame_start), 16);
    return w.bytes;
}

void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<int> ramp_samples(int n, int lo, int step) {
    std::vector<int> s(n);
    for (int i = 0; i < n; ++i) s[i] = lo + step * i;
    return s;
}

} // namespace

TEST_CASE("wav round trip: 1 s mono 16 kHz has 16000 samples") {
    const auto dir = testsup::temp_dir("wav_basic");
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples = testsup::sine(440.0, 0.5, 16000, 16000);
    clip.source_id = "tone";
    save_wav(dir / "tone.wav", clip);

    const AudioClip loaded = load_audio(dir / "tone.wav");
    CHECK(loaded.samples.size() == 16000);
    CHECK(loaded.sample_rate == 16000);
    CHECK(loaded.source_id == "tone");
    double peak = 0.0;
    for (double s : loaded.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak <= 1.0 + 1e-6);
}

TEST_CASE("wav round trip preserves samples within 1/32768") {
    const auto dir = testsup::temp_dir("wav_roundtrip");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    AudioClip clip;
    clip.sample_rate = 16000;
    for (int i = 0; i < 4096; ++i) clip.samples.push_back(amp(rng));

    save_wav(dir / "a.wav", clip);
    const AudioClip l1 = load_audio(dir / "a.wav");
    REQUIRE(l1.samples.size() == clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i)
        CHECK(std::abs(l1.samples[i] - clip.samples[i]) <= 1.0 / 32768.0);

    // second round trip is exact: quantization is idempotent
    save_wav(dir / "b.wav", l1);
    const AudioClip l2 = load_audio(dir / "b.wav");
    CHECK(l2.samples == l1.samples);
}

TEST_CASE("stereo wav with channels (0.5, -0.5) averages to silence") {
    const auto dir = testsup::temp_dir("wav_stereo");
    // hand-built 2-channel PCM16 RIFF
    const int n = 256;
    std::vector<std::uint8_t> b;
    auto w16 = [&](std::uint16_t v) {
        b.push_back(v & 0xFF);
        b.push_back(v >> 8);
    };
    auto w32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
    };
    auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
    tag("RIFF");
    w32(36 + n * 4);
    tag("WAVE");
    tag("fmt ");
    w32(16);
    w16(1);
    w16(2);
    w32(16000);
    w32(16000 * 4);
    w16(4);
    w16(16);
    tag("data");
    w32(n * 4);
    for (int i = 0; i < n; ++i) {
        w16(static_cast<std::uint16_t>(16384));  // +0.5
        w16(static_cast<std::uint16_t>(-16384)); // -0.5
    }
    write_file(dir / "st.wav", b);

    const AudioClip clip = load_audio(dir / "st.wav");
    REQUIRE(clip.samples.size() == static_cast<std::size_t>(n));
    for (double s : clip.samples) CHECK(s == 0.0);
}

TEST_CASE("load errors: missing file, bad container, empty data") {
    const auto dir = testsup::temp_dir("wav_errors");
    CHECK_THROWS_AS(load_audio(dir / "nope.wav"), FileNotFound);

    write_file(dir / "garbage.bin", {'n', 'o', 'p', 'e', 0, 0, 0, 0});
    CHECK_THROWS_AS(load_audio(dir / "garbage.bin"), UnsupportedFormat);

    // valid header, zero frames
    std::vector<std::uint8_t> b;
    auto w16 = [&](std::uint16_t v) {
        b.push_back(v & 0xFF);
        b.push_back(v >> 8);
    };
    auto w32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
    };
    auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
    tag("RIFF");
    w32(36);
    tag("WAVE");
    tag("fmt ");
    w32(16);
    w16(1);
    w16(1);
    w32(16000);
    w32(32000);
    w16(2);
    w16(16);
    tag("data");
    w32(0);
    write_file(dir / "empty.wav", b);
    CHECK_THROWS_AS(load_audio(dir / "empty.wav"), EmptyAudio);
}

TEST_CASE("flac verbatim mono decodes exactly") {
    const auto dir = testsup::temp_dir("flac_verbatim");
    const std::vector<int> s = ramp_samples(64, -2000, 63);
    write_file(dir / "v.flac", encode_flac({s}, 16000, 16, SubframeKind::Verbatim));

    const flac::Decoded d = flac::decode_file(dir / "v.flac");
    CHECK(d.sample_rate == 16000);
    CHECK(d.bits_per_sample == 16);
    REQUIRE(d.channels.size() == 1);
    REQUIRE(d.channels[0].size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(d.channels[0][i] == s[i]);

    const AudioClip clip = load_audio(dir / "v.flac");
    REQUIRE(clip.samples.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(clip.samples[i] == doctest::Approx(s[i] / 32768.0).epsilon(1e-12));
}

TEST_CASE("flac constant and fixed-order-2 rice subframes decode exactly") {
    const auto dir = testsup::temp_dir("flac_kinds");

    std::vector<int> c(48, -12345);
    write_file(dir / "c.flac", encode_flac({c}, 8000, 16, SubframeKind::Constant));
    const flac::Decoded dc = flac::decode_file(dir / "c.flac");
    REQUIRE(dc.channels[0].size() == c.size());
    for (auto v : dc.channels[0]) CHECK(v == -12345);

    // a wobbly series exercises negative residuals
    std::vector<int> s(96);
    for (int i = 0; i < 96; ++i)
        s[i] = static_cast<int>(900.0 * std::sin(0.31 * i) + 40.0 * std::cos(1.7 * i));
    write_file(dir / "f.flac", encode_flac({s}, 16000, 16, SubframeKind::FixedOrder2));
    const flac::Decoded df = flac::decode_file(dir / "f.flac");
    REQUIRE(df.channels[0].size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(df.channels[0][i] == s[i]);
}

TEST_CASE("flac lpc order-1 subframe decodes exactly") {
    const auto dir = testsup::temp_dir("flac_lpc");
    std::vector<int> s(80);
    for (int i = 0; i < 80; ++i) s[i] = static_cast<int>(500.0 * std::sin(0.2 * i)) + i;
    write_file(dir / "l.flac", encode_flac({s}, 16000, 16, SubframeKind::LpcOrder1));
    const flac::Decoded d = flac::decode_file(dir / "l.flac");
    REQUIRE(d.channels[0].size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(d.channels[0][i] == s[i]);
}

TEST_CASE("flac stereo: independent and left/side assignments") {
    const auto dir = testsup::temp_dir("flac_stereo");
    const std::vector<int> left = ramp_samples(64, 100, 13);
    const std::vector<int> right = ramp_samples(64, -400, 7);

    write_file(dir / "ind.flac", encode_flac({left, right}, 16000, 16, SubframeKind::Verbatim, 1));
    const flac::Decoded di = flac::decode_file(dir / "ind.flac");
    REQUIRE(di.channels.size() == 2);
    for (std::size_t i = 0; i < left.size(); ++i) {
        CHECK(di.channels[0][i] == left[i]);
        CHECK(di.channels[1][i] == right[i]);
    }

    std::vector<int> side(left.size());
    for (std::size_t i = 0; i < left.size(); ++i) side[i] = left[i] - right[i];
    write_file(dir / "ls.flac", encode_flac({left, side}, 16000, 16, SubframeKind::Verbatim, 8));
    const flac::Decoded dl = flac::decode_file(dir / "ls.flac");
    REQUIRE(dl.channels.size() == 2);
    for (std::size_t i = 0; i < left.size(); ++i) {
        CHECK(dl.channels[0][i] == left[i]);
        CHECK(dl.channels[1][i] == right[i]);
    }
}

TEST_CASE("flac corruption is rejected") {
    const auto dir = testsup::temp_dir("flac_bad");
    auto bytes = encode_flac({ramp_samples(32, 0, 5)}, 16000, 16, SubframeKind::Verbatim);
    bytes[bytes.size() / 2] ^= 0x40; // flip a bit inside the frame
    write_file(dir / "bad.flac", bytes);
    CHECK_THROWS_AS(flac::decode_file(dir / "bad.flac"), UnsupportedFormat);
}

TEST_CASE("resample: identity at matching rate") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples = testsup::sine(300.0, 0.4, 16000, 8000);
    const AudioClip out = resample(clip, 16000);
    CHECK(out.samples == clip.samples);
}

TEST_CASE("resample: duration preserved within one output sample") {
    AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples.assign(16000, 0.25); // 2 s
    const AudioClip out = resample(clip, 16000);
    CHECK(std::llabs(static_cast<long long>(out.samples.size()) - 32000LL) <= 1);
    CHECK(out.sample_rate == 16000);
}

TEST_CASE("resample: 440 Hz sine at 48 kHz keeps its DFT peak at 16 kHz") {
    AudioClip clip;
    clip.sample_rate = 48000;
    clip.samples = testsup::sine(440.0, 0.7, 48000, 48000);
    const AudioClip out = resample(clip, 16000);
    // skip the edge transients of the interpolation kernel
    std::vector<double> body(out.samples.begin() + 500, out.samples.end() - 500);
    const double peak = testsup::dft_peak_hz(body, 16000.0, 200.0, 1000.0, 0.25);
    CHECK(peak == doctest::Approx(440.0).epsilon(0).scale(1).epsilon(2.0 / 440.0));
}

TEST_CASE("resample is deterministic") {
    AudioClip clip;
    clip.sample_rate = 44100;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> amp(-0.9, 0.9);
    for (int i = 0; i < 44100; ++i) clip.samples.push_back(amp(rng));
    const AudioClip a = resample(clip, 16000);
    const AudioClip b = resample(clip, 16000);
    CHECK(a.samples == b.samples);
}
