#include "popforge/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "popforge/dsp.hpp"
#include "popforge/errors.hpp"
#include "popforge/flac.hpp"

namespace popforge {
namespace {

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& source_id) {
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw UnsupportedFormat("wav: not a RIFF/WAVE file: " + source_id);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const std::uint8_t* data = nullptr;
    std::size_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = read_u32le(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size())
            throw UnsupportedFormat("wav: truncated chunk: " + source_id);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw UnsupportedFormat("wav: short fmt chunk: " + source_id);
            format = read_u16le(bytes.data() + body);
            channels = read_u16le(bytes.data() + body + 2);
            sample_rate = read_u32le(bytes.data() + body + 4);
            bits = read_u16le(bytes.data() + body + 14);
            if (format == 0xFFFE) { // WAVE_FORMAT_EXTENSIBLE: code lives in the GUID
                if (len < 40) throw UnsupportedFormat("wav: short extensible fmt: " + source_id);
                format = read_u16le(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = len;
        }
        pos = body + len + (len & 1); // chunks are word aligned
    }

    if (!have_fmt || channels == 0 || sample_rate == 0)
        throw UnsupportedFormat("wav: missing or invalid fmt chunk: " + source_id);
    if (data == nullptr) throw UnsupportedFormat("wav: missing data chunk: " + source_id);

    const std::size_t bytes_per_sample = bits / 8;
    if (bytes_per_sample == 0 || data_len % (bytes_per_sample * channels) != 0)
        throw UnsupportedFormat("wav: data size not a whole number of frames: " + source_id);
    const std::size_t n_frames = data_len / (bytes_per_sample * channels);
    if (n_frames == 0) throw EmptyAudio("wav: zero samples: " + source_id);

    auto sample_at = [&](std::size_t frame, std::size_t ch) -> double {
        const std::uint8_t* p = data + (frame * channels + ch) * bytes_per_sample;
        if (format == 1) { // integer PCM
            switch (bits) {
            case 16: {
                const std::int16_t v = static_cast<std::int16_t>(read_u16le(p));
                return v / 32768.0;
            }
            case 24: {
                std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
                if (v & 0x800000) v |= ~0xFFFFFF;
                return v / 8388608.0;
            }
            case 32: {
                const std::int32_t v = static_cast<std::int32_t>(read_u32le(p));
                return v / 2147483648.0;
            }
            default:
                throw UnsupportedFormat("wav: unsupported PCM bit depth: " + source_id);
            }
        }
        if (format == 3 && bits == 32) { // IEEE float
            float f;
            std::uint32_t raw = read_u32le(p);
            std::memcpy(&f, &raw, 4);
            return std::clamp(static_cast<double>(f), -1.0, 1.0);
        }
        throw UnsupportedFormat("wav: unsupported sample format: " + source_id);
    };

    AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.source_id = source_id;
    clip.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) acc += sample_at(i, c);
        clip.samples[i] = acc / channels;
    }
    return clip;
}

AudioClip decode_flac(const std::filesystem::path& path, const std::string& source_id) {
    const flac::Decoded d = flac::decode_file(path);
    if (d.channels.empty() || d.channels[0].empty())
        throw EmptyAudio("flac: zero samples: " + source_id);
    const double scale = 1.0 / static_cast<double>(1LL << (d.bits_per_sample - 1));
    const std::size_t n = d.channels[0].size();
    AudioClip clip;
    clip.sample_rate = static_cast<int>(d.sample_rate);
    clip.source_id = source_id;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& ch : d.channels) acc += static_cast<double>(ch[i]) * scale;
        clip.samples[i] = acc / static_cast<double>(d.channels.size());
    }
    return clip;
}

} // namespace

AudioClip load_audio(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw FileNotFound("no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    char magic[4] = {};
    in.read(magic, 4);
    const std::string source_id = path.stem().string();
    if (std::memcmp(magic, "fLaC", 4) == 0 || std::memcmp(magic, "ID3", 3) == 0)
        return decode_flac(path, source_id);
    if (std::memcmp(magic, "RIFF", 4) == 0) {
        in.seekg(0);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        return decode_wav(bytes, source_id);
    }
    throw UnsupportedFormat("unrecognized audio container: " + path.string());
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
    if (clip.samples.empty()) throw EmptyAudio("refusing to write empty clip");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());

    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_len = n * 2;
    const std::uint32_t sr = static_cast<std::uint32_t>(clip.sample_rate);

    auto w16 = [&](std::uint16_t v) { out.put(char(v & 0xFF)).put(char(v >> 8)); };
    auto w32 = [&](std::uint32_t v) {
        out.put(char(v & 0xFF)).put(char((v >> 8) & 0xFF));
        out.put(char((v >> 16) & 0xFF)).put(char((v >> 24) & 0xFF));
    };

    out.write("RIFF", 4);
    w32(36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    w32(16);
    w16(1); // PCM
    w16(1); // mono
    w32(sr);
    w32(sr * 2);
    w16(2);
    w16(16);
    out.write("data", 4);
    w32(data_len);
    for (double s : clip.samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const long q = std::lround(clamped * 32768.0);
        w16(static_cast<std::uint16_t>(std::clamp(q, -32768L, 32767L)));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_sr) {
    if (target_sr <= 0) throw Error("resample: target rate must be positive");
    if (clip.sample_rate == target_sr) return clip;

    const double src = clip.sample_rate;
    const double dst = target_sr;
    const std::int64_t out_len =
        (static_cast<std::int64_t>(clip.samples.size()) * target_sr +
         clip.sample_rate / 2) /
        clip.sample_rate;

    // Blackman-windowed sinc, 16 zero crossings per side, cutoff at 0.45 of
    // the narrower Nyquist band.
    const double scale = std::min(1.0, dst / src);
    const double fc = 0.45 * scale;
    const double half = 8.0 / fc;
    const std::int64_t in_len = static_cast<std::int64_t>(clip.samples.size());

    AudioClip out;
    out.sample_rate = target_sr;
    out.source_id = clip.source_id;
    out.samples.resize(static_cast<std::size_t>(out_len));

    for (std::int64_t j = 0; j < out_len; ++j) {
        const double t = static_cast<double>(j) * src / dst;
        const std::int64_t lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half)));
        const std::int64_t hi = std::min(in_len - 1, static_cast<std::int64_t>(std::floor(t + half)));
        double acc = 0.0;
        for (std::int64_t i = lo; i <= hi; ++i) {
            const double x = static_cast<double>(i) - t;
            const double u = x / half; // in [-1, 1]
            const double window = 0.42 + 0.5 * std::cos(dsp::kPi * u) + 0.08 * std::cos(dsp::kTwoPi * u);
            double sinc;
            if (std::abs(x) < 1e-12) {
                sinc = 2.0 * fc;
            } else {
                sinc = std::sin(dsp::kTwoPi * fc * x) / (dsp::kPi * x);
            }
            acc += clip.samples[static_cast<std::size_t>(i)] * sinc * window;
        }
        out.samples[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

} // namespace popforge
