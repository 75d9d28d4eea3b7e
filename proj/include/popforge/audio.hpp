#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace popforge {

// Canonical mono clip. All DSP in this project operates on these.
struct AudioClip {
    std::vector<double> samples; // amplitudes in [-1, 1]
    int sample_rate = 0;         // Hz
    std::string source_id;

    double duration_s() const {
        return sample_rate > 0
                   ? static_cast<double>(samples.size()) / sample_rate
                   : 0.0;
    }
};

// Decode a WAV (PCM 16/24/32-bit or float32) or FLAC file into a mono clip.
// Multi-channel input is averaged; samples are scaled to [-1, 1].
AudioClip load_audio(const std::filesystem::path& path);

// Write a mono 16-bit PCM WAV.
void save_wav(const std::filesystem::path& path, const AudioClip& clip);

// Windowed-sinc resampler. Returns the input unchanged when rates match.
AudioClip resample(const AudioClip& clip, int target_sr);

} // namespace popforge
