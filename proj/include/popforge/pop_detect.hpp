#pragma once

#include <filesystem>
#include <vector>

#include "popforge/audio.hpp"

namespace popforge {

struct PopDetectParams {
    int frame_len = 1024;        // 64 ms at 16 kHz
    int hop = 256;
    double cutoff_hz = 100.0;    // pop band upper edge
    double z_threshold = 2.0;    // relative threshold mu + z*sigma
    int merge_gap_frames = 4;
    int min_len_frames = 2;
};

// A detected low-frequency energy burst, in STFT frame coordinates.
struct PopSegment {
    int start_frame = 0;
    int end_frame = 0;           // inclusive
    double start_s = 0.0;
    double end_s = 0.0;
    double peak_energy = 0.0;
};

inline int frame_count(std::size_t n_samples, const PopDetectParams& p) {
    if (n_samples < static_cast<std::size_t>(p.frame_len)) return 0;
    return static_cast<int>((n_samples - p.frame_len) / p.hop) + 1;
}

// Per-frame energy summed over Hann-windowed STFT bins whose center
// frequency is <= cutoff_hz.
std::vector<double> lowband_energy(const AudioClip& clip, const PopDetectParams& params);

// Threshold the energy series at mu + z*sigma, merge nearby runs, drop runs
// shorter than min_len_frames. A zero-variance series yields no detections.
std::vector<PopSegment> detect_pops(const std::vector<double>& energies,
                                    const PopDetectParams& params, int sample_rate);

std::vector<PopSegment> detect_pops(const AudioClip& clip, const PopDetectParams& params);

// Debug dump: frame_index,time_s,lowband_energy
void dump_energy_csv(const std::filesystem::path& path,
                     const std::vector<double>& energies,
                     const PopDetectParams& params, int sample_rate);

} // namespace popforge
