#pragma once

#include <array>
#include <optional>
#include <vector>

#include "popforge/audio.hpp"
#include "popforge/dsp.hpp"
#include "popforge/pop_detect.hpp"

namespace popforge {

// ERB-rate scale (Glasberg & Moore): 21.4 * log10(4.37 * f/1000 + 1).
double erb_rate(double hz);
double erb_rate_inverse(double rate);
double erb_bandwidth_hz(double hz); // 24.7 * (4.37 * f/1000 + 1)

struct GammatoneChannel {
    double center_hz = 0.0;
    std::array<dsp::Biquad, 4> stages; // 4th-order filter as cascaded sections
};

struct GammatoneBank {
    int sample_rate = 0;
    int order = 4;
    std::vector<GammatoneChannel> channels;

    int n_channels() const { return static_cast<int>(channels.size()); }
    std::vector<double> center_hz() const;
};

// Channels equally spaced on the ERB-rate scale between f_lo and f_hi, each
// a 4th-order gammatone with unit gain at its center frequency.
GammatoneBank make_bank(int sample_rate, int n_channels, double f_lo, double f_hi);

// One pass of a single channel over a raw signal.
std::vector<double> filter_channel(const std::vector<double>& x, const GammatoneChannel& ch);

struct FeatureParams {
    double flank_ms = 50.0;       // background context on each side of a pop
    double energy_floor = 1e-10;  // epsilon under the log
};

struct FeatureVector {
    double gfcc_mean = 0.0; // mean log energy inside pop segments
    double delta1 = 0.0;    // segment-vs-background log energy change
    double delta2 = 0.0;    // mean |frame-to-frame| log energy change
};

// Row-major [n_frames x n_channels] log energies over a segment window,
// with the rows belonging to the segment proper marked.
struct SegmentWindow {
    int n_frames = 0;
    int n_channels = 0;
    std::vector<double> log_e; // row-major
    int seg_first_row = 0;     // rows [seg_first_row, seg_last_row] are in-segment
    int seg_last_row = 0;

    double at(int frame, int channel) const {
        return log_e[static_cast<std::size_t>(frame) * n_channels + channel];
    }
    double& at(int frame, int channel) {
        return log_e[static_cast<std::size_t>(frame) * n_channels + channel];
    }
};

// Per-frame, per-channel log(energy + eps) of the gammatone-filtered clip
// for every frame (framing as in pop_detect).
std::vector<double> log_energy_matrix(const AudioClip& clip, const GammatoneBank& bank,
                                      const PopDetectParams& frames,
                                      double energy_floor);

// The window of one segment padded by flank_ms of background on each side,
// clamped to clip bounds.
SegmentWindow segment_log_energies(const AudioClip& clip, const PopSegment& seg,
                                   const GammatoneBank& bank,
                                   const PopDetectParams& frames,
                                   const FeatureParams& fp = {});

// (m, delta1, delta2) of a single segment window; the seam the clip-level
// features aggregate over.
FeatureVector segment_features(const SegmentWindow& win);

// Clip-level features: per-segment values averaged over all segments.
// Returns nullopt when pops is empty.
std::optional<FeatureVector> extract_features(const AudioClip& clip,
                                              const std::vector<PopSegment>& pops,
                                              const GammatoneBank& bank,
                                              const PopDetectParams& frames,
                                              const FeatureParams& fp = {});

} // namespace popforge
