#include "popforge/pop_detect.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "popforge/dsp.hpp"
#include "popforge/errors.hpp"

namespace popforge {

std::vector<double> lowband_energy(const AudioClip& clip, const PopDetectParams& p) {
    const int n_frames = frame_count(clip.samples.size(), p);
    if (n_frames <= 0)
        throw ClipTooShort("lowband_energy: clip shorter than one frame");

    // Only the bins at or below cutoff_hz are needed, so evaluate those DFT
    // bins directly instead of a full transform. Bin k is centered at
    // k * sr / frame_len.
    const int n_bins =
        static_cast<int>(std::floor(p.cutoff_hz * p.frame_len / clip.sample_rate)) + 1;
    const std::vector<double> window = dsp::hann_window(p.frame_len);

    std::vector<double> cos_t(static_cast<std::size_t>(n_bins) * p.frame_len);
    std::vector<double> sin_t(static_cast<std::size_t>(n_bins) * p.frame_len);
    for (int k = 0; k < n_bins; ++k)
        for (int j = 0; j < p.frame_len; ++j) {
            const double a = dsp::kTwoPi * k * j / p.frame_len;
            cos_t[static_cast<std::size_t>(k) * p.frame_len + j] = std::cos(a);
            sin_t[static_cast<std::size_t>(k) * p.frame_len + j] = std::sin(a);
        }

    std::vector<double> energies(n_frames);
    std::vector<double> frame(p.frame_len);
    for (int f = 0; f < n_frames; ++f) {
        const std::size_t off = static_cast<std::size_t>(f) * p.hop;
        for (int j = 0; j < p.frame_len; ++j)
            frame[j] = clip.samples[off + j] * window[j];
        double e = 0.0;
        for (int k = 0; k < n_bins; ++k) {
            const double* ct = &cos_t[static_cast<std::size_t>(k) * p.frame_len];
            const double* st = &sin_t[static_cast<std::size_t>(k) * p.frame_len];
            double re = 0.0, im = 0.0;
            for (int j = 0; j < p.frame_len; ++j) {
                re += frame[j] * ct[j];
                im -= frame[j] * st[j];
            }
            e += re * re + im * im;
        }
        energies[f] = e;
    }
    return energies;
}

std::vector<PopSegment> detect_pops(const std::vector<double>& energies,
                                    const PopDetectParams& p, int sample_rate) {
    std::vector<PopSegment> segments;
    if (energies.empty()) return segments;

    const double n = static_cast<double>(energies.size());
    double mu = 0.0;
    for (double e : energies) mu += e;
    mu /= n;
    double var = 0.0;
    for (double e : energies) var += (e - mu) * (e - mu);
    var /= n;
    const double sigma = std::sqrt(var);
    if (sigma == 0.0) return segments; // silence or constant energy

    const double threshold = mu + p.z_threshold * sigma;
    std::vector<std::pair<int, int>> runs;
    int run_start = -1;
    for (int i = 0; i < static_cast<int>(energies.size()); ++i) {
        if (energies[i] > threshold) {
            if (run_start < 0) run_start = i;
        } else if (run_start >= 0) {
            runs.emplace_back(run_start, i - 1);
            run_start = -1;
        }
    }
    if (run_start >= 0) runs.emplace_back(run_start, static_cast<int>(energies.size()) - 1);

    // Merge runs separated by at most merge_gap_frames, then drop short ones.
    std::vector<std::pair<int, int>> merged;
    for (const auto& r : runs) {
        if (!merged.empty() && r.first - merged.back().second - 1 <= p.merge_gap_frames)
            merged.back().second = r.second;
        else
            merged.push_back(r);
    }

    for (const auto& r : merged) {
        if (r.second - r.first + 1 < p.min_len_frames) continue;
        PopSegment seg;
        seg.start_frame = r.first;
        seg.end_frame = r.second;
        seg.start_s = static_cast<double>(r.first) * p.hop / sample_rate;
        seg.end_s = (static_cast<double>(r.second) * p.hop + p.frame_len) / sample_rate;
        seg.peak_energy = 0.0;
        for (int i = r.first; i <= r.second; ++i)
            seg.peak_energy = std::max(seg.peak_energy, energies[i]);
        segments.push_back(seg);
    }
    return segments;
}

std::vector<PopSegment> detect_pops(const AudioClip& clip, const PopDetectParams& p) {
    return detect_pops(lowband_energy(clip, p), p, clip.sample_rate);
}

void dump_energy_csv(const std::filesystem::path& path,
                     const std::vector<double>& energies,
                     const PopDetectParams& p, int sample_rate) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame_index,time_s,lowband_energy\n";
    char line[96];
    for (std::size_t i = 0; i < energies.size(); ++i) {
        const double t = static_cast<double>(i) * p.hop / sample_rate;
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.12g\n", i, t, energies[i]);
        out << line;
    }
}

} // namespace popforge
