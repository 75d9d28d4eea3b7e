#include "popforge/gfcc.hpp"

#include <cmath>

#include "popforge/errors.hpp"

namespace popforge {

double erb_rate(double hz) { return 21.4 * std::log10(4.37e-3 * hz + 1.0); }

double erb_rate_inverse(double rate) {
    return (std::pow(10.0, rate / 21.4) - 1.0) / 4.37e-3;
}

double erb_bandwidth_hz(double hz) { return 24.7 * (4.37e-3 * hz + 1.0); }

std::vector<double> GammatoneBank::center_hz() const {
    std::vector<double> c(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i) c[i] = channels[i].center_hz;
    return c;
}

namespace {

// 4th-order gammatone as four second-order sections sharing one pole pair
// (Slaney's all-pole ERB filter design), normalized to unit gain at cf.
GammatoneChannel design_channel(double cf, int sample_rate) {
    const double T = 1.0 / sample_rate;
    const double b = 1.019 * dsp::kTwoPi * erb_bandwidth_hz(cf);
    const double w = dsp::kTwoPi * cf * T;
    const double exp_bt = std::exp(-b * T);
    const double cos_w = std::cos(w);
    const double sin_w = std::sin(w);

    const double a1 = -2.0 * cos_w * exp_bt;       // shared denominator
    const double a2 = exp_bt * exp_bt;

    const double sqrt_plus = std::sqrt(3.0 + std::pow(2.0, 1.5));
    const double sqrt_minus = std::sqrt(3.0 - std::pow(2.0, 1.5));
    const double num1[4] = {
        -(2.0 * T * cos_w + 2.0 * sqrt_plus * T * sin_w) * exp_bt / 2.0,
        -(2.0 * T * cos_w - 2.0 * sqrt_plus * T * sin_w) * exp_bt / 2.0,
        -(2.0 * T * cos_w + 2.0 * sqrt_minus * T * sin_w) * exp_bt / 2.0,
        -(2.0 * T * cos_w - 2.0 * sqrt_minus * T * sin_w) * exp_bt / 2.0,
    };

    GammatoneChannel ch;
    ch.center_hz = cf;
    for (int k = 0; k < 4; ++k) {
        ch.stages[k].b0 = T;
        ch.stages[k].b1 = num1[k];
        ch.stages[k].b2 = 0.0;
        ch.stages[k].a1 = a1;
        ch.stages[k].a2 = a2;
    }

    double gain = 1.0;
    for (int k = 0; k < 4; ++k) gain *= std::abs(ch.stages[k].response(w));
    ch.stages[0].b0 /= gain;
    ch.stages[0].b1 /= gain;
    return ch;
}

} // namespace

GammatoneBank make_bank(int sample_rate, int n_channels, double f_lo, double f_hi) {
    if (!(f_lo > 0.0) || !(f_lo < f_hi) || !(f_hi <= sample_rate / 2.0))
        throw InvalidBand("make_bank: need 0 < f_lo < f_hi <= sample_rate/2");
    if (n_channels < 2) throw InvalidBand("make_bank: need at least 2 channels");

    GammatoneBank bank;
    bank.sample_rate = sample_rate;
    const double r_lo = erb_rate(f_lo);
    const double r_hi = erb_rate(f_hi);
    for (int i = 0; i < n_channels; ++i) {
        double cf;
        if (i == 0)
            cf = f_lo;
        else if (i == n_channels - 1)
            cf = f_hi;
        else
            cf = erb_rate_inverse(r_lo + (r_hi - r_lo) * i / (n_channels - 1));
        bank.channels.push_back(design_channel(cf, sample_rate));
    }
    return bank;
}

std::vector<double> filter_channel(const std::vector<double>& x, const GammatoneChannel& ch) {
    std::vector<double> y = x;
    for (const dsp::Biquad& s : ch.stages) y = s.filter(y);
    return y;
}

std::vector<double> log_energy_matrix(const AudioClip& clip, const GammatoneBank& bank,
                                      const PopDetectParams& frames, double energy_floor) {
    const int n_frames = frame_count(clip.samples.size(), frames);
    if (n_frames <= 0) throw ClipTooShort("log_energy_matrix: clip shorter than one frame");
    const int n_ch = bank.n_channels();

    std::vector<double> m(static_cast<std::size_t>(n_frames) * n_ch);
    for (int c = 0; c < n_ch; ++c) {
        const std::vector<double> filtered = filter_channel(clip.samples, bank.channels[c]);
        for (int f = 0; f < n_frames; ++f) {
            const std::size_t off = static_cast<std::size_t>(f) * frames.hop;
            double e = 0.0;
            for (int j = 0; j < frames.frame_len; ++j) {
                const double v = filtered[off + j];
                e += v * v;
            }
            m[static_cast<std::size_t>(f) * n_ch + c] = std::log(e + energy_floor);
        }
    }
    return m;
}

namespace {

SegmentWindow slice_window(const std::vector<double>& matrix, int n_frames, int n_ch,
                           const PopSegment& seg, const PopDetectParams& frames,
                           const FeatureParams& fp, int sample_rate) {
    const int flank_frames = std::max(
        1, static_cast<int>(std::lround(fp.flank_ms / 1000.0 * sample_rate / frames.hop)));
    const int first = std::max(0, seg.start_frame - flank_frames);
    const int last = std::min(n_frames - 1, seg.end_frame + flank_frames);
    if (first > last || seg.start_frame > seg.end_frame || seg.start_frame >= n_frames ||
        seg.end_frame < 0)
        throw EmptyWindow("segment window is empty");

    SegmentWindow win;
    win.n_frames = last - first + 1;
    win.n_channels = n_ch;
    win.seg_first_row = std::max(seg.start_frame, first) - first;
    win.seg_last_row = std::min(seg.end_frame, last) - first;
    win.log_e.assign(matrix.begin() + static_cast<std::size_t>(first) * n_ch,
                     matrix.begin() + static_cast<std::size_t>(last + 1) * n_ch);
    return win;
}

} // namespace

SegmentWindow segment_log_energies(const AudioClip& clip, const PopSegment& seg,
                                   const GammatoneBank& bank, const PopDetectParams& frames,
                                   const FeatureParams& fp) {
    const int n_frames = frame_count(clip.samples.size(), frames);
    const std::vector<double> matrix = log_energy_matrix(clip, bank, frames, fp.energy_floor);
    return slice_window(matrix, n_frames, bank.n_channels(), seg, frames, fp,
                        clip.sample_rate);
}

FeatureVector segment_features(const SegmentWindow& win) {
    double seg_sum = 0.0;
    long seg_n = 0;
    double flank_sum = 0.0;
    long flank_n = 0;
    for (int f = 0; f < win.n_frames; ++f) {
        const bool in_seg = f >= win.seg_first_row && f <= win.seg_last_row;
        for (int c = 0; c < win.n_channels; ++c) {
            if (in_seg) {
                seg_sum += win.at(f, c);
                ++seg_n;
            } else {
                flank_sum += win.at(f, c);
                ++flank_n;
            }
        }
    }

    FeatureVector fv;
    fv.gfcc_mean = seg_n > 0 ? seg_sum / seg_n : 0.0;
    // No flank frames means no background evidence; the boundary change is 0.
    fv.delta1 = flank_n > 0 ? fv.gfcc_mean - flank_sum / flank_n : 0.0;

    double diff_sum = 0.0;
    long diff_n = 0;
    for (int f = 1; f < win.n_frames; ++f)
        for (int c = 0; c < win.n_channels; ++c) {
            diff_sum += std::abs(win.at(f, c) - win.at(f - 1, c));
            ++diff_n;
        }
    fv.delta2 = diff_n > 0 ? diff_sum / diff_n : 0.0;
    return fv;
}

std::optional<FeatureVector> extract_features(const AudioClip& clip,
                                              const std::vector<PopSegment>& pops,
                                              const GammatoneBank& bank,
                                              const PopDetectParams& frames,
                                              const FeatureParams& fp) {
    if (pops.empty()) return std::nullopt;

    const int n_frames = frame_count(clip.samples.size(), frames);
    const std::vector<double> matrix = log_energy_matrix(clip, bank, frames, fp.energy_floor);

    FeatureVector acc;
    for (const PopSegment& seg : pops) {
        const SegmentWindow win =
            slice_window(matrix, n_frames, bank.n_channels(), seg, frames, fp,
                         clip.sample_rate);
        const FeatureVector s = segment_features(win);
        acc.gfcc_mean += s.gfcc_mean;
        acc.delta1 += s.delta1;
        acc.delta2 += s.delta2;
    }
    const double n = static_cast<double>(pops.size());
    acc.gfcc_mean /= n;
    acc.delta1 /= n;
    acc.delta2 /= n;
    return acc;
}

} // namespace popforge
