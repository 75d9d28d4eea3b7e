#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace popforge::dsp {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// Second-order IIR section, direct form II transposed.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0; // feedforward
    double a1 = 0.0, a2 = 0.0;           // feedback (a0 normalized to 1)

    std::vector<double> filter(const std::vector<double>& x) const;
    // Complex gain at normalized angular frequency w (rad/sample).
    std::complex<double> response(double w) const;
};

std::vector<double> filter_cascade(const std::vector<double>& x,
                                   const std::vector<Biquad>& sections);

// Butterworth high-pass as cascaded biquads; order must be even.
std::vector<Biquad> butterworth_highpass(double cutoff_hz, double sample_rate, int order);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

// Magnitude spectrum of a real signal zero-padded to the next power of two
// (at least min_size). Returns |X_k| for k = 0..N/2 and sets bin_hz.
std::vector<double> magnitude_spectrum(const std::vector<double>& x, double sample_rate,
                                       double& bin_hz, std::size_t min_size = 0);

// Frequency (Hz) of the largest magnitude bin above the DC bin.
double dominant_frequency_hz(const std::vector<double>& x, double sample_rate);

} // namespace popforge::dsp
