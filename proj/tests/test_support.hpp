// Shared helpers for the test suites. The oracles here are written from
// first principles on purpose: they must stay independent of the library
// code paths they check.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testsup {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Naive O(n^2)-ish DFT peak via per-bin evaluation over a zero-padded grid.
// Independent of popforge::dsp::fft.
inline double dft_peak_hz(const std::vector<double>& x, double sample_rate,
                          double f_lo = 1.0, double f_hi = 0.0, double step_hz = 0.25) {
    if (f_hi <= 0.0) f_hi = sample_rate / 2.0;
    double best_f = f_lo, best_mag = -1.0;
    for (double f = f_lo; f <= f_hi; f += step_hz) {
        double re = 0.0, im = 0.0;
        const double w = 2.0 * kPi * f / sample_rate;
        for (std::size_t i = 0; i < x.size(); ++i) {
            re += x[i] * std::cos(w * static_cast<double>(i));
            im -= x[i] * std::sin(w * static_cast<double>(i));
        }
        const double mag = re * re + im * im;
        if (mag > best_mag) {
            best_mag = mag;
            best_f = f;
        }
    }
    return best_f;
}

// Single-bin windowed DFT energy, used to recompute low-band energies.
inline double windowed_bin_energy(const std::vector<double>& frame,
                                  const std::vector<double>& window, int k) {
    const std::size_t n = frame.size();
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = 2.0 * kPi * k * static_cast<double>(j) / static_cast<double>(n);
        re += frame[j] * window[j] * std::cos(a);
        im -= frame[j] * window[j] * std::sin(a);
    }
    return re * re + im * im;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("popforge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<double> sine(double freq_hz, double amp, int sample_rate, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * kPi * freq_hz * i / sample_rate);
    return x;
}

} // namespace testsup
