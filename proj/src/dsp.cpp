#include "popforge/dsp.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace popforge::dsp {

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

std::vector<double> Biquad::filter(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double in = x[n];
        const double out = b0 * in + s1;
        s1 = b1 * in - a1 * out + s2;
        s2 = b2 * in - a2 * out;
        y[n] = out;
    }
    return y;
}

std::complex<double> Biquad::response(double w) const {
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

std::vector<double> filter_cascade(const std::vector<double>& x,
                                   const std::vector<Biquad>& sections) {
    std::vector<double> y = x;
    for (const Biquad& s : sections) y = s.filter(y);
    return y;
}

std::vector<Biquad> butterworth_highpass(double cutoff_hz, double sample_rate, int order) {
    if (order <= 0 || order % 2 != 0)
        throw std::invalid_argument("butterworth_highpass: order must be positive and even");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate / 2.0))
        throw std::invalid_argument("butterworth_highpass: cutoff out of range");

    // Bilinear transform of the analog Butterworth prototype, one biquad per
    // conjugate pole pair.
    const double warped = std::tan(kPi * cutoff_hz / sample_rate);
    std::vector<Biquad> sections;
    const int pairs = order / 2;
    for (int k = 0; k < pairs; ++k) {
        const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order) + kPi / 2.0;
        const double q = -1.0 / (2.0 * std::cos(theta)); // section Q
        const double kw = warped;
        const double norm = 1.0 + kw / q + kw * kw;
        Biquad s;
        s.b0 = 1.0 / norm;
        s.b1 = -2.0 / norm;
        s.b2 = 1.0 / norm;
        s.a1 = 2.0 * (kw * kw - 1.0) / norm;
        s.a2 = (1.0 - kw / q + kw * kw) / norm;
        sections.push_back(s);
    }
    return sections;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    assert(n != 0 && (n & (n - 1)) == 0);
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

std::vector<double> magnitude_spectrum(const std::vector<double>& x, double sample_rate,
                                       double& bin_hz, std::size_t min_size) {
    std::size_t n = 1;
    while (n < x.size() || n < min_size) n <<= 1;
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
    fft(buf);
    std::vector<double> mag(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) mag[k] = std::abs(buf[k]);
    bin_hz = sample_rate / static_cast<double>(n);
    return mag;
}

double dominant_frequency_hz(const std::vector<double>& x, double sample_rate) {
    double bin_hz = 0.0;
    const std::vector<double> mag = magnitude_spectrum(x, sample_rate, bin_hz);
    std::size_t best = 1;
    for (std::size_t k = 2; k < mag.size(); ++k)
        if (mag[k] > mag[best]) best = k;
    return static_cast<double>(best) * bin_hz;
}

} // namespace popforge::dsp
