#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace popforge::flac {

struct Decoded {
    std::vector<std::vector<std::int64_t>> channels; // raw integer samples
    long sample_rate = 0;
    int bits_per_sample = 0;
};

// Decoder for native FLAC streams: CONSTANT, VERBATIM, FIXED and LPC
// subframes, Rice/Rice2 residuals, all stereo decorrelation modes, wasted
// bits. Ogg-encapsulated FLAC is not handled.
Decoded decode_file(const std::filesystem::path& path);
Decoded decode(const std::vector<std::uint8_t>& bytes);

} // namespace popforge::flac
