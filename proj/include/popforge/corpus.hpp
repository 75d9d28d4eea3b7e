#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "popforge/gfcc.hpp"
#include "popforge/label.hpp"
#include "popforge/learner.hpp"
#include "popforge/pop_detect.hpp"

namespace popforge {

// Column layout of a space-separated protocol file. Defaults match the
// ASVspoof 2019 LA protocols (5 columns, file id second, label last).
struct ProtocolSchema {
    int id_col = 1;
    int label_col = 4;
    std::string real_token = "bonafide";
    std::string spoof_token = "spoof";
};

struct Entry {
    std::string source_id;
    Label label = Label::SPOOF;
};

std::vector<Entry> parse_protocol(const std::filesystem::path& path,
                                  const ProtocolSchema& schema = {});

struct SplitSpec {
    enum class Mode { FULL, EVEN };
    Mode mode = Mode::FULL;
    std::size_t per_class = 0; // EVEN only
    std::uint64_t seed = 0;
};

// FULL: all entries in seeded shuffled order. EVEN: per_class of each label
// sampled without replacement, then shuffled. Selection keys on sorted
// source_id so the result does not depend on input enumeration order.
std::vector<Entry> build_split(const std::vector<Entry>& entries, const SplitSpec& spec);

struct ExtractParams {
    PopDetectParams pop;
    int n_channels = 32;
    double f_lo = 50.0;
    double f_hi = 8000.0;
    FeatureParams feat;
    int target_sr = 16000;
    int jobs = 1;
};

struct CorpusFeatures {
    Matrix features; // rows [gfcc_mean, delta1, delta2], split order preserved
    std::vector<Label> labels;
    std::vector<std::string> ids;
    std::vector<std::string> skipped_missing; // files not found
    std::vector<std::string> skipped_absent;  // no pops / not decodable
};

// Iterate the split in order, loading <root>/<id>.flac or .wav (overlay
// first when given), detect pops, extract features. Missing files and
// ABSENT features are skipped, never fatal.
CorpusFeatures extract_corpus_features(const std::filesystem::path& audio_root,
                                       const std::vector<Entry>& split,
                                       const ExtractParams& params,
                                       const std::filesystem::path* overlay_root = nullptr);

void write_feature_csv(const std::filesystem::path& csv_path, const CorpusFeatures& fx);
CorpusFeatures read_feature_csv(const std::filesystem::path& csv_path);

// Generation knobs for the synthetic desk-scale corpus. REAL clips carry a
// colored-noise bed plus sharp sub-100 Hz bursts; SPOOF clips get the same
// construction with smoothed burst onsets, then a high-pass, mimicking how
// replay playback mutes pop noise.
struct SynthTuning {
    double min_duration_s = 1.8;
    double max_duration_s = 2.4;
    double bed_rms = 0.0316;            // -30 dBFS
    double bed_color_pole = 0.95;       // one-pole lowpass on the noise bed
    int min_bursts = 2;
    int max_bursts = 4;
    double burst_f_lo = 55.0;
    double burst_f_hi = 95.0;
    double burst_amp_lo = 0.22;
    double burst_amp_hi = 0.32;
    double burst_attack_ms = 3.0;       // < 5 ms onset
    double burst_decay_ms_lo = 40.0;
    double burst_decay_ms_hi = 70.0;
    double spoof_highpass_hz = 150.0;
    int spoof_highpass_order = 4;
    double spoof_attack_ms = 25.0;      // smoothed onset
    double spoof_amp_scale = 0.45;
    double spoof_decay_stretch = 1.6;
};

struct SynthSpec {
    int n_real = 10;
    int n_spoof = 40;
    std::uint64_t seed = 0;
    int sample_rate = 16000;
    SynthTuning tuning;
};

// Writes <out_dir>/<id>.wav for every clip plus protocol.txt and
// manifest.csv; returns the entries in protocol order. Every REAL clip is
// verified to yield at least one pop under default detector parameters.
std::vector<Entry> generate_synthetic_corpus(const std::filesystem::path& out_dir,
                                             const SynthSpec& spec);

} // namespace popforge
