#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "popforge/label.hpp"

namespace popforge {

// SPOOF is the positive class throughout: TP counts spoof kept out,
// TN counts real let in.
struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    long total() const { return tp + tn + fp + fn; }
};

struct Rates {
    std::optional<double> tpr, tnr, fpr, fnr;
    std::optional<double> accuracy;
    std::optional<double> asr; // attack success rate == fnr
    std::optional<double> balanced_accuracy() const {
        if (!tpr || !tnr) return std::nullopt;
        return (*tpr + *tnr) / 2.0;
    }
};

// Predicted REAL iff p >= threshold.
ConfusionCounts confusion(const std::vector<Label>& labels, const std::vector<double>& probs,
                          double threshold);

// Rates from counts; zero-denominator rates stay undefined rather than 0.
Rates metrics(const ConfusionCounts& counts);

struct SweepRow {
    double threshold = 0.0;
    ConfusionCounts counts;
    Rates rates;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double best_threshold = 0.0; // argmax balanced accuracy, ties -> lower
};

std::vector<double> default_threshold_grid(); // 0.00 .. 1.00 step 0.01

// extra is added to every row's counts (threshold-independent outcomes, e.g.
// clips force-classified SPOOF because no features existed).
SweepResult threshold_sweep(const std::vector<Label>& labels, const std::vector<double>& probs,
                            const std::vector<double>& grid,
                            const ConfusionCounts& extra = {});

struct Histogram {
    static constexpr int kBins = 50; // over [0, 1]
    std::vector<long> real_bins;
    std::vector<long> spoof_bins;
};

Histogram probability_histogram(const std::vector<Label>& labels,
                                const std::vector<double>& probs);

struct SkippedInfo {
    long absent = 0;  // clips with no extracted features
    long missing = 0; // audio files not found
    const char* forced_label = "spoof";
};

struct EvalReport {
    ConfusionCounts counts; // at `threshold`, forced clips included
    Rates rates;
    double threshold = 0.5;
    std::string threshold_mode = "fixed"; // or "auto"
    double auto_threshold = 0.0;          // sweep argmax, always reported
    SweepResult sweep;
    Histogram histogram;
    SkippedInfo skipped;
    long n_real = 0;
    long n_spoof = 0;
};

// Writes report.json, sweep.csv, hist_real.csv, hist_spoof.csv and hist.svg.
void emit_report(const EvalReport& report, const std::filesystem::path& out_dir);

} // namespace popforge
