#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "popforge/label.hpp"

namespace popforge {

using Matrix = std::vector<std::vector<double>>; // row-major feature rows

struct GridSpec {
    std::vector<double> C_values{0.1, 1.0, 10.0, 100.0};
    std::vector<double> gamma_values; // empty -> {0.01, 0.1, 1/d, 1}
    int folds = 5;
    std::uint64_t seed = 0;
};

struct FeatureScaling {
    std::vector<double> mean; // per input dimension
    std::vector<double> std;
    std::vector<bool> keep;   // false for dropped zero-variance dimensions
};

struct PlattCalibration {
    double slope = 0.0;     // < 0 once fitted: p(REAL) rises with decision value
    double intercept = 0.0;
};

struct TrainedDetector {
    bool trained = false;
    FeatureScaling scaling;
    Matrix support_vectors;        // standardized, kept dims only
    std::vector<double> dual_coef; // alpha_i * y_i, y = +1 for REAL
    double bias = 0.0;
    double C = 0.0;
    double gamma = 0.0;
    double cv_score = 0.0;         // balanced accuracy of the chosen grid cell
    PlattCalibration platt;
    double class_weight_real = 1.0;
    double class_weight_spoof = 1.0;
    std::uint64_t seed = 0;
};

// Oversample the minority class to parity: each synthetic row lies uniformly
// on the segment between a minority row and one of its k nearest minority
// neighbors. Originals are retained unchanged, synthetics appended.
std::pair<Matrix, std::vector<Label>> smote(const Matrix& features,
                                            const std::vector<Label>& labels, int k,
                                            std::uint64_t seed);

// Standardize, grid-search (C, gamma) by stratified k-fold balanced accuracy
// with balanced class weights, refit on all data, and fit a Platt sigmoid on
// out-of-fold decision values.
TrainedDetector train(const Matrix& features, const std::vector<Label>& labels,
                      const GridSpec& grid);

// Signed decision value; positive side is REAL.
double decision_value(const TrainedDetector& model, const std::vector<double>& x);

// Calibrated probability of REAL in [0, 1].
double predict_proba(const TrainedDetector& model, const std::vector<double>& x);

void save_model(const std::filesystem::path& path, const TrainedDetector& model);
TrainedDetector load_model(const std::filesystem::path& path);

} // namespace popforge
