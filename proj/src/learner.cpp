#include "popforge/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "popforge/rng.hpp"
#include "popforge/svm.hpp"

namespace popforge {

namespace {

int to_pm1(Label l) { return l == Label::REAL ? +1 : -1; }

std::vector<double> scale_row(const FeatureScaling& s, const std::vector<double>& x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (std::size_t f = 0; f < x.size(); ++f)
        if (s.keep[f]) out.push_back((x[f] - s.mean[f]) / s.std[f]);
    return out;
}

FeatureScaling fit_scaling(const Matrix& x) {
    const std::size_t n = x.size();
    const std::size_t d = x[0].size();
    FeatureScaling s;
    s.mean.assign(d, 0.0);
    s.std.assign(d, 0.0);
    s.keep.assign(d, true);
    for (const auto& row : x)
        for (std::size_t f = 0; f < d; ++f) s.mean[f] += row[f];
    for (std::size_t f = 0; f < d; ++f) s.mean[f] /= static_cast<double>(n);
    for (const auto& row : x)
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = row[f] - s.mean[f];
            s.std[f] += diff * diff;
        }
    for (std::size_t f = 0; f < d; ++f) {
        s.std[f] = std::sqrt(s.std[f] / static_cast<double>(n));
        if (s.std[f] <= 0.0) {
            s.keep[f] = false;
            std::fprintf(stderr,
                         "[learner] warning: feature %zu has zero variance; dropped\n", f);
        }
    }
    return s;
}

// Stratified fold ids: per class, a seeded shuffle dealt round-robin.
std::vector<int> stratified_folds(const std::vector<Label>& y, int folds, std::uint64_t seed) {
    std::vector<int> fold_of(y.size(), 0);
    Rng rng(seed);
    for (Label cls : {Label::REAL, Label::SPOOF}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold_of[idx[i]] = static_cast<int>(i % folds);
    }
    return fold_of;
}

struct FittedSvm {
    Matrix sv;
    std::vector<double> dual;
    double bias = 0.0;
};

// One weighted C-SVC fit on already standardized rows.
FittedSvm fit_svm(const Matrix& x, const std::vector<Label>& y, double C, double gamma) {
    const std::size_t n = x.size();
    std::size_t n_real = 0;
    for (Label l : y)
        if (l == Label::REAL) ++n_real;
    const std::size_t n_spoof = n - n_real;
    const double w_real = static_cast<double>(n) / (2.0 * static_cast<double>(n_real));
    const double w_spoof = static_cast<double>(n) / (2.0 * static_cast<double>(n_spoof));

    std::vector<int> ypm(n);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        ypm[i] = to_pm1(y[i]);
        c[i] = C * (y[i] == Label::REAL ? w_real : w_spoof);
    }

    svm::RbfGram gram(x, gamma);
    const svm::Solution sol = svm::smo_solve(gram, ypm, c);

    FittedSvm fit;
    fit.bias = -sol.rho;
    for (std::size_t i = 0; i < n; ++i)
        if (sol.alpha[i] > 0.0) {
            fit.sv.push_back(x[i]);
            fit.dual.push_back(sol.alpha[i] * ypm[i]);
        }
    return fit;
}

double svm_decision(const FittedSvm& fit, double gamma, const std::vector<double>& x) {
    double d = fit.bias;
    for (std::size_t i = 0; i < fit.sv.size(); ++i) {
        double sq = 0.0;
        for (std::size_t f = 0; f < x.size(); ++f) {
            const double diff = fit.sv[i][f] - x[f];
            sq += diff * diff;
        }
        d += fit.dual[i] * std::exp(-gamma * sq);
    }
    return d;
}

double balanced_accuracy_sign(const std::vector<double>& decisions,
                              const std::vector<Label>& y) {
    long tp = 0, tn = 0, np = 0, nn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == Label::REAL) {
            ++np;
            if (decisions[i] >= 0.0) ++tp;
        } else {
            ++nn;
            if (decisions[i] < 0.0) ++tn;
        }
    }
    double acc = 0.0;
    int parts = 0;
    if (np > 0) {
        acc += static_cast<double>(tp) / np;
        ++parts;
    }
    if (nn > 0) {
        acc += static_cast<double>(tn) / nn;
        ++parts;
    }
    return parts > 0 ? acc / parts : 0.0;
}

// Sigmoid fit on decision values (Platt scaling, Newton with backtracking).
PlattCalibration fit_platt(const std::vector<double>& deci, const std::vector<Label>& y) {
    const std::size_t l = deci.size();
    double prior1 = 0.0, prior0 = 0.0;
    for (Label t : y) (t == Label::REAL ? prior1 : prior0) += 1.0;

    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(l);
    for (std::size_t i = 0; i < l; ++i) t[i] = y[i] == Label::REAL ? hi : lo;

    const int max_iter = 100;
    const double min_step = 1e-10;
    const double sigma = 1e-12;
    const double eps = 1e-5;

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

    auto objective = [&](double A, double B) {
        double fval = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
            const double fApB = deci[i] * A + B;
            if (fApB >= 0)
                fval += t[i] * fApB + std::log1p(std::exp(-fApB));
            else
                fval += (t[i] - 1.0) * fApB + std::log1p(std::exp(fApB));
        }
        return fval;
    };

    double fval = objective(a, b);
    for (int it = 0; it < max_iter; ++it) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
            const double fApB = deci[i] * a + b;
            double p, q;
            if (fApB >= 0) {
                p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
                q = 1.0 / (1.0 + std::exp(-fApB));
            } else {
                p = 1.0 / (1.0 + std::exp(fApB));
                q = std::exp(fApB) / (1.0 + std::exp(fApB));
            }
            const double d2 = p * q;
            h11 += deci[i] * deci[i] * d2;
            h22 += d2;
            h21 += deci[i] * d2;
            const double d1 = t[i] - p;
            g1 += deci[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < eps && std::abs(g2) < eps) break;

        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;

        double step = 1.0;
        while (step >= min_step) {
            const double new_a = a + step * dA;
            const double new_b = b + step * dB;
            const double new_f = objective(new_a, new_b);
            if (new_f < fval + 1e-4 * step * gd) {
                a = new_a;
                b = new_b;
                fval = new_f;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }

    // Contract: p(REAL) must rise with the decision value. A non-negative
    // slope only arises from degenerate decision/label sets.
    if (a >= 0.0) a = -1e-12;
    return PlattCalibration{a, b};
}

} // namespace

std::pair<Matrix, std::vector<Label>> smote(const Matrix& features,
                                            const std::vector<Label>& labels, int k,
                                            std::uint64_t seed) {
    std::vector<std::size_t> real_idx, spoof_idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == Label::REAL ? real_idx : spoof_idx).push_back(i);
    if (real_idx.empty() || spoof_idx.empty())
        throw SingleClass("smote: both classes must be present");

    Matrix out_x = features;
    std::vector<Label> out_y = labels;
    if (real_idx.size() == spoof_idx.size()) return {out_x, out_y};

    const bool real_minor = real_idx.size() < spoof_idx.size();
    const std::vector<std::size_t>& minority = real_minor ? real_idx : spoof_idx;
    const Label minority_label = real_minor ? Label::REAL : Label::SPOOF;
    const std::size_t need =
        (real_minor ? spoof_idx.size() - real_idx.size() : real_idx.size() - spoof_idx.size());

    if (minority.size() <= static_cast<std::size_t>(k))
        throw TooFewMinoritySamples("smote: minority count must exceed k");

    // k nearest minority neighbors per minority row; ties broken by index.
    const std::size_t m = minority.size();
    std::vector<std::vector<std::size_t>> nn(m);
    for (std::size_t a = 0; a < m; ++a) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(m - 1);
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            double sq = 0.0;
            const auto& xa = features[minority[a]];
            const auto& xb = features[minority[b]];
            for (std::size_t f = 0; f < xa.size(); ++f) {
                const double diff = xa[f] - xb[f];
                sq += diff * diff;
            }
            dist.emplace_back(sq, b);
        }
        std::sort(dist.begin(), dist.end());
        for (int q = 0; q < k; ++q) nn[a].push_back(dist[q].second);
    }

    Rng rng(seed);
    for (std::size_t s = 0; s < need; ++s) {
        const std::size_t base = s % m;
        const std::size_t neighbor = nn[base][rng.below(static_cast<std::size_t>(k))];
        const double u = rng.next_unit();
        const auto& xa = features[minority[base]];
        const auto& xb = features[minority[neighbor]];
        std::vector<double> row(xa.size());
        for (std::size_t f = 0; f < xa.size(); ++f) row[f] = xa[f] + u * (xb[f] - xa[f]);
        out_x.push_back(std::move(row));
        out_y.push_back(minority_label);
    }
    return {out_x, out_y};
}

TrainedDetector train(const Matrix& features, const std::vector<Label>& labels,
                      const GridSpec& grid) {
    if (features.empty() || features.size() != labels.size())
        throw DegenerateData("train: empty data or label length mismatch");
    std::size_t n_real = 0;
    for (Label l : labels)
        if (l == Label::REAL) ++n_real;
    const std::size_t n_spoof = labels.size() - n_real;
    if (n_real == 0 || n_spoof == 0) throw DegenerateData("train: single-class data");
    if (n_real < static_cast<std::size_t>(grid.folds) ||
        n_spoof < static_cast<std::size_t>(grid.folds))
        throw DegenerateData("train: need at least `folds` examples per class");
    for (const auto& row : features)
        for (double v : row)
            if (!std::isfinite(v)) throw DegenerateData("train: non-finite feature value");

    TrainedDetector model;
    model.seed = grid.seed;
    model.scaling = fit_scaling(features);
    std::size_t kept = 0;
    for (bool b : model.scaling.keep) kept += b ? 1 : 0;
    if (kept == 0) throw DegenerateData("train: all features have zero variance");

    Matrix x(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        x[i] = scale_row(model.scaling, features[i]);

    std::vector<double> gammas = grid.gamma_values;
    if (gammas.empty()) {
        gammas = {0.01, 0.1, 1.0 / static_cast<double>(kept), 1.0};
        std::sort(gammas.begin(), gammas.end());
    }

    const std::vector<int> fold_of = stratified_folds(labels, grid.folds, grid.seed);

    // Grid search: gamma outer so each fold's Gram layout is reused in
    // spirit; ties keep the first candidate encountered.
    double best_score = -1.0;
    double best_c = grid.C_values.front();
    double best_gamma = gammas.front();
    for (double gamma : gammas) {
        for (double C : grid.C_values) {
            double score_sum = 0.0;
            for (int f = 0; f < grid.folds; ++f) {
                Matrix xt;
                std::vector<Label> yt;
                std::vector<std::size_t> val_idx;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (fold_of[i] == f) {
                        val_idx.push_back(i);
                    } else {
                        xt.push_back(x[i]);
                        yt.push_back(labels[i]);
                    }
                }
                const FittedSvm fit = fit_svm(xt, yt, C, gamma);
                std::vector<double> dec(val_idx.size());
                std::vector<Label> yv(val_idx.size());
                for (std::size_t v = 0; v < val_idx.size(); ++v) {
                    dec[v] = svm_decision(fit, gamma, x[val_idx[v]]);
                    yv[v] = labels[val_idx[v]];
                }
                score_sum += balanced_accuracy_sign(dec, yv);
            }
            const double score = score_sum / grid.folds;
            if (score > best_score) {
                best_score = score;
                best_c = C;
                best_gamma = gamma;
            }
        }
    }

    // Out-of-fold decision values with the chosen cell feed the sigmoid, so
    // the calibration never sees its own training decisions.
    std::vector<double> oof_dec(x.size(), 0.0);
    for (int f = 0; f < grid.folds; ++f) {
        Matrix xt;
        std::vector<Label> yt;
        std::vector<std::size_t> val_idx;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (fold_of[i] == f) {
                val_idx.push_back(i);
            } else {
                xt.push_back(x[i]);
                yt.push_back(labels[i]);
            }
        }
        const FittedSvm fit = fit_svm(xt, yt, best_c, best_gamma);
        for (std::size_t v : val_idx) oof_dec[v] = svm_decision(fit, best_gamma, x[v]);
    }
    model.platt = fit_platt(oof_dec, labels);

    const FittedSvm final_fit = fit_svm(x, labels, best_c, best_gamma);
    model.support_vectors = final_fit.sv;
    model.dual_coef = final_fit.dual;
    model.bias = final_fit.bias;
    model.C = best_c;
    model.gamma = best_gamma;
    model.cv_score = best_score;
    model.class_weight_real =
        static_cast<double>(labels.size()) / (2.0 * static_cast<double>(n_real));
    model.class_weight_spoof =
        static_cast<double>(labels.size()) / (2.0 * static_cast<double>(n_spoof));
    model.trained = true;
    return model;
}

double decision_value(const TrainedDetector& model, const std::vector<double>& x) {
    if (!model.trained) throw UntrainedModel("decision_value: model not trained");
    const std::vector<double> xs = scale_row(model.scaling, x);
    double d = model.bias;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
        double sq = 0.0;
        for (std::size_t f = 0; f < xs.size(); ++f) {
            const double diff = model.support_vectors[i][f] - xs[f];
            sq += diff * diff;
        }
        d += model.dual_coef[i] * std::exp(-model.gamma * sq);
    }
    return d;
}

double predict_proba(const TrainedDetector& model, const std::vector<double>& x) {
    const double d = decision_value(model, x);
    const double fApB = model.platt.slope * d + model.platt.intercept;
    if (fApB >= 0) return std::exp(-fApB) / (1.0 + std::exp(-fApB));
    return 1.0 / (1.0 + std::exp(fApB));
}

void save_model(const std::filesystem::path& path, const TrainedDetector& model) {
    nlohmann::ordered_json j;
    j["format"] = "popforge-model";
    j["version"] = 1;
    j["scaling"]["mean"] = model.scaling.mean;
    j["scaling"]["std"] = model.scaling.std;
    j["scaling"]["keep"] = model.scaling.keep;
    j["kernel"] = "rbf";
    j["gamma"] = model.gamma;
    j["C"] = model.C;
    j["support_vectors"] = model.support_vectors;
    j["dual_coef"] = model.dual_coef;
    j["bias"] = model.bias;
    j["platt"] = {{"slope", model.platt.slope}, {"intercept", model.platt.intercept}};
    j["class_weights"] = {{"real", model.class_weight_real},
                          {"spoof", model.class_weight_spoof}};
    j["cv_score"] = model.cv_score;
    j["seed"] = model.seed;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

TrainedDetector load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    TrainedDetector m;
    m.scaling.mean = j.at("scaling").at("mean").get<std::vector<double>>();
    m.scaling.std = j.at("scaling").at("std").get<std::vector<double>>();
    m.scaling.keep = j.at("scaling").at("keep").get<std::vector<bool>>();
    m.gamma = j.at("gamma").get<double>();
    m.C = j.at("C").get<double>();
    m.support_vectors = j.at("support_vectors").get<Matrix>();
    m.dual_coef = j.at("dual_coef").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.platt.slope = j.at("platt").at("slope").get<double>();
    m.platt.intercept = j.at("platt").at("intercept").get<double>();
    m.class_weight_real = j.at("class_weights").at("real").get<double>();
    m.class_weight_spoof = j.at("class_weights").at("spoof").get<double>();
    m.cv_score = j.at("cv_score").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.trained = true;
    return m;
}

} // namespace popforge
