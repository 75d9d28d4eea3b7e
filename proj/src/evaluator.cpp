#include "popforge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "popforge/errors.hpp"

namespace popforge {

ConfusionCounts confusion(const std::vector<Label>& labels, const std::vector<double>& probs,
                          double threshold) {
    if (labels.size() != probs.size())
        throw LengthMismatch("confusion: labels and probs differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted_real = probs[i] >= threshold;
        if (labels[i] == Label::SPOOF) {
            if (predicted_real)
                ++c.fn; // spoof accepted as real
            else
                ++c.tp;
        } else {
            if (predicted_real)
                ++c.tn;
            else
                ++c.fp; // real rejected as spoof
        }
    }
    return c;
}

Rates metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw EmptyEval("metrics: no examples");
    Rates r;
    if (c.tp + c.fn > 0) {
        r.tpr = static_cast<double>(c.tp) / (c.tp + c.fn);
        r.fnr = static_cast<double>(c.fn) / (c.tp + c.fn);
        r.asr = r.fnr;
    }
    if (c.tn + c.fp > 0) {
        r.tnr = static_cast<double>(c.tn) / (c.tn + c.fp);
        r.fpr = static_cast<double>(c.fp) / (c.tn + c.fp);
    }
    r.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
    return r;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid(101);
    for (int i = 0; i <= 100; ++i) grid[i] = i / 100.0;
    return grid;
}

SweepResult threshold_sweep(const std::vector<Label>& labels, const std::vector<double>& probs,
                            const std::vector<double>& grid, const ConfusionCounts& extra) {
    if (grid.empty()) throw Error("threshold_sweep: empty grid");
    SweepResult sweep;
    double best_score = -1.0;
    for (double t : grid) {
        SweepRow row;
        row.threshold = t;
        row.counts = confusion(labels, probs, t);
        row.counts.tp += extra.tp;
        row.counts.tn += extra.tn;
        row.counts.fp += extra.fp;
        row.counts.fn += extra.fn;
        row.rates = metrics(row.counts);
        const auto bal = row.rates.balanced_accuracy();
        if (bal && *bal > best_score) { // strict: ties keep the lower threshold
            best_score = *bal;
            sweep.best_threshold = t;
        }
        sweep.rows.push_back(row);
    }
    if (best_score < 0.0) sweep.best_threshold = grid.front();
    return sweep;
}

Histogram probability_histogram(const std::vector<Label>& labels,
                                const std::vector<double>& probs) {
    if (labels.size() != probs.size())
        throw LengthMismatch("probability_histogram: length mismatch");
    Histogram h;
    h.real_bins.assign(Histogram::kBins, 0);
    h.spoof_bins.assign(Histogram::kBins, 0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        int bin = static_cast<int>(probs[i] * Histogram::kBins);
        bin = std::clamp(bin, 0, Histogram::kBins - 1); // p == 1 -> last bin
        (labels[i] == Label::REAL ? h.real_bins : h.spoof_bins)[bin] += 1;
    }
    return h;
}

namespace {

nlohmann::ordered_json rate_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

void write_hist_csv(const std::filesystem::path& path, const std::vector<long>& bins) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "bin_lo,bin_hi,count\n";
    char line[96];
    for (int i = 0; i < Histogram::kBins; ++i) {
        std::snprintf(line, sizeof(line), "%.2f,%.2f,%ld\n",
                      static_cast<double>(i) / Histogram::kBins,
                      static_cast<double>(i + 1) / Histogram::kBins, bins[i]);
        out << line;
    }
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_svg(const std::filesystem::path& path, const EvalReport& r) {
    const int width = 640, height = 360, margin = 40;
    const double plot_w = width - 2.0 * margin;
    const double plot_h = height - 2.0 * margin;

    long max_count = 1;
    for (long v : r.histogram.real_bins) max_count = std::max(max_count, v);
    for (long v : r.histogram.spoof_bins) max_count = std::max(max_count, v);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    auto bars = [&](const std::vector<long>& bins, const char* color) {
        const double bw = plot_w / Histogram::kBins;
        for (int i = 0; i < Histogram::kBins; ++i) {
            if (bins[i] == 0) continue;
            const double h = plot_h * static_cast<double>(bins[i]) / max_count;
            out << "<rect x=\"" << fmt(margin + i * bw) << "\" y=\""
                << fmt(margin + plot_h - h) << "\" width=\"" << fmt(bw) << "\" height=\""
                << fmt(h) << "\" fill=\"" << color << "\" fill-opacity=\"0.5\"/>\n";
        }
    };
    bars(r.histogram.real_bins, "#2266cc");
    bars(r.histogram.spoof_bins, "#cc4422");

    const double tx = margin + plot_w * r.threshold;
    out << "<line x1=\"" << fmt(tx) << "\" y1=\"" << margin << "\" x2=\"" << fmt(tx)
        << "\" y2=\"" << fmt(margin + plot_h)
        << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << fmt(margin + plot_h) << "\" x2=\""
        << fmt(margin + plot_w) << "\" y2=\"" << fmt(margin + plot_h)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << margin << "\" y=\"" << height - 8
        << "\" font-size=\"12\">p(real): real=blue spoof=red, threshold at "
        << fmt(r.threshold) << "</text>\n";
    out << "</svg>\n";
}

} // namespace

void emit_report(const EvalReport& r, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    nlohmann::ordered_json j;
    j["format"] = "popforge-report";
    j["version"] = 1;
    j["n_real"] = r.n_real;
    j["n_spoof"] = r.n_spoof;
    j["threshold"] = r.threshold;
    j["threshold_mode"] = r.threshold_mode;
    j["auto_threshold"] = r.auto_threshold;
    j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp},
                   {"fn", r.counts.fn}};
    j["rates"] = {{"tpr", rate_json(r.rates.tpr)},       {"tnr", rate_json(r.rates.tnr)},
                  {"fpr", rate_json(r.rates.fpr)},       {"fnr", rate_json(r.rates.fnr)},
                  {"accuracy", rate_json(r.rates.accuracy)}, {"asr", rate_json(r.rates.asr)}};
    j["skipped"] = {{"absent_features", r.skipped.absent},
                    {"missing_files", r.skipped.missing},
                    {"forced_label", r.skipped.forced_label}};
    j["histogram"] = {{"bins", Histogram::kBins},
                      {"real", r.histogram.real_bins},
                      {"spoof", r.histogram.spoof_bins}};

    std::ofstream jf(out_dir / "report.json");
    if (!jf) throw IoError("cannot write report.json");
    jf << j.dump(2) << "\n";

    std::ofstream sw(out_dir / "sweep.csv");
    if (!sw) throw IoError("cannot write sweep.csv");
    sw << "threshold,tp,tn,fp,fn,tpr,tnr,fpr,fnr,accuracy\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt(*v) : std::string("nan");
    };
    for (const SweepRow& row : r.sweep.rows) {
        sw << fmt(row.threshold) << "," << row.counts.tp << "," << row.counts.tn << ","
           << row.counts.fp << "," << row.counts.fn << "," << cell(row.rates.tpr) << ","
           << cell(row.rates.tnr) << "," << cell(row.rates.fpr) << ","
           << cell(row.rates.fnr) << "," << cell(row.rates.accuracy) << "\n";
    }

    write_hist_csv(out_dir / "hist_real.csv", r.histogram.real_bins);
    write_hist_csv(out_dir / "hist_spoof.csv", r.histogram.spoof_bins);
    write_svg(out_dir / "hist.svg", r);
}

} // namespace popforge
