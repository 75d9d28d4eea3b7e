#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "popforge/attacks.hpp"
#include "popforge/corpus.hpp"
#include "popforge/errors.hpp"
#include "popforge/evaluator.hpp"
#include "popforge/experiment.hpp"
#include "popforge/learner.hpp"
#include "popforge/rng.hpp"

namespace {

using namespace popforge;

void print_rates(const EvalReport& r) {
    auto pct = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f%%", *v * 100.0);
        return std::string(buf);
    };
    std::printf("threshold    %.3f (%s; auto would pick %.2f)\n", r.threshold,
                r.threshold_mode.c_str(), r.auto_threshold);
    std::printf("counts       TP=%ld TN=%ld FP=%ld FN=%ld\n", r.counts.tp, r.counts.tn,
                r.counts.fp, r.counts.fn);
    std::printf("TPR %s  TNR %s  FPR %s  FNR %s\n", pct(r.rates.tpr).c_str(),
                pct(r.rates.tnr).c_str(), pct(r.rates.fpr).c_str(), pct(r.rates.fnr).c_str());
    std::printf("accuracy %s  ASR %s\n", pct(r.rates.accuracy).c_str(),
                pct(r.rates.asr).c_str());
    if (r.skipped.absent + r.skipped.missing > 0)
        std::printf("skipped      %ld absent, %ld missing (forced %s)\n", r.skipped.absent,
                    r.skipped.missing, r.skipped.forced_label);
}

std::string env_data_root() {
    const char* v = std::getenv("POPFORGE_DATA_ROOT");
    return v ? std::string(v) : std::string();
}

int run_command(CLI::App& app, int argc, char** argv) {
    // --- synth-corpus ---
    auto* synth = app.add_subcommand("synth-corpus", "Generate the synthetic desk-scale corpus");
    std::string synth_out = "corpus";
    int n_real = 10, n_spoof = 40;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--n-real", n_real, "Number of real clips");
    synth->add_option("--n-spoof", n_spoof, "Number of spoof clips");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->callback([&] {
        SynthSpec spec;
        spec.n_real = n_real;
        spec.n_spoof = n_spoof;
        spec.seed = synth_seed;
        const auto entries = generate_synthetic_corpus(synth_out, spec);
        std::printf("wrote %zu clips under %s\n", entries.size(), synth_out.c_str());
    });

    // --- extract ---
    auto* extract = app.add_subcommand("extract", "Extract features for a protocol");
    std::string ex_root, ex_protocol, ex_out = "features.csv", ex_overlay;
    int ex_jobs = 1;
    extract->add_option("--data-root", ex_root, "Audio directory")->required();
    extract->add_option("--protocol", ex_protocol, "Protocol file")->required();
    extract->add_option("--out", ex_out, "Feature CSV path");
    extract->add_option("--overlay", ex_overlay, "Overlay directory (poisoned audio)");
    extract->add_option("--jobs", ex_jobs, "Worker threads");
    extract->callback([&] {
        ExtractParams params;
        params.jobs = ex_jobs;
        const auto entries = parse_protocol(ex_protocol);
        std::filesystem::path overlay = ex_overlay;
        const CorpusFeatures fx = extract_corpus_features(
            ex_root, entries, params, ex_overlay.empty() ? nullptr : &overlay);
        write_feature_csv(ex_out, fx);
        std::printf("extracted %zu rows (%zu missing, %zu without pops) -> %s\n",
                    fx.features.size(), fx.skipped_missing.size(), fx.skipped_absent.size(),
                    ex_out.c_str());
    });

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "SMOTE-balance and train the detector");
    std::string tr_features, tr_model = "model.json";
    std::uint64_t tr_seed = 0;
    int tr_folds = 5, tr_smote_k = 5;
    train_cmd->add_option("--features", tr_features, "Training feature CSV")->required();
    train_cmd->add_option("--out", tr_model, "Model output path");
    train_cmd->add_option("--seed", tr_seed, "Training seed");
    train_cmd->add_option("--folds", tr_folds, "Cross-validation folds");
    train_cmd->add_option("--smote-k", tr_smote_k, "SMOTE neighbor count");
    train_cmd->callback([&] {
        const CorpusFeatures fx = read_feature_csv(tr_features);
        auto [x, y] = smote(fx.features, fx.labels, tr_smote_k, derive_seed(tr_seed, "smote"));
        GridSpec grid;
        grid.folds = tr_folds;
        grid.seed = derive_seed(tr_seed, "train");
        const TrainedDetector model = train(x, y, grid);
        save_model(tr_model, model);
        std::printf("trained: C=%g gamma=%g cv=%.4f, %zu support vectors -> %s\n", model.C,
                    model.gamma, model.cv_score, model.support_vectors.size(),
                    tr_model.c_str());
    });

    // --- attack ---
    auto* attack = app.add_subcommand("attack", "Poison a training set");
    auto* flip = attack->add_subcommand("label-flip", "Flip a fraction of labels");
    std::string fl_protocol, fl_out = "flipped_protocol.txt", fl_target;
    double fl_fraction = 0.2;
    std::uint64_t fl_seed = 0;
    flip->add_option("--protocol", fl_protocol, "Protocol to poison")->required();
    flip->add_option("--out", fl_out, "Poisoned protocol path");
    flip->add_option("--fraction", fl_fraction, "Fraction to flip");
    flip->add_option("--seed", fl_seed, "Attack seed");
    flip->add_option("--target", fl_target, "Restrict flips to one class (real|spoof)");
    flip->callback([&] {
        const auto entries = parse_protocol(fl_protocol);
        std::optional<Label> target;
        if (!fl_target.empty()) target = label_from_string(fl_target);
        auto [poisoned, manifest] = flip_labels(entries, fl_fraction, fl_seed, target);
        std::ofstream out(fl_out);
        if (!out) throw IoError("cannot write " + fl_out);
        for (const Entry& e : poisoned)
            out << "SYN " << e.source_id << " - - "
                << (e.label == Label::REAL ? "bonafide" : "spoof") << "\n";
        std::printf("flipped %zu labels -> %s\n", manifest.size(), fl_out.c_str());
    });

    auto* spop = attack->add_subcommand("synthetic-pop", "Inject normalized 90 Hz sines");
    std::string sp_root, sp_protocol, sp_out = "overlay";
    double sp_fraction = 0.2, sp_amp = 0.5, sp_freq = 90.0;
    std::uint64_t sp_seed = 0;
    spop->add_option("--data-root", sp_root, "Audio directory")->required();
    spop->add_option("--protocol", sp_protocol, "Protocol file")->required();
    spop->add_option("--out", sp_out, "Overlay directory");
    spop->add_option("--fraction", sp_fraction, "Fraction of spoof clips to poison");
    spop->add_option("--amplitude", sp_amp, "Sine amplitude before normalization");
    spop->add_option("--frequency", sp_freq, "Sine frequency in Hz");
    spop->add_option("--seed", sp_seed, "Attack seed");
    spop->callback([&] {
        const auto entries = parse_protocol(sp_protocol);
        PoisonPlan plan;
        plan.kind = AttackKind::SYNTHETIC_POP;
        plan.target_class = Label::SPOOF;
        plan.fraction = sp_fraction;
        plan.seed = sp_seed;
        plan.injection.amplitude = sp_amp;
        plan.injection.frequency_hz = sp_freq;
        const PoisonResult pr = poison_corpus(sp_root, entries, plan, sp_out);
        std::printf("poisoned %zu clips -> %s\n", pr.poisoned_ids.size(),
                    pr.overlay_root.string().c_str());
    });
    attack->require_subcommand(1);

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "Score a feature set against a model");
    std::string ev_model, ev_features, ev_out = "eval", ev_threshold = "0.5";
    eval_cmd->add_option("--model", ev_model, "Model JSON")->required();
    eval_cmd->add_option("--features", ev_features, "Evaluation feature CSV")->required();
    eval_cmd->add_option("--out", ev_out, "Report directory");
    eval_cmd->add_option("--threshold", ev_threshold, "Decision threshold or 'auto'");
    eval_cmd->callback([&] {
        const TrainedDetector model = load_model(ev_model);
        const CorpusFeatures fx = read_feature_csv(ev_features);
        std::vector<double> probs(fx.features.size());
        for (std::size_t i = 0; i < fx.features.size(); ++i)
            probs[i] = predict_proba(model, fx.features[i]);

        EvalReport report;
        report.sweep = threshold_sweep(fx.labels, probs, default_threshold_grid());
        report.auto_threshold = report.sweep.best_threshold;
        if (ev_threshold == "auto") {
            report.threshold_mode = "auto";
            report.threshold = report.auto_threshold;
        } else {
            report.threshold_mode = "fixed";
            report.threshold = std::stod(ev_threshold);
        }
        report.counts = confusion(fx.labels, probs, report.threshold);
        report.rates = metrics(report.counts);
        report.histogram = probability_histogram(fx.labels, probs);
        for (Label l : fx.labels) (l == Label::REAL ? report.n_real : report.n_spoof) += 1;
        emit_report(report, ev_out);
        print_rates(report);
    });

    // --- run ---
    auto* run = app.add_subcommand("run", "Run a full experiment pipeline");
    std::string run_preset = "even-train-synthetic", run_out = "run", run_config,
                run_data_root = env_data_root(), run_threshold;
    std::uint64_t run_seed = 0;
    int run_jobs = 0;
    run->add_option("--preset", run_preset, "One of the experiment presets");
    run->add_option("--config", run_config, "JSON config file (overrides the preset)");
    run->add_option("--seed", run_seed, "Master seed");
    run->add_option("--out", run_out, "Run directory");
    run->add_option("--data-root", run_data_root, "ASVspoof LA root");
    run->add_option("--threshold", run_threshold, "Decision threshold or 'auto'");
    run->add_option("--jobs", run_jobs, "Worker threads for extraction");
    run->callback([&] {
        ExperimentConfig cfg = make_preset(run_preset);
        if (!run_config.empty()) {
            std::ifstream in(run_config);
            if (!in) throw IoError("cannot open config " + run_config);
            nlohmann::json j;
            in >> j;
            cfg = config_from_json(j, cfg);
        }
        if (run->count("--seed")) cfg.master_seed = run_seed;
        if (run->count("--out")) cfg.out_dir = run_out;
        if (cfg.out_dir.empty()) cfg.out_dir = run_out;
        if (!run_data_root.empty()) cfg.data_root = run_data_root;
        if (!run_threshold.empty()) {
            if (run_threshold == "auto") {
                cfg.auto_threshold = true;
            } else {
                cfg.auto_threshold = false;
                cfg.fixed_threshold = std::stod(run_threshold);
            }
        }
        if (run_jobs > 0) cfg.extract.jobs = run_jobs;
        const EvalReport report = run_experiment(cfg);
        std::printf("== %s ==\n", cfg.name.c_str());
        print_rates(report);
        std::printf("artifacts under %s\n", cfg.out_dir.string().c_str());
    });

    // --- report ---
    auto* rep = app.add_subcommand("report", "Summarize an existing report.json");
    std::string rep_path = "report.json";
    rep->add_option("--in", rep_path, "Path to report.json")->required();
    rep->callback([&] {
        std::ifstream in(rep_path);
        if (!in) throw IoError("cannot open " + rep_path);
        nlohmann::json j;
        in >> j;
        auto opt = [&](const char* key) -> std::optional<double> {
            if (j["rates"][key].is_null()) return std::nullopt;
            return j["rates"][key].get<double>();
        };
        EvalReport r;
        r.threshold = j["threshold"].get<double>();
        r.threshold_mode = j["threshold_mode"].get<std::string>();
        r.auto_threshold = j["auto_threshold"].get<double>();
        r.counts.tp = j["counts"]["tp"].get<long>();
        r.counts.tn = j["counts"]["tn"].get<long>();
        r.counts.fp = j["counts"]["fp"].get<long>();
        r.counts.fn = j["counts"]["fn"].get<long>();
        r.rates.tpr = opt("tpr");
        r.rates.tnr = opt("tnr");
        r.rates.fpr = opt("fpr");
        r.rates.fnr = opt("fnr");
        r.rates.accuracy = opt("accuracy");
        r.rates.asr = opt("asr");
        r.skipped.absent = j["skipped"]["absent_features"].get<long>();
        r.skipped.missing = j["skipped"]["missing_files"].get<long>();
        print_rates(r);
    });

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage problems -> 1
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"popforge: pop-noise liveness detection and training-set poisoning"};
    try {
        return run_command(app, argc, argv);
    } catch (const popforge::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
}
