#include "popforge/experiment.hpp"

#include <fstream>
#include <unordered_map>

#include "popforge/rng.hpp"

namespace popforge {

std::vector<std::string> preset_names() {
    return {"full",          "even-train",           "flip-20",           "synthpop-20",
            "full-synthetic", "even-train-synthetic", "flip-20-synthetic", "synthpop-20-synthetic"};
}

ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;

    std::string base = name;
    const std::string suffix = "-synthetic";
    const bool synthetic = name.size() > suffix.size() &&
                           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    if (synthetic) base = name.substr(0, name.size() - suffix.size());

    cfg.dataset = synthetic ? ExperimentConfig::Dataset::SYNTHETIC
                            : ExperimentConfig::Dataset::ASVSPOOF;

    if (base == "full") {
        cfg.split_mode = SplitSpec::Mode::FULL;
        cfg.fixed_threshold = 0.61;
    } else if (base == "even-train") {
        cfg.split_mode = SplitSpec::Mode::EVEN;
        cfg.fixed_threshold = 0.5;
    } else if (base == "flip-20") {
        cfg.split_mode = SplitSpec::Mode::EVEN;
        cfg.fixed_threshold = 0.48;
        PoisonPlan plan;
        plan.kind = AttackKind::LABEL_FLIP;
        plan.fraction = 0.2;
        cfg.attack = plan;
    } else if (base == "synthpop-20") {
        cfg.split_mode = SplitSpec::Mode::EVEN;
        cfg.fixed_threshold = 0.44;
        PoisonPlan plan;
        plan.kind = AttackKind::SYNTHETIC_POP;
        plan.target_class = Label::SPOOF;
        plan.fraction = 0.2;
        cfg.attack = plan;
    } else {
        throw Error("unknown preset: " + name);
    }
    return cfg;
}

namespace {

std::string dataset_name(ExperimentConfig::Dataset d) {
    return d == ExperimentConfig::Dataset::SYNTHETIC ? "synthetic" : "asvspoof";
}

} // namespace

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["preset"] = cfg.name;
    j["dataset"] = dataset_name(cfg.dataset);
    j["data_root"] = cfg.data_root.string();
    j["train_protocol"] = cfg.train_protocol.string();
    j["eval_protocol"] = cfg.eval_protocol.string();
    j["train_audio"] = cfg.train_audio.string();
    j["eval_audio"] = cfg.eval_audio.string();
    j["schema"] = {{"id_col", cfg.schema.id_col},
                   {"label_col", cfg.schema.label_col},
                   {"real_token", cfg.schema.real_token},
                   {"spoof_token", cfg.schema.spoof_token}};
    j["synthetic"] = {{"train_real", cfg.synth_train_real},
                      {"train_spoof", cfg.synth_train_spoof},
                      {"eval_real", cfg.synth_eval_real},
                      {"eval_spoof", cfg.synth_eval_spoof}};
    j["split"] = {{"mode", cfg.split_mode == SplitSpec::Mode::FULL ? "full" : "even"},
                  {"per_class", cfg.even_per_class}};
    if (cfg.attack) {
        const PoisonPlan& p = *cfg.attack;
        nlohmann::ordered_json a;
        a["kind"] = p.kind == AttackKind::LABEL_FLIP ? "label-flip" : "synthetic-pop";
        a["fraction"] = p.fraction;
        if (p.kind == AttackKind::LABEL_FLIP) {
            a["target"] = p.flip_target ? nlohmann::ordered_json(to_string(*p.flip_target))
                                        : nlohmann::ordered_json(nullptr);
        } else {
            a["target"] = to_string(p.target_class);
            a["amplitude"] = p.injection.amplitude;
            a["frequency_hz"] = p.injection.frequency_hz;
        }
        j["attack"] = a;
    } else {
        j["attack"] = nullptr;
    }
    j["pop"] = {{"frame_len", cfg.extract.pop.frame_len},
                {"hop", cfg.extract.pop.hop},
                {"cutoff_hz", cfg.extract.pop.cutoff_hz},
                {"z_threshold", cfg.extract.pop.z_threshold},
                {"merge_gap_frames", cfg.extract.pop.merge_gap_frames},
                {"min_len_frames", cfg.extract.pop.min_len_frames}};
    j["bank"] = {{"n_channels", cfg.extract.n_channels},
                 {"f_lo", cfg.extract.f_lo},
                 {"f_hi", cfg.extract.f_hi}};
    j["features"] = {{"flank_ms", cfg.extract.feat.flank_ms},
                     {"energy_floor", cfg.extract.feat.energy_floor}};
    j["target_sr"] = cfg.extract.target_sr;
    j["jobs"] = cfg.extract.jobs;
    j["grid"] = {{"C", cfg.grid.C_values}, {"gamma", cfg.grid.gamma_values},
                 {"folds", cfg.grid.folds}};
    j["smote_k"] = cfg.smote_k;
    j["threshold"] = {{"mode", cfg.auto_threshold ? "auto" : "fixed"},
                      {"value", cfg.fixed_threshold}};
    j["seed"] = cfg.master_seed;
    j["out_dir"] = cfg.out_dir.string();
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig cfg) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const nlohmann::json& v = it.value();
        if (k == "preset") {
            cfg.name = v.get<std::string>();
        } else if (k == "dataset") {
            const std::string d = v.get<std::string>();
            if (d == "synthetic")
                cfg.dataset = ExperimentConfig::Dataset::SYNTHETIC;
            else if (d == "asvspoof")
                cfg.dataset = ExperimentConfig::Dataset::ASVSPOOF;
            else
                throw Error("config: unknown dataset " + d);
        } else if (k == "data_root") {
            cfg.data_root = v.get<std::string>();
        } else if (k == "train_protocol") {
            cfg.train_protocol = v.get<std::string>();
        } else if (k == "eval_protocol") {
            cfg.eval_protocol = v.get<std::string>();
        } else if (k == "train_audio") {
            cfg.train_audio = v.get<std::string>();
        } else if (k == "eval_audio") {
            cfg.eval_audio = v.get<std::string>();
        } else if (k == "schema") {
            if (v.contains("id_col")) cfg.schema.id_col = v["id_col"].get<int>();
            if (v.contains("label_col")) cfg.schema.label_col = v["label_col"].get<int>();
            if (v.contains("real_token"))
                cfg.schema.real_token = v["real_token"].get<std::string>();
            if (v.contains("spoof_token"))
                cfg.schema.spoof_token = v["spoof_token"].get<std::string>();
        } else if (k == "synthetic") {
            if (v.contains("train_real")) cfg.synth_train_real = v["train_real"].get<int>();
            if (v.contains("train_spoof")) cfg.synth_train_spoof = v["train_spoof"].get<int>();
            if (v.contains("eval_real")) cfg.synth_eval_real = v["eval_real"].get<int>();
            if (v.contains("eval_spoof")) cfg.synth_eval_spoof = v["eval_spoof"].get<int>();
        } else if (k == "split") {
            if (v.contains("mode")) {
                const std::string m = v["mode"].get<std::string>();
                if (m == "full")
                    cfg.split_mode = SplitSpec::Mode::FULL;
                else if (m == "even")
                    cfg.split_mode = SplitSpec::Mode::EVEN;
                else
                    throw Error("config: unknown split mode " + m);
            }
            if (v.contains("per_class")) cfg.even_per_class = v["per_class"].get<std::size_t>();
        } else if (k == "attack") {
            if (v.is_null()) {
                cfg.attack.reset();
            } else {
                PoisonPlan p = cfg.attack.value_or(PoisonPlan{});
                const std::string kind = v.at("kind").get<std::string>();
                if (kind == "label-flip")
                    p.kind = AttackKind::LABEL_FLIP;
                else if (kind == "synthetic-pop")
                    p.kind = AttackKind::SYNTHETIC_POP;
                else
                    throw Error("config: unknown attack kind " + kind);
                if (v.contains("fraction")) p.fraction = v["fraction"].get<double>();
                if (v.contains("target") && !v["target"].is_null()) {
                    const Label t = label_from_string(v["target"].get<std::string>());
                    if (p.kind == AttackKind::LABEL_FLIP)
                        p.flip_target = t;
                    else
                        p.target_class = t;
                }
                if (v.contains("amplitude")) p.injection.amplitude = v["amplitude"].get<double>();
                if (v.contains("frequency_hz"))
                    p.injection.frequency_hz = v["frequency_hz"].get<double>();
                cfg.attack = p;
            }
        } else if (k == "pop") {
            if (v.contains("frame_len")) cfg.extract.pop.frame_len = v["frame_len"].get<int>();
            if (v.contains("hop")) cfg.extract.pop.hop = v["hop"].get<int>();
            if (v.contains("cutoff_hz")) cfg.extract.pop.cutoff_hz = v["cutoff_hz"].get<double>();
            if (v.contains("z_threshold"))
                cfg.extract.pop.z_threshold = v["z_threshold"].get<double>();
            if (v.contains("merge_gap_frames"))
                cfg.extract.pop.merge_gap_frames = v["merge_gap_frames"].get<int>();
            if (v.contains("min_len_frames"))
                cfg.extract.pop.min_len_frames = v["min_len_frames"].get<int>();
        } else if (k == "bank") {
            if (v.contains("n_channels")) cfg.extract.n_channels = v["n_channels"].get<int>();
            if (v.contains("f_lo")) cfg.extract.f_lo = v["f_lo"].get<double>();
            if (v.contains("f_hi")) cfg.extract.f_hi = v["f_hi"].get<double>();
        } else if (k == "features") {
            if (v.contains("flank_ms")) cfg.extract.feat.flank_ms = v["flank_ms"].get<double>();
            if (v.contains("energy_floor"))
                cfg.extract.feat.energy_floor = v["energy_floor"].get<double>();
        } else if (k == "target_sr") {
            cfg.extract.target_sr = v.get<int>();
        } else if (k == "jobs") {
            cfg.extract.jobs = v.get<int>();
        } else if (k == "grid") {
            if (v.contains("C")) cfg.grid.C_values = v["C"].get<std::vector<double>>();
            if (v.contains("gamma"))
                cfg.grid.gamma_values = v["gamma"].get<std::vector<double>>();
            if (v.contains("folds")) cfg.grid.folds = v["folds"].get<int>();
        } else if (k == "smote_k") {
            cfg.smote_k = v.get<int>();
        } else if (k == "threshold") {
            if (v.contains("mode")) cfg.auto_threshold = v["mode"].get<std::string>() == "auto";
            if (v.contains("value")) cfg.fixed_threshold = v["value"].get<double>();
        } else if (k == "seed") {
            cfg.master_seed = v.get<std::uint64_t>();
        } else if (k == "out_dir") {
            cfg.out_dir = v.get<std::string>();
        } else {
            throw Error("config: unknown key '" + k + "'");
        }
    }
    return cfg;
}

namespace {

struct ResolvedDataset {
    std::vector<Entry> train_entries;
    std::vector<Entry> eval_entries;
    std::filesystem::path train_audio;
    std::filesystem::path eval_audio;
};

ResolvedDataset resolve_dataset(const ExperimentConfig& cfg) {
    ResolvedDataset ds;
    if (cfg.dataset == ExperimentConfig::Dataset::SYNTHETIC) {
        SynthSpec train_spec;
        train_spec.n_real = cfg.synth_train_real;
        train_spec.n_spoof = cfg.synth_train_spoof;
        train_spec.seed = derive_seed(cfg.master_seed, "corpus-train");
        train_spec.sample_rate = cfg.extract.target_sr;
        SynthSpec eval_spec = train_spec;
        eval_spec.n_real = cfg.synth_eval_real;
        eval_spec.n_spoof = cfg.synth_eval_spoof;
        eval_spec.seed = derive_seed(cfg.master_seed, "corpus-eval");

        ds.train_audio = cfg.out_dir / "corpus" / "train";
        ds.eval_audio = cfg.out_dir / "corpus" / "eval";
        ds.train_entries = generate_synthetic_corpus(ds.train_audio, train_spec);
        ds.eval_entries = generate_synthetic_corpus(ds.eval_audio, eval_spec);
        return ds;
    }

    std::filesystem::path root = cfg.data_root;
    if (root.empty())
        throw Error("asvspoof dataset: no data root (flag --data-root or POPFORGE_DATA_ROOT)");
    ds.train_audio = !cfg.train_audio.empty()
                         ? cfg.train_audio
                         : root / "ASVspoof2019_LA_train" / "flac";
    ds.eval_audio =
        !cfg.eval_audio.empty() ? cfg.eval_audio : root / "ASVspoof2019_LA_eval" / "flac";
    const std::filesystem::path train_proto =
        !cfg.train_protocol.empty()
            ? cfg.train_protocol
            : root / "ASVspoof2019_LA_cm_protocols" / "ASVspoof2019.LA.cm.train.trn.txt";
    const std::filesystem::path eval_proto =
        !cfg.eval_protocol.empty()
            ? cfg.eval_protocol
            : root / "ASVspoof2019_LA_cm_protocols" / "ASVspoof2019.LA.cm.eval.trl.txt";
    ds.train_entries = parse_protocol(train_proto, cfg.schema);
    ds.eval_entries = parse_protocol(eval_proto, cfg.schema);
    return ds;
}

} // namespace

EvalReport run_experiment(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir.string());

    { // config snapshot; the run directory is self-contained
        std::ofstream snap(cfg.out_dir / "config.json");
        if (!snap) throw IoError("cannot write config snapshot");
        snap << config_to_json(cfg).dump(2) << "\n";
    }

    const ResolvedDataset ds = resolve_dataset(cfg);

    // Training split.
    SplitSpec split_spec;
    split_spec.mode = cfg.split_mode;
    split_spec.seed = derive_seed(cfg.master_seed, "split");
    if (cfg.split_mode == SplitSpec::Mode::EVEN) {
        std::size_t n_real = 0, n_spoof = 0;
        for (const Entry& e : ds.train_entries)
            (e.label == Label::REAL ? n_real : n_spoof) += 1;
        split_spec.per_class =
            cfg.even_per_class > 0 ? cfg.even_per_class : std::min(n_real, n_spoof);
    }
    std::vector<Entry> train_split = build_split(ds.train_entries, split_spec);

    // Optional poisoning.
    std::optional<std::filesystem::path> overlay;
    if (cfg.attack) {
        PoisonPlan plan = *cfg.attack;
        if (plan.kind == AttackKind::LABEL_FLIP) {
            plan.seed = derive_seed(cfg.master_seed, "flip");
            auto [flipped_split, manifest] =
                flip_labels(train_split, plan.fraction, plan.seed, plan.flip_target);
            train_split = std::move(flipped_split);
            std::ofstream mf(cfg.out_dir / "flip_manifest.csv");
            mf << "source_id,attack,params\n";
            for (const std::string& id : manifest)
                mf << id << ",label_flip,fraction=" << plan.fraction << "\n";
        } else {
            plan.seed = derive_seed(cfg.master_seed, "poison");
            const PoisonResult pr =
                poison_corpus(ds.train_audio, train_split, plan, cfg.out_dir / "overlay");
            overlay = pr.overlay_root;
        }
    }

    // Train-side features.
    CorpusFeatures train_fx = extract_corpus_features(
        ds.train_audio, train_split, cfg.extract, overlay ? &*overlay : nullptr);
    write_feature_csv(cfg.out_dir / "features_train.csv", train_fx);
    if (train_fx.features.empty())
        throw EmptyCorpus("training produced zero feature rows (no pops anywhere)");

    auto [bal_x, bal_y] =
        smote(train_fx.features, train_fx.labels, cfg.smote_k,
              derive_seed(cfg.master_seed, "smote"));

    GridSpec grid = cfg.grid;
    grid.seed = derive_seed(cfg.master_seed, "train");
    const TrainedDetector model = train(bal_x, bal_y, grid);
    save_model(cfg.out_dir / "model.json", model);

    // Evaluation features and scoring.
    CorpusFeatures eval_fx =
        extract_corpus_features(ds.eval_audio, ds.eval_entries, cfg.extract);
    write_feature_csv(cfg.out_dir / "features_eval.csv", eval_fx);

    std::vector<double> probs(eval_fx.features.size());
    for (std::size_t i = 0; i < eval_fx.features.size(); ++i)
        probs[i] = predict_proba(model, eval_fx.features[i]);

    // Skipped evaluation clips carry no liveness evidence and are forced to
    // SPOOF; they are threshold-independent.
    std::unordered_map<std::string, Label> eval_label;
    for (const Entry& e : ds.eval_entries) eval_label[e.source_id] = e.label;
    ConfusionCounts forced;
    auto force_spoof = [&](const std::vector<std::string>& ids) {
        for (const std::string& id : ids) {
            if (eval_label.at(id) == Label::SPOOF)
                ++forced.tp;
            else
                ++forced.fp;
        }
    };
    force_spoof(eval_fx.skipped_absent);
    force_spoof(eval_fx.skipped_missing);

    EvalReport report;
    report.sweep = threshold_sweep(eval_fx.labels, probs, default_threshold_grid(), forced);
    report.auto_threshold = report.sweep.best_threshold;
    report.threshold_mode = cfg.auto_threshold ? "auto" : "fixed";
    report.threshold = cfg.auto_threshold ? report.sweep.best_threshold : cfg.fixed_threshold;

    report.counts = confusion(eval_fx.labels, probs, report.threshold);
    report.counts.tp += forced.tp;
    report.counts.tn += forced.tn;
    report.counts.fp += forced.fp;
    report.counts.fn += forced.fn;
    report.rates = metrics(report.counts);
    report.histogram = probability_histogram(eval_fx.labels, probs);
    report.skipped.absent = static_cast<long>(eval_fx.skipped_absent.size());
    report.skipped.missing = static_cast<long>(eval_fx.skipped_missing.size());
    for (const Entry& e : ds.eval_entries)
        (e.label == Label::REAL ? report.n_real : report.n_spoof) += 1;

    emit_report(report, cfg.out_dir);
    return report;
}

} // namespace popforge
