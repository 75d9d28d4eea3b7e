#include "popforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "popforge/audio.hpp"
#include "popforge/dsp.hpp"
#include "popforge/errors.hpp"
#include "popforge/rng.hpp"

namespace popforge {

std::vector<Entry> parse_protocol(const std::filesystem::path& path,
                                  const ProtocolSchema& schema) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open protocol " + path.string());

    std::vector<Entry> entries;
    std::string line;
    std::size_t line_no = 0;
    const int need = std::max(schema.id_col, schema.label_col) + 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::vector<std::string> cols;
        std::string tok;
        while (ss >> tok) cols.push_back(tok);
        if (cols.empty()) continue; // blank line
        if (static_cast<int>(cols.size()) < need)
            throw MalformedLine(path.string() + ":" + std::to_string(line_no) +
                                ": expected at least " + std::to_string(need) + " columns");
        const std::string& label_tok = cols[schema.label_col];
        Entry e;
        e.source_id = cols[schema.id_col];
        if (label_tok == schema.real_token)
            e.label = Label::REAL;
        else if (label_tok == schema.spoof_token)
            e.label = Label::SPOOF;
        else
            throw UnknownLabelToken(path.string() + ":" + std::to_string(line_no) +
                                    ": unknown label token '" + label_tok + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<Entry> build_split(const std::vector<Entry>& entries, const SplitSpec& spec) {
    Rng rng(spec.seed);
    if (spec.mode == SplitSpec::Mode::FULL) {
        std::vector<Entry> out = entries;
        // Sort before shuffling so the order depends only on content + seed.
        std::sort(out.begin(), out.end(),
                  [](const Entry& a, const Entry& b) { return a.source_id < b.source_id; });
        rng.shuffle(out);
        return out;
    }

    std::vector<Entry> real, spoof;
    for (const Entry& e : entries) (e.label == Label::REAL ? real : spoof).push_back(e);
    auto by_id = [](const Entry& a, const Entry& b) { return a.source_id < b.source_id; };
    std::sort(real.begin(), real.end(), by_id);
    std::sort(spoof.begin(), spoof.end(), by_id);

    if (spec.per_class > real.size() || spec.per_class > spoof.size())
        throw InsufficientClassCount(
            "build_split: EVEN(" + std::to_string(spec.per_class) + ") but only " +
            std::to_string(real.size()) + " real / " + std::to_string(spoof.size()) +
            " spoof available");

    std::vector<Entry> out;
    for (std::size_t i : rng.sample_without_replacement(real.size(), spec.per_class))
        out.push_back(real[i]);
    for (std::size_t i : rng.sample_without_replacement(spoof.size(), spec.per_class))
        out.push_back(spoof[i]);
    rng.shuffle(out);
    return out;
}

namespace {

std::optional<std::filesystem::path> resolve_audio(const std::filesystem::path& root,
                                                   const std::string& id,
                                                   const std::filesystem::path* overlay) {
    const char* exts[] = {".wav", ".flac", ""};
    if (overlay != nullptr)
        for (const char* ext : exts) {
            auto p = *overlay / (id + ext);
            if (std::filesystem::exists(p)) return p;
        }
    for (const char* ext : {".flac", ".wav", ""}) {
        auto p = root / (id + ext);
        if (std::filesystem::exists(p)) return p;
    }
    return std::nullopt;
}

} // namespace

CorpusFeatures extract_corpus_features(const std::filesystem::path& audio_root,
                                       const std::vector<Entry>& split,
                                       const ExtractParams& params,
                                       const std::filesystem::path* overlay_root) {
    if (!std::filesystem::exists(audio_root))
        throw FileNotFound("audio root does not exist: " + audio_root.string());

    const GammatoneBank bank =
        make_bank(params.target_sr, params.n_channels, params.f_lo, params.f_hi);

    struct Slot {
        bool missing = false;
        std::string failure; // non-empty: absent or undecodable
        std::optional<FeatureVector> fv;
    };
    std::vector<Slot> slots(split.size());

    auto process = [&](std::size_t i) {
        Slot& slot = slots[i];
        const auto path = resolve_audio(audio_root, split[i].source_id, overlay_root);
        if (!path) {
            slot.missing = true;
            return;
        }
        try {
            AudioClip clip = load_audio(*path);
            clip = resample(clip, params.target_sr);
            const auto pops = detect_pops(clip, params.pop);
            slot.fv = extract_features(clip, pops, bank, params.pop, params.feat);
            if (!slot.fv) slot.failure = "no pops detected";
        } catch (const Error& e) {
            slot.failure = e.what();
        }
    };

    const int jobs = std::max(1, params.jobs);
    if (jobs == 1 || split.size() < 2) {
        for (std::size_t i = 0; i < split.size(); ++i) process(i);
    } else {
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < split.size();
                     i += static_cast<std::size_t>(jobs))
                    process(i);
            });
        for (auto& t : workers) t.join();
    }

    // Merge preserves split order regardless of worker interleaving.
    CorpusFeatures out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const Slot& slot = slots[i];
        if (slot.missing) {
            out.skipped_missing.push_back(split[i].source_id);
        } else if (!slot.fv) {
            out.skipped_absent.push_back(split[i].source_id);
        } else {
            out.features.push_back({slot.fv->gfcc_mean, slot.fv->delta1, slot.fv->delta2});
            out.labels.push_back(split[i].label);
            out.ids.push_back(split[i].source_id);
        }
    }
    return out;
}

void write_feature_csv(const std::filesystem::path& csv_path, const CorpusFeatures& fx) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path.string());
    out << "source_id,label,gfcc_mean,delta1,delta2\n";
    char line[256];
    for (std::size_t i = 0; i < fx.features.size(); ++i) {
        std::snprintf(line, sizeof(line), "%s,%s,%.17g,%.17g,%.17g\n", fx.ids[i].c_str(),
                      to_string(fx.labels[i]), fx.features[i][0], fx.features[i][1],
                      fx.features[i][2]);
        out << line;
    }

    std::filesystem::path sidecar = csv_path;
    sidecar.replace_filename(csv_path.stem().string() + "_skipped.txt");
    std::ofstream sk(sidecar);
    for (const auto& id : fx.skipped_missing) sk << id << "\tmissing\n";
    for (const auto& id : fx.skipped_absent) sk << id << "\tabsent\n";
}

CorpusFeatures read_feature_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw FileNotFound("cannot open " + csv_path.string());
    CorpusFeatures fx;
    std::string line;
    if (!std::getline(in, line)) throw MalformedLine("empty feature csv");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, label, a, b, c;
        if (!std::getline(ss, id, ',') || !std::getline(ss, label, ',') ||
            !std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw MalformedLine("bad feature row: " + line);
        fx.ids.push_back(id);
        fx.labels.push_back(label_from_string(label));
        fx.features.push_back({std::stod(a), std::stod(b), std::stod(c)});
    }
    return fx;
}

namespace {

struct Burst {
    double t0_s;
    double freq_hz;
    double amp;
    double decay_ms;
};

void add_burst(std::vector<double>& x, int sr, const Burst& b, double attack_ms,
               double amp_scale, double decay_stretch) {
    const double attack_s = attack_ms / 1000.0;
    const double decay_s = b.decay_ms / 1000.0 * decay_stretch;
    const double total_s = attack_s + 6.0 * decay_s;
    const int i0 = static_cast<int>(b.t0_s * sr);
    const int len = static_cast<int>(total_s * sr);
    for (int i = 0; i < len && i0 + i < static_cast<int>(x.size()); ++i) {
        const double t = static_cast<double>(i) / sr;
        double env;
        if (t < attack_s)
            env = 0.5 - 0.5 * std::cos(dsp::kPi * t / attack_s); // raised-cosine onset
        else
            env = std::exp(-(t - attack_s) / decay_s);
        x[static_cast<std::size_t>(i0 + i)] +=
            amp_scale * b.amp * env * std::sin(dsp::kTwoPi * b.freq_hz * t);
    }
}

} // namespace

std::vector<Entry> generate_synthetic_corpus(const std::filesystem::path& out_dir,
                                             const SynthSpec& spec) {
    if (spec.n_real < 1 || spec.n_spoof < 1)
        throw Error("generate_synthetic_corpus: counts must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    const SynthTuning& tk = spec.tuning;
    const int sr = spec.sample_rate;
    const PopDetectParams default_pop;

    auto make_clip = [&](const std::string& id, bool spoof, int attempt) {
        Rng rng(derive_seed(spec.seed, id + "#" + std::to_string(attempt)));

        const double dur = rng.uniform(tk.min_duration_s, tk.max_duration_s);
        const int n = static_cast<int>(dur * sr);

        // Colored noise bed at the requested RMS.
        std::vector<double> bed(n);
        double state = 0.0;
        for (int i = 0; i < n; ++i) {
            state = tk.bed_color_pole * state + (1.0 - tk.bed_color_pole) * rng.next_gaussian();
            bed[i] = state;
        }
        double rms = 0.0;
        for (double v : bed) rms += v * v;
        rms = std::sqrt(rms / n);
        for (double& v : bed) v *= tk.bed_rms / rms;

        // Burst positions jittered within equal slots, clear of the edges.
        const int n_bursts = rng.uniform_int(tk.min_bursts, tk.max_bursts);
        std::vector<Burst> bursts;
        const double usable = dur - 0.4;
        for (int k = 0; k < n_bursts; ++k) {
            Burst b;
            const double slot = usable / n_bursts;
            b.t0_s = 0.2 + slot * k + rng.uniform(0.0, std::max(0.0, slot - 0.15));
            b.freq_hz = rng.uniform(tk.burst_f_lo, tk.burst_f_hi);
            b.amp = rng.uniform(tk.burst_amp_lo, tk.burst_amp_hi);
            b.decay_ms = rng.uniform(tk.burst_decay_ms_lo, tk.burst_decay_ms_hi);
            bursts.push_back(b);
        }

        AudioClip clip;
        clip.sample_rate = sr;
        clip.source_id = id;
        clip.samples = bed;
        if (!spoof) {
            for (const Burst& b : bursts)
                add_burst(clip.samples, sr, b, tk.burst_attack_ms, 1.0, 1.0);
        } else {
            for (const Burst& b : bursts)
                add_burst(clip.samples, sr, b, tk.spoof_attack_ms, tk.spoof_amp_scale,
                          tk.spoof_decay_stretch);
            const auto hp =
                dsp::butterworth_highpass(tk.spoof_highpass_hz, sr, tk.spoof_highpass_order);
            clip.samples = dsp::filter_cascade(clip.samples, hp);
        }
        for (double& v : clip.samples) v = std::clamp(v, -1.0, 1.0);
        return clip;
    };

    std::vector<Entry> entries;
    std::ofstream protocol(out_dir / "protocol.txt");
    std::ofstream manifest(out_dir / "manifest.csv");
    if (!protocol || !manifest) throw IoError("cannot write corpus metadata");
    manifest << "source_id,label,poisoned\n";

    const int total = spec.n_real + spec.n_spoof;
    for (int i = 0; i < total; ++i) {
        const bool spoof = i >= spec.n_real;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "SYN_%c_%04d", spoof ? 'S' : 'R',
                      spoof ? i - spec.n_real + 1 : i + 1);
        const std::string id = idbuf;

        AudioClip clip;
        if (spoof) {
            clip = make_clip(id, true, 0);
        } else {
            // REAL clips must actually carry detectable pops; redraw if a
            // draw fails the default detector.
            bool ok = false;
            for (int attempt = 0; attempt < 25 && !ok; ++attempt) {
                clip = make_clip(id, false, attempt);
                ok = !detect_pops(clip, default_pop).empty();
            }
            if (!ok) throw Error("synthetic corpus: could not realize pops for " + id);
        }

        save_wav(out_dir / (id + ".wav"), clip);
        protocol << "SYN " << id << " - - " << (spoof ? "spoof" : "bonafide") << "\n";
        manifest << id << "," << to_string(spoof ? Label::SPOOF : Label::REAL) << ",false\n";
        entries.push_back({id, spoof ? Label::SPOOF : Label::REAL});
    }
    return entries;
}

} // namespace popforge
