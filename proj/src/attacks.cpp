#include "popforge/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "popforge/dsp.hpp"
#include "popforge/errors.hpp"
#include "popforge/rng.hpp"

namespace popforge {

std::pair<std::vector<Entry>, std::vector<std::string>> flip_labels(
    const std::vector<Entry>& split, double fraction, std::uint64_t seed,
    std::optional<Label> target) {
    if (fraction < 0.0 || fraction > 1.0)
        throw Error("flip_labels: fraction must be in [0, 1]");

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (!target || split[i].label == *target) pool.push_back(i);

    const std::size_t n_flips =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size())));

    Rng rng(seed);
    std::vector<std::size_t> chosen = rng.sample_without_replacement(pool.size(), n_flips);
    std::sort(chosen.begin(), chosen.end());

    std::vector<Entry> out = split;
    std::vector<std::string> manifest;
    for (std::size_t c : chosen) {
        out[pool[c]].label = flipped(out[pool[c]].label);
        manifest.push_back(out[pool[c]].source_id);
    }
    return {out, manifest};
}

AudioClip synthesize_pop(const AudioClip& clip, const PopInjectionParams& params,
                         bool* degenerate) {
    if (clip.samples.empty()) throw EmptyAudio("synthesize_pop: empty clip");
    if (degenerate != nullptr) *degenerate = false;

    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.source_id = clip.source_id;
    out.samples.resize(clip.samples.size());

    const double sr = clip.sample_rate;
    double peak = 0.0;
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / sr;
        const double s =
            clip.samples[i] + params.amplitude * std::sin(dsp::kTwoPi * params.frequency_hz * t);
        out.samples[i] = s;
        peak = std::max(peak, std::abs(s));
    }
    if (peak == 0.0) {
        if (degenerate != nullptr) *degenerate = true;
        return clip;
    }
    for (double& s : out.samples) s /= peak;
    return out;
}

PoisonResult poison_corpus(const std::filesystem::path& audio_root,
                           const std::vector<Entry>& split, const PoisonPlan& plan,
                           const std::filesystem::path& overlay_dir) {
    std::error_code ec;
    std::filesystem::create_directories(overlay_dir, ec);
    if (ec) throw IoError("cannot create overlay " + overlay_dir.string());

    std::vector<std::string> targets;
    for (const Entry& e : split)
        if (e.label == plan.target_class) targets.push_back(e.source_id);

    const std::size_t n_poison =
        static_cast<std::size_t>(std::floor(plan.fraction * static_cast<double>(targets.size())));
    Rng rng(plan.seed);
    std::vector<std::size_t> chosen = rng.sample_without_replacement(targets.size(), n_poison);
    std::sort(chosen.begin(), chosen.end());

    PoisonResult result;
    result.overlay_root = overlay_dir;
    for (std::size_t c : chosen) {
        const std::string& id = targets[c];
        std::filesystem::path src = audio_root / (id + ".wav");
        if (!std::filesystem::exists(src)) src = audio_root / (id + ".flac");
        if (!std::filesystem::exists(src))
            throw FileNotFound("poison_corpus: missing target clip " + id);
        const AudioClip poisoned = synthesize_pop(load_audio(src), plan.injection);
        save_wav(overlay_dir / (id + ".wav"), poisoned);
        result.poisoned_ids.push_back(id);
    }

    result.manifest_path = overlay_dir / "poison_manifest.csv";
    std::ofstream manifest(result.manifest_path);
    if (!manifest) throw IoError("cannot write poison manifest");
    manifest << "source_id,attack,params\n";
    char line[160];
    for (const std::string& id : result.poisoned_ids) {
        std::snprintf(line, sizeof(line), "%s,synthetic_pop,A=%g;f=%g\n", id.c_str(),
                      plan.injection.amplitude, plan.injection.frequency_hz);
        manifest << line;
    }
    return result;
}

} // namespace popforge
