#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "popforge/audio.hpp"
#include "popforge/corpus.hpp"
#include "popforge/label.hpp"

namespace popforge {

struct PopInjectionParams {
    double amplitude = 0.5;     // A
    double frequency_hz = 90.0; // f
};

enum class AttackKind { LABEL_FLIP, SYNTHETIC_POP };

struct PoisonPlan {
    AttackKind kind = AttackKind::SYNTHETIC_POP;
    Label target_class = Label::SPOOF;        // SYNTHETIC_POP only
    std::optional<Label> flip_target;         // restrict flips to one class
    double fraction = 0.2;
    std::uint64_t seed = 0;
    PopInjectionParams injection;
};

// Negate the labels of floor(fraction * |split|) examples drawn uniformly
// without replacement (or of the target class only, when given). Returns the
// poisoned split and the manifest of flipped ids.
std::pair<std::vector<Entry>, std::vector<std::string>> flip_labels(
    const std::vector<Entry>& split, double fraction, std::uint64_t seed,
    std::optional<Label> target = std::nullopt);

// Algorithm: add P(t) = A*sin(2*pi*f*t) with t_i = i/sr across the whole
// clip, then peak-normalize: a_p = (a + P) / max|a + P|. If a + P is
// identically zero the input is returned and *degenerate is set.
AudioClip synthesize_pop(const AudioClip& clip, const PopInjectionParams& params = {},
                         bool* degenerate = nullptr);

struct PoisonResult {
    std::filesystem::path overlay_root;
    std::filesystem::path manifest_path;
    std::vector<std::string> poisoned_ids;
};

// Rewrite floor(fraction * |target class|) clips through synthesize_pop into
// an overlay directory; labels and all other files stay untouched
// (clean-label attack). A manifest CSV records what was modified.
PoisonResult poison_corpus(const std::filesystem::path& audio_root,
                           const std::vector<Entry>& split, const PoisonPlan& plan,
                           const std::filesystem::path& overlay_dir);

} // namespace popforge
