#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "popforge/attacks.hpp"
#include "popforge/corpus.hpp"
#include "popforge/evaluator.hpp"
#include "popforge/learner.hpp"

namespace popforge {

struct ExperimentConfig {
    std::string name = "custom";

    enum class Dataset { ASVSPOOF, SYNTHETIC };
    Dataset dataset = Dataset::SYNTHETIC;

    // asvspoof paths; empty entries are derived from data_root using the
    // standard LA layout.
    std::filesystem::path data_root;
    std::filesystem::path train_protocol;
    std::filesystem::path eval_protocol;
    std::filesystem::path train_audio;
    std::filesystem::path eval_audio;
    ProtocolSchema schema;

    // synthetic corpus sizes
    int synth_train_real = 200;
    int synth_train_spoof = 800;
    int synth_eval_real = 100;
    int synth_eval_spoof = 400;

    SplitSpec::Mode split_mode = SplitSpec::Mode::EVEN;
    std::size_t even_per_class = 0; // 0 -> the real-class count

    std::optional<PoisonPlan> attack;

    ExtractParams extract;
    int smote_k = 5;
    GridSpec grid;

    bool auto_threshold = false;
    double fixed_threshold = 0.5;

    std::uint64_t master_seed = 0;
    std::filesystem::path out_dir = "run";
};

// The paper's four experiments plus synthetic desk-scale twins.
std::vector<std::string> preset_names();
ExperimentConfig make_preset(const std::string& name);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
// Applies the keys present in j over base; unknown keys are an error.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

// Full pipeline: (optional poison) -> train features -> SMOTE -> train ->
// eval features -> score -> report. All artifacts land under cfg.out_dir;
// identical configs reproduce report.json byte-exactly.
EvalReport run_experiment(const ExperimentConfig& cfg);

} // namespace popforge
