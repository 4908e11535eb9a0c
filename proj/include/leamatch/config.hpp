#pragma once

#include <cstdint>
#include <string>

#include "leamatch/forest.hpp"
#include "leamatch/scoring.hpp"
#include "leamatch/synth.hpp"

namespace leamatch {

struct TrainingConfig {
    /// Different-source pairs sampled per same-source pair; 0 keeps all.
    int negatives_per_positive = 5;
    std::uint64_t seed = 7;
};

/// Every tolerance and hyperparameter, one INI document.
struct Config {
    PipelineConfig pipeline;
    ForestConfig forest;
    TrainingConfig training;
    SynthConfig synth;
};

/// Unknown keys are rejected with Error(BadConfig); missing keys keep
/// their defaults.
Config parse_config(const std::string& ini_text);
Config load_config(const std::string& path);

/// Canonical INI text with every key, in a fixed order.
std::string to_ini(const Config& cfg);

/// Digest of the [crosscut], [grooves], [lowess], [signature] and [striae]
/// sections; stamped on computed artifacts.
std::uint64_t pipeline_digest(const PipelineConfig& cfg);

}  // namespace leamatch
