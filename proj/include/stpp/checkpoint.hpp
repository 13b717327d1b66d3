#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stpp/baseline.hpp"
#include "stpp/events.hpp"
#include "stpp/generator.hpp"
#include "stpp/hawkes.hpp"

namespace stpp {

// Versioned JSON checkpoints. `model` distinguishes the payload:
// "generator", "baseline" or "selfexciting". Weight arrays are stored
// flattened column-major.
struct GeneratorCheckpoint {
    GeneratorParams params;
    ScalingTransform scaling;
    std::vector<std::string> feature_schema;
    int event_unit = 1;  // cases represented by one event (100 for hot spots)
};

struct BaselineCheckpoint {
    BaselineParams params;
    ScalingTransform scaling;
};

void save_generator_checkpoint(const std::filesystem::path& path, const GeneratorCheckpoint& ck);
GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path);

void save_baseline_checkpoint(const std::filesystem::path& path, const BaselineCheckpoint& ck);
BaselineCheckpoint load_baseline_checkpoint(const std::filesystem::path& path);

void save_triggering_model(const std::filesystem::path& path, const TriggeringModel& model);
TriggeringModel load_triggering_model(const std::filesystem::path& path);

// Reads the "model" tag without loading the payload.
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace stpp
