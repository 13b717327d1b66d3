#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stpp/events.hpp"
#include "stpp/hawkes.hpp"
#include "stpp/kernel.hpp"

namespace stpp {

struct EvalConfig {
    KernelConfig kernel;
    int batch = 64;       // subset size for the discrepancy estimates
    int resamples = 20;
    int time_bins = 10;
    int space_bins = 10;
    SpaceRegion region;
    std::uint64_t seed = 0;
};

struct EvalMetrics {
    std::size_t n_expert = 0;
    std::size_t n_generated = 0;
    double d2 = 0.0;                // learner vs expert, resampled mean
    double self_discrepancy = 0.0;  // expert vs expert noise floor
    double d2_ratio = 0.0;
    double time_mae = 0.0;
    double space_mae = 0.0;
    double cube_mae = 0.0;
    double cube_peak = 0.0;  // peak expert cube density
    EmpiricalIntensity expert_intensity;
    EmpiricalIntensity generated_intensity;
};

// Compares a generated set against expert sequences: resampled batch
// discrepancy, the expert self-discrepancy floor, and per-bin empirical
// intensity errors. Throws when the generated set carries no events.
EvalMetrics evaluate_generated(const std::vector<EventSequence>& expert,
                               const std::vector<EventSequence>& generated,
                               const EvalConfig& cfg);

std::string eval_metrics_to_json(const EvalMetrics& metrics);

}  // namespace stpp
