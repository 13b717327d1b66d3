#include "stpp/eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "stpp/rng.hpp"
#include "stpp/version.hpp"

namespace stpp {

namespace {

std::vector<EventSequence> sample_subset(const std::vector<EventSequence>& pool, int count,
                                         Rng& rng) {
    std::vector<EventSequence> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::size_t idx =
            static_cast<std::size_t>(rng.uniform01() * static_cast<double>(pool.size()));
        out.push_back(pool[std::min(idx, pool.size() - 1)]);
    }
    return out;
}

double mean_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().mean();
}

nlohmann::json grid_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json intensity_to_json(const EmpiricalIntensity& in) {
    nlohmann::json j;
    j["n_sequences"] = in.n_sequences;
    j["n_events"] = in.n_events;
    j["n_events_outside"] = in.n_events_outside;
    j["horizon"] = in.horizon;
    j["time_density"] =
        std::vector<double>(in.time_density.data(), in.time_density.data() + in.time_density.size());
    j["space_density"] = grid_to_json(in.space_density);
    nlohmann::json cube = nlohmann::json::array();
    for (const Eigen::MatrixXd& slab : in.cube_density) cube.push_back(grid_to_json(slab));
    j["cube_density"] = cube;
    return j;
}

}  // namespace

EvalMetrics evaluate_generated(const std::vector<EventSequence>& expert,
                               const std::vector<EventSequence>& generated,
                               const EvalConfig& cfg) {
    if (expert.empty()) throw std::invalid_argument("evaluate_generated: no expert sequences");
    if (generated.empty()) throw std::invalid_argument("evaluate_generated: no generated sequences");
    std::size_t generated_events = 0;
    for (const EventSequence& seq : generated) generated_events += seq.events.size();
    if (generated_events == 0) {
        throw std::runtime_error("evaluate_generated: the generated set contains no events");
    }

    EvalMetrics m;
    m.n_expert = expert.size();
    m.n_generated = generated.size();

    // Both discrepancy estimates use the same batch size so their noise
    // floors are comparable.
    int L = cfg.batch;
    L = std::min<int>(L, static_cast<int>(expert.size() / 2));
    L = std::min<int>(L, static_cast<int>(generated.size()));
    if (L < 1) throw std::invalid_argument("evaluate_generated: too few sequences for the batch");

    Rng rng(derive_seed(cfg.seed, 0xe7a1));
    double d2_sum = 0.0;
    for (int r = 0; r < cfg.resamples; ++r) {
        EmbeddingBatch e{sample_subset(expert, L, rng), BatchRole::expert};
        EmbeddingBatch g{sample_subset(generated, L, rng), BatchRole::learner};
        d2_sum += mmd_squared(e, g, cfg.kernel);
    }
    m.d2 = d2_sum / static_cast<double>(cfg.resamples);

    // Disjoint expert splits at the same L.
    double self_sum = 0.0;
    std::vector<std::size_t> order(expert.size());
    for (int r = 0; r < cfg.resamples; ++r) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i-- > 1;) {
            const std::size_t j =
                static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }
        EmbeddingBatch a{{}, BatchRole::expert};
        EmbeddingBatch b{{}, BatchRole::learner};
        for (int i = 0; i < L; ++i) {
            a.sequences.push_back(expert[order[static_cast<std::size_t>(i)]]);
            b.sequences.push_back(expert[order[static_cast<std::size_t>(L + i)]]);
        }
        self_sum += mmd_squared(a, b, cfg.kernel);
    }
    m.self_discrepancy = self_sum / static_cast<double>(cfg.resamples);
    m.d2_ratio = m.self_discrepancy > 0.0 ? m.d2 / m.self_discrepancy
                                          : std::numeric_limits<double>::infinity();

    m.expert_intensity = empirical_intensity(expert, cfg.time_bins, cfg.space_bins, cfg.region);
    m.generated_intensity =
        empirical_intensity(generated, cfg.time_bins, cfg.space_bins, cfg.region);
    m.time_mae = (m.expert_intensity.time_density - m.generated_intensity.time_density)
                     .cwiseAbs()
                     .mean();
    m.space_mae = mean_abs_diff(m.expert_intensity.space_density,
                                m.generated_intensity.space_density);
    double cube_sum = 0.0;
    double peak = 0.0;
    for (std::size_t t = 0; t < m.expert_intensity.cube_density.size(); ++t) {
        cube_sum += mean_abs_diff(m.expert_intensity.cube_density[t],
                                  m.generated_intensity.cube_density[t]);
        peak = std::max(peak, m.expert_intensity.cube_density[t].maxCoeff());
    }
    m.cube_mae = cube_sum / static_cast<double>(m.expert_intensity.cube_density.size());
    m.cube_peak = peak;
    return m;
}

std::string eval_metrics_to_json(const EvalMetrics& metrics) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["n_expert"] = metrics.n_expert;
    j["n_generated"] = metrics.n_generated;
    j["d2"] = metrics.d2;
    j["self_discrepancy"] = metrics.self_discrepancy;
    j["d2_ratio"] = metrics.d2_ratio;
    j["time_mae"] = metrics.time_mae;
    j["space_mae"] = metrics.space_mae;
    j["cube_mae"] = metrics.cube_mae;
    j["cube_peak"] = metrics.cube_peak;
    j["expert_intensity"] = intensity_to_json(metrics.expert_intensity);
    j["generated_intensity"] = intensity_to_json(metrics.generated_intensity);
    {
        const Eigen::VectorXd time_err = (metrics.expert_intensity.time_density -
                                          metrics.generated_intensity.time_density)
                                             .cwiseAbs();
        j["time_abs_error"] = std::vector<double>(time_err.data(), time_err.data() + time_err.size());
        j["space_abs_error"] = grid_to_json((metrics.expert_intensity.space_density -
                                             metrics.generated_intensity.space_density)
                                                .cwiseAbs());
        nlohmann::json cube = nlohmann::json::array();
        for (std::size_t t = 0; t < metrics.expert_intensity.cube_density.size(); ++t) {
            cube.push_back(grid_to_json((metrics.expert_intensity.cube_density[t] -
                                         metrics.generated_intensity.cube_density[t])
                                            .cwiseAbs()));
        }
        j["cube_abs_error"] = cube;
    }
    return j.dump(2);
}

}  // namespace stpp
