#pragma once

#include <Eigen/Core>
#include <vector>

#include "stpp/events.hpp"

namespace stpp {

enum class KernelKind {
    gaussian,
    matern,  // reserved; evaluation reports unsupported
};

struct KernelConfig {
    double bandwidth = 1.0;
    KernelKind kind = KernelKind::gaussian;
};

enum class BatchRole { expert, learner };

// A collection of sequences whose pooled events define one empirical mean
// embedding. Sequences may be empty; the list itself must not be. All
// sequences in a batch must share the same horizon.
struct EmbeddingBatch {
    std::vector<EventSequence> sequences;
    BatchRole role = BatchRole::expert;
};

enum class MmdEstimator {
    biased,    // V-statistic, includes same-sequence pairs
    unbiased,  // U-statistic, excludes same-sequence pairs in the within-batch sums
};

// Gaussian kernel on the concatenated (t, x, y) vector:
// k(e, e') = exp(-|e - e'|^2 / (2 bandwidth^2)). Symmetric, in (0, 1].
double kernel_eval(const Event& a, const Event& b, const KernelConfig& cfg);

// Squared discrepancy between the empirical mean embeddings of the two
// batches, expanded into kernel double sums with per-batch 1/L, 1/M
// normalization. Tiny negative values from cancellation are clamped to 0.
double mmd_squared(const EmbeddingBatch& expert, const EmbeddingBatch& learner,
                   const KernelConfig& cfg, MmdEstimator estimator = MmdEstimator::biased);

// Gradient of mmd_squared with respect to every learner event coordinate.
// Result mirrors the learner batch: one 3 x n_events matrix per sequence with
// rows (d/dt, d/dx, d/dy). Event counts are treated as constants.
std::vector<Eigen::Matrix3Xd> mmd_grad_events(const EmbeddingBatch& expert,
                                              const EmbeddingBatch& learner,
                                              const KernelConfig& cfg,
                                              MmdEstimator estimator = MmdEstimator::biased);

// Unnormalized optimal reward at a query point: mean expert kernel mass minus
// mean learner kernel mass. Positive where the expert places more intensity.
double reward_field(const EmbeddingBatch& expert, const EmbeddingBatch& learner,
                    const Event& query, const KernelConfig& cfg);

namespace detail {
// Gram workspace cap (matrix entries); larger double sums run in column
// blocks. Mutable only as a test hook for the blocked path.
extern Eigen::Index gram_block_entry_cap;
}  // namespace detail

}  // namespace stpp
