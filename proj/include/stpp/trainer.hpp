#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "stpp/generator.hpp"
#include "stpp/kernel.hpp"

namespace stpp {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_expert = 32;   // L
    int batch_learner = 32;  // M
    int iterations = 1000;   // K
    KernelConfig kernel;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;  // global gradient norm; <= 0 disables
    bool unbiased_mmd = false;
    int threads = 0;  // 0 = hardware concurrency, 1 = serial
};

struct TrainReport {
    std::vector<double> d2_trace;  // minibatch discrepancy per iteration
    GeneratorParams params;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

// Exact reverse-mode gradient of sum_i <event_grads[:,i], a_i(theta)> through
// the unrolled emit/update recurrence, replaying the trace's recorded noise.
// The stopping rule is non-differentiable: the event count stays fixed.
// Throws if the trace does not replay to the same events under params.
GeneratorParams backprop_rollout(const GeneratorParams& params, const RolloutTrace& trace,
                                 const StaticFeatures& features,
                                 const Eigen::Matrix3Xd& event_grads);

// Minimizes the squared embedding discrepancy against the expert sequences:
// per iteration, samples L expert sequences, rolls out M learner sequences,
// computes the kernel gradient per generated event, backpropagates through
// the frozen rollouts, and applies one optimizer step. Deterministic given
// the seed regardless of thread count.
TrainReport train(const std::vector<EventSequence>& expert, const TrainConfig& cfg,
                  const GeneratorParams& init);

// Noise floor: mean discrepancy between disjoint random L-subsets of the
// expert data over `resamples` resampling rounds.
double expert_self_discrepancy(const std::vector<EventSequence>& expert, const TrainConfig& cfg,
                               int resamples = 20);

// Adam/SGD step shared with the baseline fit.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, Eigen::Index n, double lr, double beta1, double beta2,
              double eps);
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

// Scales grad in place so its Euclidean norm does not exceed max_norm.
void clip_global_norm(Eigen::VectorXd& grad, double max_norm);

}  // namespace stpp
